#pragma once

// Self-describing binary container used for backbone weight files and
// attention checkpoints:
//
//   "LCAMARC\0" | u32 format | u64 header_len | JSON header | payload | sha256
//
// The JSON header carries free-form metadata plus an array table
// (name, dtype f32|f64, shape, byte offset into the payload). The trailing
// SHA-256 covers every preceding byte, so truncation or bit rot is detected
// before any array is handed out. Integers are little-endian.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "core/errors.hpp"
#include "core/tensor.hpp"

namespace lcam {

inline constexpr std::uint32_t kArchiveFormat = 1;

enum class ArrayDType { f32, f64 };

struct Archive {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> arrays;

  const Tensor& array(const std::string& name) const;
  bool has(const std::string& name) const;
};

class ArchiveError : public Error {
 public:
  explicit ArchiveError(const std::string& what) : Error(Errc::corrupt, what) {}
};

class ArchiveVersionError : public Error {
 public:
  explicit ArchiveVersionError(const std::string& what) : Error(Errc::version_mismatch, what) {}
};

// Writes to a sibling temp file and renames, so readers never see a partial file.
void write_archive(const std::filesystem::path& path, const Archive& archive,
                   ArrayDType dtype = ArrayDType::f64);
Archive read_archive(const std::filesystem::path& path);

// Atomic text write (temp file + rename).
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace lcam
