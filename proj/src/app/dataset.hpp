#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/raw_image.hpp"

namespace lcam {

enum class DatasetLayout { auto_detect, per_class, flat };
std::string to_string(DatasetLayout l);
DatasetLayout parse_layout(std::string_view text);

struct DatasetEntry {
  std::filesystem::path path;
  std::optional<int> label;  // ground truth, per-class layout only
};

struct SkippedFile {
  std::filesystem::path path;
  std::string reason;
};

struct SubsetSpec {
  std::optional<std::size_t> size;  // nullopt keeps everything
  std::uint64_t seed = 0;
};

struct DatasetManifest {
  std::filesystem::path root;
  DatasetLayout layout = DatasetLayout::flat;
  std::vector<std::string> class_names;  // index = ground-truth class id
  std::vector<DatasetEntry> entries;     // sorted by path
  std::vector<SkippedFile> skipped;
  SubsetSpec subset;

  bool has_labels() const;
  // Entry path relative to the root, extension dropped, separators as '_'.
  std::string display_name(std::size_t i) const;
  nlohmann::json to_json() const;
};

// Class ids follow the sorted order of the class directory names. Files that
// fail to decode are listed in `skipped` instead of `entries`.
DatasetManifest ingest_dataset(const std::filesystem::path& root,
                               DatasetLayout layout = DatasetLayout::auto_detect,
                               const SubsetSpec& subset = {}, bool verify_decode = true);

// Decodes manifest entries lazily.
class ManifestImages final : public ImageSource {
 public:
  explicit ManifestImages(const DatasetManifest& m) : manifest_(m) {}
  std::size_t size() const override { return manifest_.entries.size(); }
  RawImage load(std::size_t index) const override;

 private:
  const DatasetManifest& manifest_;
};

}  // namespace lcam
