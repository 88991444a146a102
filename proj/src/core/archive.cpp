#include "core/archive.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "core/digest.hpp"

namespace lcam {

namespace {

constexpr char kMagic[8] = {'L', 'C', 'A', 'M', 'A', 'R', 'C', '\0'};
constexpr std::size_t kDigestHexLen = 64;

template <typename T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <typename T>
T get(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw ArchiveError("archive truncated");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::filesystem::path temp_sibling(const std::filesystem::path& path) {
  return path.string() + ".tmp";
}

void commit(const std::filesystem::path& path, const std::string& bytes) {
  const auto tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot open for writing: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::io, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(Errc::io, "cannot move " + tmp.string() + " to " + path.string() + ": " +
                             ec.message());
  }
}

void read_arrays(const nlohmann::json& header, const std::string& body, std::size_t payload_start,
                 Archive& archive) {
  for (const auto& entry : header.at("arrays")) {
    const auto shape = entry.at("shape").get<Shape>();
    const std::string dtype = entry.at("dtype");
    const std::size_t offset = entry.at("offset");
    const std::size_t nbytes = entry.at("bytes");
    const std::size_t count = shape_volume(shape);
    const std::size_t width = dtype == "f64" ? 8 : dtype == "f32" ? 4 : 0;
    if (width == 0) throw ArchiveError("unknown dtype " + dtype);
    if (nbytes != count * width || payload_start + offset + nbytes > body.size())
      throw ArchiveError("array '" + entry.at("name").get<std::string>() + "' out of bounds");
    std::vector<double> data(count);
    const char* src = body.data() + payload_start + offset;
    if (width == 8) {
      std::memcpy(data.data(), src, nbytes);
    } else {
      for (std::size_t i = 0; i < count; ++i) {
        float f;
        std::memcpy(&f, src + i * 4, 4);
        data[i] = f;
      }
    }
    archive.arrays.emplace_back(entry.at("name"), Tensor(shape, std::move(data)));
  }
}

}  // namespace

const Tensor& Archive::array(const std::string& name) const {
  for (const auto& [n, t] : arrays)
    if (n == name) return t;
  throw ArchiveError("archive has no array named '" + name + "'");
}

bool Archive::has(const std::string& name) const {
  for (const auto& entry : arrays)
    if (entry.first == name) return true;
  return false;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  commit(path, text);
}

void write_archive(const std::filesystem::path& path, const Archive& archive, ArrayDType dtype) {
  std::string payload;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& [name, tensor] : archive.arrays) {
    const std::size_t offset = payload.size();
    if (dtype == ArrayDType::f64) {
      payload.append(reinterpret_cast<const char*>(tensor.data()), tensor.size() * sizeof(double));
    } else {
      for (double v : tensor.values()) put(payload, static_cast<float>(v));
    }
    table.push_back({{"name", name},
                     {"dtype", dtype == ArrayDType::f64 ? "f64" : "f32"},
                     {"shape", tensor.shape()},
                     {"offset", offset},
                     {"bytes", payload.size() - offset}});
  }
  const std::string header = nlohmann::json{{"meta", archive.meta}, {"arrays", table}}.dump();

  std::string bytes(kMagic, sizeof(kMagic));
  put<std::uint32_t>(bytes, kArchiveFormat);
  put<std::uint64_t>(bytes, header.size());
  bytes += header;
  bytes += payload;
  bytes += sha256_hex(bytes);
  commit(path, bytes);
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "cannot open archive: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();

  if (bytes.size() < sizeof(kMagic) + 12 + kDigestHexLen ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw ArchiveError("not an lcam archive or file truncated: " + path.string());
  const std::string body = bytes.substr(0, bytes.size() - kDigestHexLen);
  if (sha256_hex(body) != bytes.substr(bytes.size() - kDigestHexLen))
    throw ArchiveError("archive checksum mismatch (corrupt or truncated): " + path.string());

  std::size_t pos = sizeof(kMagic);
  const auto format = get<std::uint32_t>(body, pos);
  if (format != kArchiveFormat)
    throw ArchiveVersionError("unsupported archive format " + std::to_string(format) +
                              " (expected " + std::to_string(kArchiveFormat) + ")");
  const auto header_len = get<std::uint64_t>(body, pos);
  if (pos + header_len > body.size()) throw ArchiveError("archive header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(body.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ArchiveError(std::string("archive header is not valid JSON: ") + e.what());
  }
  pos += header_len;
  const std::size_t payload_start = pos;

  Archive archive;
  try {
    archive.meta = header.value("meta", nlohmann::json::object());
    read_arrays(header, body, payload_start, archive);
  } catch (const nlohmann::json::exception& e) {
    throw ArchiveError(std::string("malformed archive header: ") + e.what());
  }
  return archive;
}

}  // namespace lcam

