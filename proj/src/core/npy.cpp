#include "core/npy.hpp"

#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

#include "core/archive.hpp"

namespace lcam {

namespace {
constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
}  // namespace

void write_npy(const std::filesystem::path& path, const Map2D& map) {
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" +
                       std::to_string(map.rows) + ", " + std::to_string(map.cols) + "), }";
  const std::size_t preamble = kMagicLen + 2 + 2;
  const std::size_t total = preamble + header.size() + 1;
  header.append((64 - total % 64) % 64, ' ');
  header.push_back('\n');

  std::string bytes(kMagic, kMagicLen);
  bytes.push_back('\x01');
  bytes.push_back('\x00');
  const auto hlen = static_cast<std::uint16_t>(header.size());
  bytes.push_back(static_cast<char>(hlen & 0xff));
  bytes.push_back(static_cast<char>(hlen >> 8));
  bytes += header;
  bytes.append(reinterpret_cast<const char*>(map.values.data()), map.values.size() * sizeof(double));
  write_text_atomic(path, bytes);
}

Map2D read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  if (bytes.size() < kMagicLen + 4 || bytes.compare(0, kMagicLen, kMagic, kMagicLen) != 0 ||
      bytes[kMagicLen] != '\x01')
    throw Error(Errc::corrupt, "not a version 1 .npy file: " + path.string());
  const std::size_t hlen = static_cast<unsigned char>(bytes[kMagicLen + 2]) |
                           (static_cast<std::size_t>(static_cast<unsigned char>(bytes[kMagicLen + 3])) << 8);
  const std::size_t data_start = kMagicLen + 4 + hlen;
  if (bytes.size() < data_start) throw Error(Errc::corrupt, "truncated .npy header");
  const std::string header = bytes.substr(kMagicLen + 4, hlen);

  static const std::regex shape_re(R"('shape':\s*\((\d+),\s*(\d+),?\s*\))");
  std::smatch m;
  if (header.find("'<f8'") == std::string::npos ||
      header.find("'fortran_order': False") == std::string::npos ||
      !std::regex_search(header, m, shape_re))
    throw Error(Errc::corrupt, "unsupported .npy layout in " + path.string());
  const int rows = std::stoi(m[1]);
  const int cols = std::stoi(m[2]);
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  if (bytes.size() != data_start + count * sizeof(double))
    throw Error(Errc::corrupt, ".npy payload size mismatch in " + path.string());
  std::vector<double> v(count);
  std::memcpy(v.data(), bytes.data() + data_start, count * sizeof(double));
  return Map2D(rows, cols, std::move(v));
}

}  // namespace lcam
