#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "backbone/backbone.hpp"
#include "core/raw_image.hpp"

namespace lcam::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "lcam-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Tiny CNN with random (He) weights and randomised biases so no ReLU is dead.
inline std::unique_ptr<ClassifierSplit> tiny_split(const TinyCnnSpec& spec, std::uint64_t seed,
                                                   SplitPoint sp = SplitPoint::last_conv) {
  ArchSpec arch = tiny_cnn_arch(spec, "tinycnn-test");
  auto net = build_network(arch);
  init_random(*net, seed);
  std::mt19937_64 rng(seed + 17);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::vector<nn::NamedTensor*> params;
  net->collect(params);
  for (auto* p : params)
    if (p->name.ends_with(".bias"))
      for (double& v : p->value.values()) v = u(rng);
  return std::make_unique<ClassifierSplit>(std::move(arch), std::move(net), sp);
}

inline Map2D random_map(std::mt19937_64& rng, int rows, int cols, double lo = 0.0,
                        double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Map2D m(rows, cols);
  for (double& v : m.values) v = u(rng);
  return m;
}

inline Image random_image(std::mt19937_64& rng, int c, int h, int w) {
  std::normal_distribution<double> n(0.0, 1.0);
  Image x(c, h, w);
  for (double& v : x.pixels.values()) v = n(rng);
  return x;
}

inline RawImage random_raw(std::mt19937_64& rng, int w, int h) {
  std::uniform_int_distribution<int> u(0, 255);
  RawImage img(w, h);
  for (auto& b : img.rgb) b = static_cast<std::uint8_t>(u(rng));
  return img;
}

inline InMemoryImages random_raw_set(std::mt19937_64& rng, int count, int w, int h) {
  std::vector<RawImage> images;
  for (int i = 0; i < count; ++i) images.push_back(random_raw(rng, w, h));
  return InMemoryImages(std::move(images));
}

// Independent half-pixel bilinear sampler, written per output pixel.
inline double oracle_sample(const Map2D& src, int rows, int cols, int i, int j) {
  auto coord = [](int o, int in, int out) {
    double s = (o + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };
  const double sy = coord(i, src.rows, rows), sx = coord(j, src.cols, cols);
  const int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
  const int y1 = std::min(y0 + 1, src.rows - 1), x1 = std::min(x0 + 1, src.cols - 1);
  const double wy = sy - y0, wx = sx - x0;
  return (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
         wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
}

inline Map2D oracle_upscale(const Map2D& src, int rows, int cols) {
  Map2D out(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out(i, j) = oracle_sample(src, rows, cols, i, j);
  return out;
}

// |a - b| / max(|a|, |b|, floor)
inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace lcam::testing
