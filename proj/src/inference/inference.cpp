#include "inference/inference.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "core/npy.hpp"
#include "masking/masking.hpp"

namespace lcam {

std::string to_string(SaliencySource s) {
  switch (s) {
    case SaliencySource::lcam: return "lcam";
    case SaliencySource::baseline_random: return "baseline_random";
    case SaliencySource::baseline_center: return "baseline_center";
  }
  return "unknown";
}

Map2D minmax_normalize(const Map2D& m) {
  Map2D out(m.rows, m.cols);
  if (m.size() == 0) return out;
  const double lo = m.min(), hi = m.max();
  if (!(hi > lo)) return out;
  const double range = hi - lo;
  for (std::size_t i = 0; i < m.size(); ++i) out.values[i] = (m.values[i] - lo) / range;
  return out;
}

SaliencyMap explain(const ClassifierSplit& split, const AttentionParams& params, const Image& x,
                    std::optional<int> y, ClassScores* scores) {
  if (params.num_classes != split.num_classes() || params.channels != split.feature_shape()[0])
    throw ShapeError("attention parameters (" + std::to_string(params.num_classes) + "x" +
                     std::to_string(params.channels) + ") do not fit this backbone");
  if (y && (*y < 0 || *y >= params.num_classes))
    throw Error(Errc::invalid_argument, "class index " + std::to_string(*y) + " out of range [0, " +
                                            std::to_string(params.num_classes) + ")");
  const FeatureMaps a = split.features(x);
  int label = y.value_or(0);
  if (!y || scores) {
    ClassScores head = split.head(a);
    if (!y) label = head.argmax();
    if (scores) *scores = std::move(head);
  }
  const Cam cam = compute_cam(params, label, a);
  return {bilinear_resize(minmax_normalize(cam), x.height(), x.width()), label,
          SaliencySource::lcam};
}

void verify_binding(const ClassifierSplit& split, const Checkpoint& ckpt) {
  if (ckpt.frozen_digest != split.frozen_digest())
    throw Error(Errc::digest_mismatch,
                "checkpoint was trained on backbone " + ckpt.frozen_digest.substr(0, 12) +
                    "..., loaded backbone is " + split.frozen_digest().substr(0, 12) + "...");
  if (ckpt.config.split_point != split.split_point())
    throw Error(Errc::digest_mismatch, "checkpoint split point " +
                                           to_string(ckpt.config.split_point) +
                                           " differs from backbone split");
}

LcamExplainer::LcamExplainer(const ClassifierSplit& split, const Checkpoint& ckpt,
                             std::string method_id)
    : split_(split), params_(ckpt.params), method_id_(std::move(method_id)) {
  verify_binding(split, ckpt);
  params_.validate();
}

SaliencyMap LcamExplainer::explain(const Image& x, std::optional<int> y) const {
  return lcam::explain(split_, params_, x, y);
}

SaliencyMap RandomBaseline::explain(const Image& x, std::optional<int> y) const {
  // FNV-1a over the pixel bytes keeps the map a pure function of (seed, x).
  std::uint64_t h = 1469598103934665603ULL ^ seed_;
  const auto* bytes = reinterpret_cast<const unsigned char*>(x.pixels.data());
  for (std::size_t i = 0; i < x.pixels.size() * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  std::mt19937_64 rng(h);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  Map2D m(x.height(), x.width());
  for (double& v : m.values) v = dist(rng);
  return {std::move(m), y.value_or(0), SaliencySource::baseline_random};
}

SaliencyMap CenterBaseline::explain(const Image& x, std::optional<int> y) const {
  const int h = x.height(), w = x.width();
  const double sigma = sigma_fraction_ * std::min(h, w);
  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
  Map2D m(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
      m(r, c) = std::exp(-d2 / (2.0 * sigma * sigma));
    }
  return {minmax_normalize(m), y.value_or(0), SaliencySource::baseline_center};
}

RawImage render_overlay(const RawImage& view, const Map2D& saliency) {
  if (saliency.rows != view.height || saliency.cols != view.width)
    throw ShapeError("saliency map does not match the image size");
  cv::Mat level(view.height, view.width, CV_8UC1);
  for (int r = 0; r < view.height; ++r)
    for (int c = 0; c < view.width; ++c)
      level.at<std::uint8_t>(r, c) =
          static_cast<std::uint8_t>(std::lround(std::clamp(saliency(r, c), 0.0, 1.0) * 255.0));
  cv::Mat heat_bgr, heat_rgb, blended;
  cv::applyColorMap(level, heat_bgr, cv::COLORMAP_JET);
  cv::cvtColor(heat_bgr, heat_rgb, cv::COLOR_BGR2RGB);
  cv::Mat base(view.height, view.width, CV_8UC3, const_cast<std::uint8_t*>(view.rgb.data()));
  cv::addWeighted(base, 0.5, heat_rgb, 0.5, 0.0, blended);
  RawImage out(view.width, view.height);
  for (int r = 0; r < view.height; ++r)
    std::memcpy(out.pixel(0, r), blended.ptr<std::uint8_t>(r),
                static_cast<std::size_t>(view.width) * 3);
  return out;
}

OverlayFiles export_overlay(const RawImage& view, const SaliencyMap& v,
                            const std::filesystem::path& dir, const std::string& stem) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::io, "cannot create " + dir.string() + ": " + ec.message());
  OverlayFiles files{dir / (stem + ".png"), dir / (stem + ".npy")};
  write_png(files.png, render_overlay(view, v.values));
  write_npy(files.npy, v.values);
  return files;
}

}  // namespace lcam
