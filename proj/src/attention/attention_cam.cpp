#include "attention/attention_cam.hpp"

#include <cmath>
#include <random>
#include <string>

namespace lcam {

AttentionParams::AttentionParams(int r, int k) : num_classes(r), channels(k) {
  if (r <= 0 || k <= 0)
    throw Error(Errc::invalid_argument, "attention dimensions must be positive (R=" +
                                            std::to_string(r) + ", K=" + std::to_string(k) + ")");
  weights.assign(static_cast<std::size_t>(r) * k, 0.0);
  bias.assign(static_cast<std::size_t>(r), 0.0);
}

std::span<const double> AttentionParams::row(int r) const {
  return {weights.data() + static_cast<std::size_t>(r) * channels,
          static_cast<std::size_t>(channels)};
}

std::span<double> AttentionParams::row(int r) {
  return {weights.data() + static_cast<std::size_t>(r) * channels,
          static_cast<std::size_t>(channels)};
}

void AttentionParams::validate() const {
  if (weights.size() != static_cast<std::size_t>(num_classes) * channels ||
      bias.size() != static_cast<std::size_t>(num_classes))
    throw ShapeError("attention parameter arrays do not match R x K");
  for (double v : weights)
    if (!std::isfinite(v)) throw Error(Errc::invalid_argument, "non-finite attention weight");
  for (double v : bias)
    if (!std::isfinite(v)) throw Error(Errc::invalid_argument, "non-finite attention bias");
}

AttentionParams init_params(int num_classes, int channels, std::uint64_t seed) {
  AttentionParams p(num_classes, channels);
  const double bound = 1.0 / channels;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& w : p.weights) w = dist(rng);
  return p;
}

namespace {
void check_class(const AttentionParams& params, int y) {
  if (y < 0 || y >= params.num_classes)
    throw Error(Errc::invalid_argument, "class index " + std::to_string(y) +
                                            " out of range [0, " +
                                            std::to_string(params.num_classes) + ")");
}
void check_channels(const AttentionParams& params, const FeatureMaps& a) {
  if (a.channels() != params.channels)
    throw ShapeError("feature maps have K=" + std::to_string(a.channels()) +
                     " but attention expects K=" + std::to_string(params.channels));
}
}  // namespace

Cam compute_cam(const AttentionParams& params, int y, const FeatureMaps& a) {
  check_class(params, y);
  check_channels(params, a);
  const int p = a.rows(), q = a.cols();
  const std::size_t plane = static_cast<std::size_t>(p) * q;
  Map2D out(p, q, params.bias[static_cast<std::size_t>(y)]);
  const auto w = params.row(y);
  for (int k = 0; k < a.channels(); ++k) {
    const double wk = w[static_cast<std::size_t>(k)];
    const double* src = a.plane(k);
    for (std::size_t i = 0; i < plane; ++i) out.values[i] += wk * src[i];
  }
  return {std::move(out), y};
}

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

NormalizedCam sigmoid_normalize(const Cam& cam) {
  Map2D s = cam.values;
  for (double& v : s.values) v = sigmoid(v);
  return {std::move(s)};
}

void accumulate_cam_gradient(const FeatureMaps& a, int y, const Map2D& grad_cam,
                             AttentionParams& grad) {
  check_class(grad, y);
  check_channels(grad, a);
  if (grad_cam.rows != a.rows() || grad_cam.cols != a.cols())
    throw ShapeError("CAM gradient does not match feature map grid");
  auto gw = grad.row(y);
  for (int k = 0; k < a.channels(); ++k) {
    const double* src = a.plane(k);
    double acc = 0.0;
    for (std::size_t i = 0; i < grad_cam.size(); ++i) acc += grad_cam.values[i] * src[i];
    gw[static_cast<std::size_t>(k)] += acc;
  }
  double db = 0.0;
  for (double g : grad_cam.values) db += g;
  grad.bias[static_cast<std::size_t>(y)] += db;
}

}  // namespace lcam
