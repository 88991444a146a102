#include "masking/masking.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace lcam {

namespace {

struct Tap {
  int lo, hi;
  double frac;  // weight of `hi`
};

std::vector<Tap> axis_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    const double src = std::max(0.0, (i + 0.5) * scale - 0.5);
    int lo = static_cast<int>(std::floor(src));
    double frac = src - lo;
    if (lo >= in - 1) {
      lo = in - 1;
      frac = 0.0;
    }
    taps[static_cast<std::size_t>(i)] = {lo, std::min(lo + 1, in - 1), frac};
  }
  return taps;
}

void check_target(int rows, int cols) {
  if (rows <= 0 || cols <= 0)
    throw Error(Errc::invalid_argument, "upscale target must be positive, got " +
                                            std::to_string(rows) + "x" + std::to_string(cols));
}

}  // namespace

Map2D bilinear_resize(const Map2D& src, int rows, int cols) {
  check_target(rows, cols);
  if (src.rows <= 0 || src.cols <= 0) throw ShapeError("cannot resize an empty map");
  const auto ty = axis_taps(src.rows, rows);
  const auto tx = axis_taps(src.cols, cols);
  Map2D out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const Tap& a = ty[static_cast<std::size_t>(r)];
    for (int c = 0; c < cols; ++c) {
      const Tap& b = tx[static_cast<std::size_t>(c)];
      const double top = src(a.lo, b.lo) * (1.0 - b.frac) + src(a.lo, b.hi) * b.frac;
      const double bottom = src(a.hi, b.lo) * (1.0 - b.frac) + src(a.hi, b.hi) * b.frac;
      out(r, c) = top * (1.0 - a.frac) + bottom * a.frac;
    }
  }
  return out;
}

Map2D bilinear_resize_adjoint(const Map2D& grad_out, int src_rows, int src_cols) {
  check_target(src_rows, src_cols);
  const auto ty = axis_taps(src_rows, grad_out.rows);
  const auto tx = axis_taps(src_cols, grad_out.cols);
  Map2D g(src_rows, src_cols);
  for (int r = 0; r < grad_out.rows; ++r) {
    const Tap& a = ty[static_cast<std::size_t>(r)];
    for (int c = 0; c < grad_out.cols; ++c) {
      const Tap& b = tx[static_cast<std::size_t>(c)];
      const double v = grad_out(r, c);
      g(a.lo, b.lo) += v * (1.0 - a.frac) * (1.0 - b.frac);
      g(a.lo, b.hi) += v * (1.0 - a.frac) * b.frac;
      g(a.hi, b.lo) += v * a.frac * (1.0 - b.frac);
      g(a.hi, b.hi) += v * a.frac * b.frac;
    }
  }
  return g;
}

UpscaledMask upscale(const NormalizedCam& s, int rows, int cols) {
  return {bilinear_resize(s.values, rows, cols)};
}

FeatureMaps mask_feature_maps(const FeatureMaps& a, const NormalizedCam& s) {
  if (s.values.rows != a.rows() || s.values.cols != a.cols())
    throw ShapeError("mask " + std::to_string(s.values.rows) + "x" +
                     std::to_string(s.values.cols) + " does not match feature grid " +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  FeatureMaps out = a;
  const std::size_t plane = s.values.size();
  for (int k = 0; k < a.channels(); ++k) {
    double* dst = out.plane(k);
    for (std::size_t i = 0; i < plane; ++i) dst[i] *= s.values.values[i];
  }
  return out;
}

Image apply_mask(const Image& x, const Map2D& mask) {
  if (mask.rows != x.height() || mask.cols != x.width())
    throw ShapeError("mask " + std::to_string(mask.rows) + "x" + std::to_string(mask.cols) +
                     " does not match image " + std::to_string(x.height()) + "x" +
                     std::to_string(x.width()));
  Image out = x;
  const std::size_t plane = mask.size();
  for (int c = 0; c < x.channels(); ++c) {
    double* dst = out.pixels.data() + static_cast<std::size_t>(c) * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] *= mask.values[i];
  }
  return out;
}

Image mask_image(const Image& x, const NormalizedCam& s) {
  return apply_mask(x, upscale(s, x.height(), x.width()).values);
}

}  // namespace lcam
