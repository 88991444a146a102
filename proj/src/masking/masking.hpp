#pragma once

#include "attention/attention_cam.hpp"
#include "backbone/types.hpp"

namespace lcam {

// CAM upscaled to image resolution (rows = H, cols = W).
struct UpscaledMask {
  Map2D values;
};

// Bilinear resize with half-pixel centres (no corner alignment): output pixel
// i samples source coordinate (i + 0.5) * in / out - 0.5, clamped to the grid.
Map2D bilinear_resize(const Map2D& src, int rows, int cols);
// Adjoint of bilinear_resize: maps a gradient on the resized grid back onto
// the source grid.
Map2D bilinear_resize_adjoint(const Map2D& grad_out, int src_rows, int src_cols);

UpscaledMask upscale(const NormalizedCam& s, int rows, int cols);

// A'[k] = A[k] (.) S for every channel k.
FeatureMaps mask_feature_maps(const FeatureMaps& a, const NormalizedCam& s);

// X'[c] = X[c] (.) M for every channel c, M already at image resolution.
Image apply_mask(const Image& x, const Map2D& mask);
// X'[c] = X[c] (.) upscale(S) for every channel c.
Image mask_image(const Image& x, const NormalizedCam& s);

}  // namespace lcam
