#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "backbone/types.hpp"
#include "core/tensor.hpp"

namespace lcam {

// Class-conditional attention head: row r of `weights` (length K) and
// bias[r] turn the K feature maps into the CAM of class r.
struct AttentionParams {
  int num_classes = 0;  // R
  int channels = 0;     // K
  std::vector<double> weights;  // R x K, row-major
  std::vector<double> bias;     // R

  AttentionParams() = default;
  AttentionParams(int r, int k);

  std::span<const double> row(int r) const;
  std::span<double> row(int r);
  void validate() const;

  friend bool operator==(const AttentionParams&, const AttentionParams&) = default;
};

// Raw CAM L^(y) (P x Q).
struct Cam {
  Map2D values;
  int class_index = 0;
};

// sigma(L^(y)), entries in (0, 1).
struct NormalizedCam {
  Map2D values;
};

// Weights ~ U[-1/K, 1/K], zero bias, reproducible for a given seed.
AttentionParams init_params(int num_classes, int channels, std::uint64_t seed);

Cam compute_cam(const AttentionParams& params, int y, const FeatureMaps& a);

double sigmoid(double v);
NormalizedCam sigmoid_normalize(const Cam& cam);

// Adds dLoss/dW[y,:] and dLoss/db[y] given dLoss/dL (the gradient w.r.t. the
// raw CAM) into `grad`, which has the same layout as the parameters.
void accumulate_cam_gradient(const FeatureMaps& a, int y, const Map2D& grad_cam,
                             AttentionParams& grad);

}  // namespace lcam
