#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "core/tensor.hpp"

namespace lcam {

// Normalized network input, stored channel-major (C x H x W).
struct Image {
  Tensor pixels;

  Image() = default;
  explicit Image(Tensor t);
  Image(int channels, int height, int width, double fill = 0.0)
      : Image(Tensor({channels, height, width}, fill)) {}

  int channels() const { return pixels.dim(0); }
  int height() const { return pixels.dim(1); }
  int width() const { return pixels.dim(2); }
};

// Last-layer activations A, stored channel-major: K x P x Q.
struct FeatureMaps {
  Tensor values;

  FeatureMaps() = default;
  explicit FeatureMaps(Tensor t);

  int channels() const { return values.dim(0); }  // K
  int rows() const { return values.dim(1); }      // P
  int cols() const { return values.dim(2); }      // Q
  const double* plane(int k) const {
    return values.data() + static_cast<std::size_t>(k) * rows() * cols();
  }
  double* plane(int k) { return values.data() + static_cast<std::size_t>(k) * rows() * cols(); }
};

// Classifier output. Logits are kept so cross-entropy can be evaluated stably.
struct ClassScores {
  std::vector<double> logits;
  std::vector<double> probs;

  static ClassScores from_logits(std::vector<double> logits);
  // Builds scores from probabilities (logits = log p); used for fixtures.
  static ClassScores from_probs(const std::vector<double>& probs);

  int num_classes() const { return static_cast<int>(probs.size()); }
  // Lowest index wins ties.
  int argmax() const;
};

struct PreprocessSpec {
  int resize_shorter = 256;
  int crop = 224;
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> stddev{0.229, 0.224, 0.225};
};

}  // namespace lcam
