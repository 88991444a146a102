#include "backbone/types.hpp"

#include <algorithm>
#include <cmath>

namespace lcam {

Image::Image(Tensor t) : pixels(std::move(t)) {
  if (pixels.rank() != 3) throw ShapeError("image must be CxHxW, got " + shape_string(pixels.shape()));
}

FeatureMaps::FeatureMaps(Tensor t) : values(std::move(t)) {
  if (values.rank() != 3)
    throw ShapeError("feature maps must be KxPxQ, got " + shape_string(values.shape()));
}

ClassScores ClassScores::from_logits(std::vector<double> logits) {
  if (logits.empty()) throw ShapeError("class scores need at least one class");
  ClassScores s;
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  s.probs.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    s.probs[i] = std::exp(logits[i] - m);
    z += s.probs[i];
  }
  for (double& p : s.probs) p /= z;
  s.logits = std::move(logits);
  return s;
}

ClassScores ClassScores::from_probs(const std::vector<double>& probs) {
  std::vector<double> logits(probs.size());
  std::transform(probs.begin(), probs.end(), logits.begin(), [](double p) { return std::log(p); });
  ClassScores s = from_logits(std::move(logits));
  s.probs = probs;
  return s;
}

int ClassScores::argmax() const {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

}  // namespace lcam
