#pragma once

#include <vector>

#include "attention/attention_cam.hpp"
#include "backbone/types.hpp"

namespace lcam {

// total = lambda1 * TV + lambda2 * AV + lambda3 * CE, AV using exponent lambda4.
struct LossWeights {
  double lambda1 = 0.01;
  double lambda2 = 2.0;
  double lambda3 = 1.5;
  double lambda4 = 0.3;

  void validate() const;
  // CE-only ablation weights (0, 0, 1, lambda4).
  static LossWeights ce_only();
};

struct LossBreakdown {
  double tv = 0.0;
  double av = 0.0;
  double ce = 0.0;
  double total = 0.0;
};

// Lower bound applied to s inside the derivative of s^lambda4.
inline constexpr double kAvGradFloor = 1e-6;

double av_loss(const Map2D& s, double lambda4);
Map2D av_loss_grad(const Map2D& s, double lambda4);

double tv_loss(const Map2D& s);
Map2D tv_loss_grad(const Map2D& s);

// -log p_y evaluated as logsumexp(z) - z_y.
double ce_loss(const ClassScores& scores, int y);
std::vector<double> ce_loss_grad_logits(const ClassScores& scores, int y);

LossBreakdown composite_loss(const NormalizedCam& s, const ClassScores& scores, int y,
                             const LossWeights& lw);

}  // namespace lcam
