#include "losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lcam {

void LossWeights::validate() const {
  for (double v : {lambda1, lambda2, lambda3, lambda4})
    if (!std::isfinite(v) || v < 0.0)
      throw Error(Errc::invalid_argument, "loss weights must be finite and non-negative");
  if (!(lambda4 > 0.0 && lambda4 <= 1.0))
    throw Error(Errc::invalid_argument, "lambda4 must lie in (0, 1]");
}

LossWeights LossWeights::ce_only() { return {0.0, 0.0, 1.0, 0.3}; }

double av_loss(const Map2D& s, double lambda4) {
  double acc = 0.0;
  for (double v : s.values) {
    if (v < 0.0) throw Error(Errc::invalid_argument, "average-value loss needs entries >= 0");
    acc += std::pow(v, lambda4);
  }
  return acc / static_cast<double>(s.size());
}

Map2D av_loss_grad(const Map2D& s, double lambda4) {
  Map2D g(s.rows, s.cols);
  const double n = static_cast<double>(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double v = std::max(s.values[i], kAvGradFloor);
    g.values[i] = lambda4 * std::pow(v, lambda4 - 1.0) / n;
  }
  return g;
}

double tv_loss(const Map2D& s) {
  double acc = 0.0;
  for (int p = 0; p < s.rows; ++p)
    for (int q = 0; q < s.cols; ++q) {
      if (q + 1 < s.cols) {
        const double d = s(p, q) - s(p, q + 1);
        acc += d * d;
      }
      if (p + 1 < s.rows) {
        const double d = s(p, q) - s(p + 1, q);
        acc += d * d;
      }
    }
  return acc;
}

Map2D tv_loss_grad(const Map2D& s) {
  Map2D g(s.rows, s.cols);
  for (int p = 0; p < s.rows; ++p)
    for (int q = 0; q < s.cols; ++q) {
      if (q + 1 < s.cols) {
        const double d = 2.0 * (s(p, q) - s(p, q + 1));
        g(p, q) += d;
        g(p, q + 1) -= d;
      }
      if (p + 1 < s.rows) {
        const double d = 2.0 * (s(p, q) - s(p + 1, q));
        g(p, q) += d;
        g(p + 1, q) -= d;
      }
    }
  return g;
}

namespace {
void check_label(const ClassScores& scores, int y) {
  if (y < 0 || y >= scores.num_classes())
    throw Error(Errc::invalid_argument, "class index " + std::to_string(y) + " out of range");
}
}  // namespace

double ce_loss(const ClassScores& scores, int y) {
  check_label(scores, y);
  const auto& z = scores.logits;
  const double m = *std::max_element(z.begin(), z.end());
  double acc = 0.0;
  for (double v : z) acc += std::exp(v - m);
  return m + std::log(acc) - z[static_cast<std::size_t>(y)];
}

std::vector<double> ce_loss_grad_logits(const ClassScores& scores, int y) {
  check_label(scores, y);
  std::vector<double> g = scores.probs;
  g[static_cast<std::size_t>(y)] -= 1.0;
  return g;
}

LossBreakdown composite_loss(const NormalizedCam& s, const ClassScores& scores, int y,
                             const LossWeights& lw) {
  LossBreakdown b;
  b.tv = tv_loss(s.values);
  b.av = av_loss(s.values, lw.lambda4);
  b.ce = ce_loss(scores, y);
  b.total = lw.lambda1 * b.tv + lw.lambda2 * b.av + lw.lambda3 * b.ce;
  return b;
}

}  // namespace lcam
