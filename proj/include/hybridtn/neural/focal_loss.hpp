#pragma once

#include <algorithm>
#include <cmath>

namespace hybridtn::neural {

inline constexpr double kProbabilityEpsilon = 1e-7;

// -alpha (1-p)^gamma log p for a correct target (y = 1), and
// -alpha p^gamma log(1-p) for y = 0. p is clamped to [1e-7, 1 - 1e-7].
// gamma = 0, alpha = 1 gives plain cross-entropy.
inline double focal_loss(double p, bool y, double alpha, double gamma) {
  p = std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  if (y) return -alpha * std::pow(1.0 - p, gamma) * std::log(p);
  return -alpha * std::pow(p, gamma) * std::log1p(-p);
}

// d/dp of the y = 1 branch; zero where the clamp is active.
inline double focal_loss_grad(double p, double alpha, double gamma) {
  if (p < kProbabilityEpsilon || p > 1.0 - kProbabilityEpsilon) return 0.0;
  const double q = 1.0 - p;
  const double lead = gamma == 0.0 ? 0.0 : alpha * gamma * std::pow(q, gamma - 1.0) * std::log(p);
  return lead - alpha * std::pow(q, gamma) / p;
}

}  // namespace hybridtn::neural
