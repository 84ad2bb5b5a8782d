#pragma once

// Central finite-difference verification of the analytic gradient of
// batch_loss.

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hybridtn/neural/classifier.hpp"
#include "hybridtn/random.hpp"

namespace hybridtn::neural {

struct GradientCheckEntry {
  std::string tensor;
  Eigen::Index index = 0;
  double analytic = 0;
  double numeric = 0;
  double relative_error = 0;
};

struct GradientCheckReport {
  double max_relative_error = 0;
  std::vector<GradientCheckEntry> entries;
  std::set<std::string> tensors_covered;
};

// |a - n| / max(|a|, |n|, floor). The floor keeps gradients that are zero up
// to rounding from dominating the ratio.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline GradientCheckReport gradient_check(const EncoderParams& params,
                                          std::span<const TrainingSample> batch,
                                          const ClassifierConfig& c, double eps = 1e-4,
                                          std::size_t per_tensor = 8, std::uint64_t seed = 0) {
  EncoderParams grad = params.zeros_like();
  loss_and_gradient(params, batch, c, grad);

  std::vector<int> used_ids;
  for (const auto& s : batch) used_ids.insert(used_ids.end(), s.window.ids.begin(), s.window.ids.end());
  std::sort(used_ids.begin(), used_ids.end());
  used_ids.erase(std::unique(used_ids.begin(), used_ids.end()), used_ids.end());

  std::vector<std::string> names;
  std::vector<const Matrix*> grads;
  grad.for_each([&](const std::string& n, const Matrix& m) {
    names.push_back(n);
    grads.push_back(&m);
  });

  EncoderParams probe = params;
  std::vector<Matrix*> probe_tensors;
  probe.for_each([&](const std::string&, Matrix& m) { probe_tensors.push_back(&m); });

  GradientCheckReport report;
  Rng rng(seed);
  for (std::size_t t = 0; t < names.size(); ++t) {
    Matrix& m = *probe_tensors[t];
    for (std::size_t k = 0; k < per_tensor; ++k) {
      Eigen::Index idx;
      if (names[t] == "embedding") {
        // Rows of characters absent from the batch have zero gradient; probe used rows.
        const int row = used_ids[uniform_below(rng, used_ids.size())];
        idx = row * m.cols() + static_cast<Eigen::Index>(uniform_below(rng, static_cast<std::uint64_t>(m.cols())));
      } else {
        idx = static_cast<Eigen::Index>(uniform_below(rng, static_cast<std::uint64_t>(m.size())));
      }
      const double orig = m.data()[idx];
      m.data()[idx] = orig + eps;
      const double up = batch_loss(probe, batch, c);
      m.data()[idx] = orig - eps;
      const double down = batch_loss(probe, batch, c);
      m.data()[idx] = orig;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = grads[t]->data()[idx];
      GradientCheckEntry e{names[t], idx, analytic, numeric, relative_error(analytic, numeric)};
      report.max_relative_error = std::max(report.max_relative_error, e.relative_error);
      report.entries.push_back(e);
      report.tensors_covered.insert(names[t]);
    }
  }
  return report;
}

}  // namespace hybridtn::neural
