#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hybridtn/corpus_types.hpp"

namespace hybridtn {

enum class Route {
  kPriorityRule,  // priority list hit, resolved by the rule engine
  kNeural,        // classifier label passed verification
  kFallbackRule,  // classifier label failed verification, rule engine took over
  kBaselineRule,  // rules-only normalization
  kUnmatched,     // nothing could label the span; left verbatim
};

inline std::string_view route_name(Route r) {
  switch (r) {
    case Route::kPriorityRule: return "priority_rule";
    case Route::kNeural: return "neural";
    case Route::kFallbackRule: return "fallback_rule";
    case Route::kBaselineRule: return "baseline_rule";
    case Route::kUnmatched: return "unmatched";
  }
  return "?";
}

struct NormalizationTrace {
  NSWSpan span;
  Text surface;
  Route route = Route::kUnmatched;
  std::optional<LabelId> label;
  std::optional<Text> sfw;
  std::optional<std::vector<double>> probabilities;
  // Set when the classifier's label was rejected by the format verifier, or
  // the classifier refused the span (no legal label).
  bool verification_failed = false;
  std::optional<LabelId> rejected_label;
  std::string rule_name;  // rule that fired on rule routes
};

struct NormalizationResult {
  Text text;
  std::vector<NormalizationTrace> traces;
};

// Replaces spans right to left so earlier offsets stay valid. Traces without
// an SFW keep their original surface.
inline Text splice(TextView text, const std::vector<NormalizationTrace>& traces) {
  Text out(text);
  for (auto it = traces.rbegin(); it != traces.rend(); ++it) {
    if (!it->sfw) continue;
    out.replace(it->span.start, it->span.length(), *it->sfw);
  }
  return out;
}

}  // namespace hybridtn
