#pragma once

// Per-label surface format checks. The same registry produces the softmax
// mask inside the classifier and the post-classification verifier.

#include <regex>
#include <string>
#include <vector>

#include "hybridtn/error.hpp"
#include "hybridtn/taxonomy.hpp"
#include "hybridtn/unicode.hpp"

namespace hybridtn {

// One flag per label id.
using LabelMask = std::vector<bool>;

class FormatRegistry {
 public:
  FormatRegistry() = default;

  explicit FormatRegistry(const LabelSet& labels) {
    patterns_.reserve(labels.size());
    for (const auto& l : labels.all()) {
      try {
        patterns_.emplace_back(from_utf8(l.format_pattern), std::regex::ECMAScript);
      } catch (const std::regex_error& e) {
        throw ConfigError("label '" + l.name + "': invalid format pattern: " + e.what());
      }
    }
  }

  std::size_t size() const noexcept { return patterns_.size(); }

  LabelMask legal_labels(TextView surface) const {
    LabelMask mask(patterns_.size(), false);
    if (surface.empty()) return mask;
    for (std::size_t i = 0; i < patterns_.size(); ++i) {
      mask[i] = std::regex_match(surface.begin(), surface.end(), patterns_[i]);
    }
    return mask;
  }

  bool verify(TextView surface, LabelId label) const {
    if (label < 0 || static_cast<std::size_t>(label) >= patterns_.size()) {
      throw ConfigError("unregistered label id " + std::to_string(label));
    }
    if (surface.empty()) return false;
    return std::regex_match(surface.begin(), surface.end(), patterns_[label]);
  }

 private:
  std::vector<std::wregex> patterns_;
};

inline bool any_legal(const LabelMask& mask) {
  for (bool b : mask) {
    if (b) return true;
  }
  return false;
}

}  // namespace hybridtn
