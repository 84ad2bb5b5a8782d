#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "hybridtn/taxonomy.hpp"
#include "hybridtn/unicode.hpp"

namespace hybridtn {

// Half-open character range [start, end) of one NSW inside a sentence.
struct NSWSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::optional<LabelId> label;  // absent before classification
  // Offset of the context window centre relative to the NSW centre. Only
  // the window_shift augmentation sets this.
  int window_shift = 0;

  std::size_t length() const noexcept { return end - start; }
  friend bool operator==(const NSWSpan&, const NSWSpan&) = default;
};

struct LabeledSentence {
  Text text;
  std::vector<NSWSpan> spans;

  TextView surface(const NSWSpan& s) const {
    return TextView(text).substr(s.start, s.end - s.start);
  }
  friend bool operator==(const LabeledSentence&, const LabeledSentence&) = default;
};

using Corpus = std::vector<LabeledSentence>;

// Character used inside sentence text to stand for an explicit padding
// position (written by the pad_prefix augmentation).
inline constexpr wchar_t kPadChar = L'\0';

struct ContextWindow {
  Text chars;                 // exactly W characters; padding is kPadChar
  std::vector<bool> nsw_mask; // true where the NSW itself sits
  std::vector<bool> pad_mask; // true where the position lies outside the text

  std::size_t width() const noexcept { return chars.size(); }
};

}  // namespace hybridtn
