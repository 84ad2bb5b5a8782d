#pragma once

// NSW extraction and the priority check.
//
// Extracted spans follow this grammar, matched leftmost-longest:
//
//   number_run := '$'? DIGITS ( SEP DIGITS )* '%'?
//   unit_rate  := DIGITS ( '.' DIGITS )? HAN '/' HAN
//   SEP        := one of . : - ~ — / ,
//
// so "2019-10-01" is one span, "10%" keeps its percent sign, "$20" keeps the
// currency sign and "5人/组" is read as a single rate expression. Symbols
// that do not touch a digit run are never extracted.

#include <algorithm>
#include <fstream>
#include <regex>
#include <string>
#include <unordered_set>
#include <vector>

#include "hybridtn/corpus_types.hpp"
#include "hybridtn/error.hpp"
#include "hybridtn/record_file.hpp"
#include "hybridtn/unicode.hpp"

namespace hybridtn {

inline bool is_separator_symbol(wchar_t c) {
  switch (c) {
    case L'.': case L':': case L'-': case L'~': case L'—': case L'/': case L',':
      return true;
    default:
      return false;
  }
}

// Every character that may appear in an extracted span besides digits and the
// Han units of a rate expression.
inline bool is_extraction_symbol(wchar_t c) {
  return is_separator_symbol(c) || c == L'%' || c == L'$';
}

// Full-match form of the grammar above.
inline const std::wregex& extraction_pattern() {
  static const std::wregex re(
      LR"(\$?[0-9]+(?:[.:\-~—/,][0-9]+)*%?|[0-9]+(?:\.[0-9]+)?[一-鿿]/[一-鿿])",
      std::regex::ECMAScript);
  return re;
}

namespace detail {

inline std::size_t digit_run(TextView t, std::size_t i) {
  std::size_t j = i;
  while (j < t.size() && is_ascii_digit(t[j])) ++j;
  return j - i;
}

// Length of the longest number_run starting at i, 0 if none.
inline std::size_t match_number_run(TextView t, std::size_t i) {
  std::size_t j = i;
  if (j < t.size() && t[j] == L'$') ++j;
  std::size_t d = digit_run(t, j);
  if (d == 0) return 0;
  j += d;
  while (j + 1 < t.size() && is_separator_symbol(t[j]) && is_ascii_digit(t[j + 1])) {
    j += 1 + digit_run(t, j + 1);
  }
  if (j < t.size() && t[j] == L'%') ++j;
  return j - i;
}

inline std::size_t match_unit_rate(TextView t, std::size_t i) {
  std::size_t j = i;
  std::size_t d = digit_run(t, j);
  if (d == 0) return 0;
  j += d;
  if (j + 1 < t.size() && t[j] == L'.' && is_ascii_digit(t[j + 1])) {
    j += 1 + digit_run(t, j + 1);
  }
  if (j + 2 < t.size() && is_han(t[j]) && t[j + 1] == L'/' && is_han(t[j + 2])) {
    return j + 3 - i;
  }
  return 0;
}

}  // namespace detail

inline std::vector<NSWSpan> extract_nsw(TextView text) {
  std::vector<NSWSpan> spans;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t len = std::max(detail::match_number_run(text, i),
                                     detail::match_unit_rate(text, i));
    if (len == 0) {
      ++i;
      continue;
    }
    spans.push_back({i, i + len, std::nullopt});
    i += len;
  }
  return spans;
}

// Exact strings and full-match user patterns that bypass the classifier.
class PriorityList {
 public:
  PriorityList() = default;

  void add_exact(Text s) { exact_.insert(std::move(s)); }

  void add_pattern(const std::string& utf8_pattern) {
    try {
      patterns_.emplace_back(from_utf8(utf8_pattern), std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw ConfigError("priority pattern '" + utf8_pattern + "': " + e.what());
    }
  }

  bool contains(TextView surface) const {
    if (exact_.count(Text(surface))) return true;
    for (const auto& re : patterns_) {
      if (std::regex_match(surface.begin(), surface.end(), re)) return true;
    }
    return false;
  }

  std::size_t exact_count() const noexcept { return exact_.size(); }
  std::size_t pattern_count() const noexcept { return patterns_.size(); }

 private:
  std::unordered_set<Text> exact_;
  std::vector<std::wregex> patterns_;
};

inline bool priority_check(TextView surface, const PriorityList& pl) {
  return pl.contains(surface);
}

// Priority file: one entry per line. Lines starting with "re:" are user
// patterns, '#' starts a comment line, everything else is an exact string.
inline constexpr std::string_view kPriorityPatternMarker = "re:";

inline PriorityList parse_priority_list(std::istream& in) {
  PriorityList pl;
  std::string raw;
  while (std::getline(in, raw)) {
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.substr(0, kPriorityPatternMarker.size()) == kPriorityPatternMarker) {
      pl.add_pattern(std::string(detail::trim(line.substr(kPriorityPatternMarker.size()))));
    } else {
      pl.add_exact(from_utf8(line));
    }
  }
  return pl;
}

inline PriorityList load_priority_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_priority_list(in);
}

// The built-in list: emergency and service numbers plus mainland mobile
// phone numbers.
inline PriorityList default_priority_list() {
  PriorityList pl;
  for (const wchar_t* s : {L"911", L"110", L"119", L"120", L"122", L"12315", L"12306"}) {
    pl.add_exact(s);
  }
  pl.add_pattern("1[3-9][0-9]{9}");
  return pl;
}

}  // namespace hybridtn
