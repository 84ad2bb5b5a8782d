#pragma once

// The closed set of NSW pattern labels. Each label owns a full-match surface
// format (consumed by legality) and a renderer (bound by name in
// pattern_reader).

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hybridtn/error.hpp"
#include "hybridtn/record_file.hpp"

namespace hybridtn {

using LabelId = int;

struct PatternLabel {
  LabelId id = 0;
  std::string name;
  std::string format_pattern;  // ECMAScript regex, UTF-8, implicitly anchored
  std::string description;
};

// Upper bound on the registry size; the shipped taxonomy uses 11 entries.
inline constexpr std::size_t kMaxLabels = 36;

class LabelSet {
 public:
  LabelSet() = default;

  explicit LabelSet(std::vector<PatternLabel> labels) {
    for (auto& l : labels) add(std::move(l.name), std::move(l.format_pattern),
                               std::move(l.description));
  }

  LabelId add(std::string name, std::string format, std::string description = {}) {
    if (name.empty()) throw ConfigError("label name must not be empty");
    if (by_name_.count(name)) throw ConfigError("duplicate label '" + name + "'");
    if (labels_.size() >= kMaxLabels) {
      throw ConfigError("label registry is limited to " +
                        std::to_string(kMaxLabels) + " entries");
    }
    const auto id = static_cast<LabelId>(labels_.size());
    by_name_.emplace(name, id);
    labels_.push_back({id, std::move(name), std::move(format), std::move(description)});
    return id;
  }

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  const PatternLabel& operator[](LabelId id) const { return labels_.at(id); }
  const std::vector<PatternLabel>& all() const noexcept { return labels_; }

  std::optional<LabelId> find(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }

  LabelId require(std::string_view name) const {
    auto id = find(name);
    if (!id) throw ConfigError("unknown label '" + std::string(name) + "'");
    return *id;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& l : labels_) out.push_back(l.name);
    return out;
  }

  friend bool operator==(const LabelSet& a, const LabelSet& b) {
    if (a.labels_.size() != b.labels_.size()) return false;
    for (std::size_t i = 0; i < a.labels_.size(); ++i) {
      if (a.labels_[i].name != b.labels_[i].name ||
          a.labels_[i].format_pattern != b.labels_[i].format_pattern) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<PatternLabel> labels_;
  std::unordered_map<std::string, LabelId> by_name_;
};

namespace labels {
inline constexpr std::string_view kReadNoZero = "A_Read_No_Zero";
inline constexpr std::string_view kSpellKeepZero = "A_Spell_Keep_Zero";
inline constexpr std::string_view kPercent = "B_Percent";
inline constexpr std::string_view kRange = "B_Range";
inline constexpr std::string_view kScoreRatio = "B_Score_Ratio";
inline constexpr std::string_view kSlashPer = "B_Slash_Per";
inline constexpr std::string_view kTime = "B_Time";
inline constexpr std::string_view kDateYMD = "B_Date_YMD";
inline constexpr std::string_view kTwoLiang = "A_Two_Liang";
inline constexpr std::string_view kOneYaoSpell = "A_One_Yao_Spell";
inline constexpr std::string_view kCurrency = "B_Currency";
}  // namespace labels

// The shipped taxonomy: ten core labels plus a
// dollar-amount label used by the currency rule.
//
// A_Two_Liang only admits numbers whose leading 2 is actually read 两, i.e.
// the leading digit does not sit in a 十 position (2, 2xx, 2xxx, 2xxxx, ...).
inline LabelSet default_labels() {
  LabelSet set;
  set.add(std::string(labels::kReadNoZero),
          R"([0-9]{1,12}(?:\.[0-9]+)?|[0-9]{1,3}(?:,[0-9]{3}){1,3}(?:\.[0-9]+)?)",
          "cardinal reading with positional units: 200 -> 二百");
  set.add(std::string(labels::kSpellKeepZero), R"([0-9]+)",
          "digit-by-digit reading keeping zeros: 2020 -> 二零二零");
  set.add(std::string(labels::kPercent), R"([0-9]{1,12}(?:\.[0-9]+)?%)",
          "percentage: 10% -> 百分之十");
  set.add(std::string(labels::kRange),
          R"([0-9]{1,12}(?:\.[0-9]+)?[~\-—][0-9]{1,12}(?:\.[0-9]+)?)",
          "numeric range: 10-15 -> 十到十五");
  set.add(std::string(labels::kScoreRatio), R"([0-9]{1,12}[:\-—][0-9]{1,12})",
          "score or ratio: 30-10 -> 三十比十");
  set.add(std::string(labels::kSlashPer),
          R"([0-9]{1,12}(?:\.[0-9]+)?[一-鿿]/[一-鿿])",
          "rate with a slash: 5人/组 -> 每组五人");
  set.add(std::string(labels::kTime), R"([0-9]{1,2}:[0-9]{2}(?::[0-9]{2})?)",
          "clock time: 10:30 -> 十点三十分");
  set.add(std::string(labels::kDateYMD), R"([0-9]{4}([\-/.])[0-9]{1,2}\1[0-9]{1,2})",
          "year-month-day date: 2019-10-01 -> 二零一九年十月一日");
  set.add(std::string(labels::kTwoLiang),
          R"(2|2[0-9]{2,4}|2[0-9]{6,8}|2[0-9]{10,11})",
          "leading 2 read as 两: 2个人 -> 两个人");
  set.add(std::string(labels::kOneYaoSpell), R"([0-9]+)",
          "digit-by-digit reading with 1 as 幺: 911 -> 九幺幺");
  set.add(std::string(labels::kCurrency), R"(\$[0-9]{1,12}(?:\.[0-9]+)?)",
          "US dollar amount: $20 -> 二十美元");
  return set;
}

// Loads "[label NAME]" records with "format" and optional "description".
inline LabelSet labels_from_records(const std::vector<Record>& records) {
  LabelSet set;
  for (const auto& r : records) {
    if (r.kind != "label") {
      throw ParseError("expected a [label ...] record, got [" + r.kind + "]", r.line);
    }
    set.add(r.name, r.require("format"), r.get("description").value_or(""));
  }
  return set;
}

inline LabelSet load_labels(const std::string& path) {
  return labels_from_records(parse_records_file(path));
}

}  // namespace hybridtn
