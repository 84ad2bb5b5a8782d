#pragma once

// Rule-based normalizer: prioritized context-pattern rules, tried from the
// longest declared context down.
//
// Rule file grammar (record format of record_file.hpp):
//
//   [rule score_keyword]
//   group = score
//   priority = 6
//   context_len = 4
//   pre = (比分|比赛)
//   nsw = [0-9]+[:\-—][0-9]+
//   post =
//   label = B_Score_Ratio
//
// nsw must match the whole NSW surface. pre and post are searched anywhere in
// the context_len characters before and after the NSW, clipped at the
// sentence edges; an empty or missing pre/post always matches. Use ^ and $
// to anchor a keyword next to the NSW.

#include <algorithm>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "hybridtn/corpus_types.hpp"
#include "hybridtn/error.hpp"
#include "hybridtn/extractor.hpp"
#include "hybridtn/pattern_reader.hpp"
#include "hybridtn/record_file.hpp"
#include "hybridtn/taxonomy.hpp"
#include "hybridtn/trace.hpp"

namespace hybridtn {

struct Rule {
  std::string name;
  std::string group;
  int priority = 0;
  std::string pre_source, nsw_source, post_source;
  std::optional<std::wregex> pre, post;
  std::wregex nsw;
  std::size_t context_len = 0;
  LabelId label = 0;
};

// Rule selection order: longer context first, then higher priority, then
// lexicographically smaller name.
inline bool rule_precedes(const Rule& a, const Rule& b) {
  if (a.context_len != b.context_len) return a.context_len > b.context_len;
  if (a.priority != b.priority) return a.priority > b.priority;
  return a.name < b.name;
}

class RuleSet {
 public:
  RuleSet() = default;

  explicit RuleSet(std::vector<Rule> rules) : rules_(std::move(rules)) {
    std::set<std::string> names;
    for (const auto& r : rules_) {
      if (!names.insert(r.name).second) throw ConfigError("duplicate rule name '" + r.name + "'");
    }
    std::sort(rules_.begin(), rules_.end(), rule_precedes);
  }

  const std::vector<Rule>& rules() const noexcept { return rules_; }
  std::size_t size() const noexcept { return rules_.size(); }
  bool empty() const noexcept { return rules_.empty(); }

 private:
  std::vector<Rule> rules_;
};

struct RuleMatch {
  const Rule* rule = nullptr;
  NSWSpan span;
  LabelId label = 0;
};

inline Rule make_rule(std::string name, std::string group, int priority, std::size_t context_len,
                      std::string pre, std::string nsw, std::string post, LabelId label) {
  Rule r;
  r.name = std::move(name);
  r.group = std::move(group);
  r.priority = priority;
  r.context_len = context_len;
  r.label = label;
  r.pre_source = std::move(pre);
  r.nsw_source = std::move(nsw);
  r.post_source = std::move(post);
  if (r.nsw_source.empty()) throw ConfigError("rule '" + r.name + "': nsw pattern is empty");
  const auto compile = [&](const std::string& src, const char* field) {
    try {
      return std::wregex(from_utf8(src), std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw ConfigError("rule '" + r.name + "': invalid " + field + " pattern: " + e.what());
    }
  };
  r.nsw = compile(r.nsw_source, "nsw");
  if (!r.pre_source.empty()) r.pre = compile(r.pre_source, "pre");
  if (!r.post_source.empty()) r.post = compile(r.post_source, "post");
  return r;
}

inline RuleSet rules_from_records(const std::vector<Record>& records, const LabelSet& labels) {
  std::vector<Rule> rules;
  for (const auto& rec : records) {
    if (rec.kind != "rule") {
      throw ParseError("expected a [rule ...] record, got [" + rec.kind + "]", rec.line);
    }
    const auto label_name = rec.require("label");
    const auto label = labels.find(label_name);
    if (!label) {
      throw ConfigError("rule '" + rec.name + "' references unknown label '" + label_name + "'");
    }
    int priority = 0;
    long long context = 0;
    try {
      priority = std::stoi(rec.get("priority").value_or("0"));
      context = std::stoll(rec.get("context_len").value_or("0"));
    } catch (const std::exception&) {
      throw ParseError("rule '" + rec.name + "': priority and context_len must be integers",
                       rec.line);
    }
    if (context < 0) throw ConfigError("rule '" + rec.name + "': context_len must be >= 0");
    rules.push_back(make_rule(rec.name, rec.get("group").value_or(""), priority,
                              static_cast<std::size_t>(context), rec.get("pre").value_or(""),
                              rec.require("nsw"), rec.get("post").value_or(""), *label));
  }
  return RuleSet(std::move(rules));
}

inline RuleSet compile_rules(const std::string& path, const LabelSet& labels) {
  return rules_from_records(parse_records_file(path), labels);
}

inline RuleSet compile_rules_string(const std::string& text, const LabelSet& labels) {
  return rules_from_records(parse_records_string(text), labels);
}

// True when `rule` fires on `span` of `text`.
inline bool rule_matches(const Rule& rule, TextView text, const NSWSpan& span) {
  const TextView surface = text.substr(span.start, span.length());
  if (!std::regex_match(surface.begin(), surface.end(), rule.nsw)) return false;
  if (rule.pre) {
    const std::size_t from = span.start > rule.context_len ? span.start - rule.context_len : 0;
    const TextView ctx = text.substr(from, span.start - from);
    if (!std::regex_search(ctx.begin(), ctx.end(), *rule.pre)) return false;
  }
  if (rule.post) {
    const TextView ctx = text.substr(span.end, rule.context_len);
    if (!std::regex_search(ctx.begin(), ctx.end(), *rule.post)) return false;
  }
  return true;
}

inline std::optional<RuleMatch> match_nsw(const RuleSet& rs, TextView text, const NSWSpan& span) {
  for (const auto& rule : rs.rules()) {
    if (rule_matches(rule, text, span)) return RuleMatch{&rule, span, rule.label};
  }
  return std::nullopt;
}

// Resolves one span through the rule engine: match, then render. A match
// whose label rejects the surface counts as no match.
inline NormalizationTrace resolve_with_rules(const RuleSet& rs, const PatternReader& reader,
                                             TextView text, const NSWSpan& span, Route route) {
  NormalizationTrace t;
  t.span = span;
  t.surface = Text(text.substr(span.start, span.length()));
  if (auto m = match_nsw(rs, text, span)) {
    if (reader.formats().verify(t.surface, m->label)) {
      t.route = route;
      t.label = m->label;
      t.sfw = reader.render(t.surface, m->label).text;
      t.rule_name = m->rule->name;
      return t;
    }
  }
  t.route = Route::kUnmatched;
  return t;
}

inline NormalizationResult normalize_rule_based(const RuleSet& rs, const PatternReader& reader,
                                                TextView text) {
  NormalizationResult r;
  for (const auto& span : extract_nsw(text)) {
    r.traces.push_back(resolve_with_rules(rs, reader, text, span, Route::kBaselineRule));
  }
  r.text = splice(text, r.traces);
  return r;
}

}  // namespace hybridtn
