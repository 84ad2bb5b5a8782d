#pragma once

// End-to-end hybrid normalization: extraction, priority check, rule or
// classifier route, format verification with rule fallback, rendering and
// right-to-left reinsertion.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hybridtn/corpus.hpp"
#include "hybridtn/error.hpp"
#include "hybridtn/extractor.hpp"
#include "hybridtn/legality.hpp"
#include "hybridtn/neural/classifier.hpp"
#include "hybridtn/pattern_reader.hpp"
#include "hybridtn/rule_engine.hpp"
#include "hybridtn/taxonomy.hpp"
#include "hybridtn/trace.hpp"

namespace hybridtn {

class HybridSystem {
 public:
  HybridSystem(LabelSet labels, RuleSet rules, PriorityList priority,
               std::optional<neural::Classifier> model = std::nullopt)
      : labels_(std::move(labels)),
        reader_(labels_),
        rules_(std::move(rules)),
        priority_(std::move(priority)),
        model_(std::move(model)) {
    if (model_) {
      if (model_->label_names != labels_.names()) {
        throw ConfigError("classifier was trained on a different label set");
      }
      use_mask_ = model_->config.use_mask;
    }
  }

  const LabelSet& labels() const noexcept { return labels_; }
  const PatternReader& reader() const noexcept { return reader_; }
  const FormatRegistry& formats() const noexcept { return reader_.formats(); }
  const RuleSet& rules() const noexcept { return rules_; }
  const PriorityList& priority() const noexcept { return priority_; }
  const std::optional<neural::Classifier>& model() const noexcept { return model_; }

  // Softmax legality mask inside the classifier. Defaults to the setting the
  // model was trained with; turning it off leaves the verifier as the only
  // format check.
  bool use_mask() const noexcept { return use_mask_; }
  void set_use_mask(bool on) noexcept { use_mask_ = on; }

 private:
  LabelSet labels_;
  PatternReader reader_;
  RuleSet rules_;
  PriorityList priority_;
  std::optional<neural::Classifier> model_;
  bool use_mask_ = true;
};

namespace detail {

inline NormalizationTrace fallback(const HybridSystem& sys, TextView text, const NSWSpan& span,
                                   NormalizationTrace evidence) {
  NormalizationTrace t = resolve_with_rules(sys.rules(), sys.reader(), text, span, Route::kFallbackRule);
  t.verification_failed = true;
  t.rejected_label = evidence.rejected_label;
  t.probabilities = std::move(evidence.probabilities);
  return t;
}

inline NormalizationTrace route_span(const HybridSystem& sys, const LabeledSentence& sentence,
                                     const NSWSpan& span) {
  const TextView text = sentence.text;
  const TextView surface = sentence.surface(span);
  if (priority_check(surface, sys.priority())) {
    return resolve_with_rules(sys.rules(), sys.reader(), text, span, Route::kPriorityRule);
  }
  if (!sys.model()) {
    return resolve_with_rules(sys.rules(), sys.reader(), text, span, Route::kBaselineRule);
  }
  const auto& model = *sys.model();
  const LabelMask legal = sys.use_mask() ? sys.formats().legal_labels(surface)
                                         : LabelMask(sys.labels().size(), true);
  NormalizationTrace evidence;
  if (!any_legal(legal)) return fallback(sys, text, span, std::move(evidence));
  const auto result = neural::classify(model.params, model.encode(sentence, span), legal);
  if (!sys.formats().verify(surface, result.label)) {
    evidence.rejected_label = result.label;
    evidence.probabilities = result.probabilities;
    return fallback(sys, text, span, std::move(evidence));
  }
  NormalizationTrace t;
  t.span = span;
  t.span.label = result.label;
  t.surface = Text(surface);
  t.route = Route::kNeural;
  t.label = result.label;
  t.sfw = sys.reader().render(surface, result.label).text;
  t.probabilities = result.probabilities;
  return t;
}

}  // namespace detail

// Every span is routed against the original sentence before any SFW is
// spliced in, so all NSW in a sentence see their original context.
inline NormalizationResult normalize(TextView text, const HybridSystem& sys) {
  LabeledSentence sentence{Text(text), extract_nsw(text)};
  NormalizationResult r;
  r.traces.reserve(sentence.spans.size());
  for (const auto& span : sentence.spans) {
    r.traces.push_back(detail::route_span(sys, sentence, span));
    if (r.traces.back().label) r.traces.back().span.label = r.traces.back().label;
  }
  r.text = splice(text, r.traces);
  return r;
}

inline NormalizationResult normalize_rules_only(TextView text, const HybridSystem& sys) {
  return normalize_rule_based(sys.rules(), sys.reader(), text);
}

// Splits a document after each sentence-final mark (。！？!? and ；).
inline std::vector<Text> split_sentences(TextView doc) {
  std::vector<Text> out;
  Text cur;
  for (wchar_t c : doc) {
    cur += c;
    if (c == L'。' || c == L'！' || c == L'？' || c == L'!' || c == L'?' || c == L'；' ||
        c == L'\n') {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Normalizes sentence by sentence; trace offsets are rebased onto the
// document.
inline NormalizationResult normalize_document(TextView doc, const HybridSystem& sys,
                                              bool rules_only = false) {
  NormalizationResult out;
  std::size_t offset = 0;
  for (const auto& sentence : split_sentences(doc)) {
    auto r = rules_only ? normalize_rules_only(sentence, sys) : normalize(sentence, sys);
    out.text += r.text;
    for (auto& t : r.traces) {
      t.span.start += offset;
      t.span.end += offset;
      out.traces.push_back(std::move(t));
    }
    offset += sentence.size();
  }
  return out;
}

struct RoutingStats {
  std::size_t total = 0;
  std::size_t priority = 0;
  std::size_t neural = 0;    // every span the classifier saw, fallbacks included
  std::size_t fallback = 0;  // neural spans that flowed back to the rules
  double priority_fraction() const { return total ? static_cast<double>(priority) / total : 0; }
  double neural_fraction() const { return total ? static_cast<double>(neural) / total : 0; }
  // Fraction of neural spans that fell back; absent when no span went neural.
  std::optional<double> fallback_fraction() const {
    if (neural == 0) return std::nullopt;
    return static_cast<double>(fallback) / neural;
  }
};

inline RoutingStats routing_stats(const std::vector<Text>& sentences, const HybridSystem& sys) {
  RoutingStats s;
  for (const auto& text : sentences) {
    for (const auto& t : normalize(text, sys).traces) {
      ++s.total;
      if (t.route == Route::kPriorityRule) {
        ++s.priority;
      } else {
        ++s.neural;
        if (t.verification_failed) ++s.fallback;
      }
    }
  }
  return s;
}

inline RoutingStats routing_stats(const Corpus& corpus, const HybridSystem& sys) {
  std::vector<Text> texts;
  for (const auto& s : corpus) texts.push_back(s.text);
  return routing_stats(texts, sys);
}

inline nlohmann::json trace_to_json(const NormalizationTrace& t, const LabelSet& labels) {
  nlohmann::json j = {{"start", t.span.start},
                      {"end", t.span.end},
                      {"surface", to_utf8(t.surface)},
                      {"route", std::string(route_name(t.route))}};
  j["label"] = t.label ? nlohmann::json(labels[*t.label].name) : nlohmann::json(nullptr);
  j["sfw"] = t.sfw ? nlohmann::json(to_utf8(*t.sfw)) : nlohmann::json(nullptr);
  if (t.probabilities) j["probabilities"] = *t.probabilities;
  if (t.verification_failed) {
    j["verification_failed"] = true;
    if (t.rejected_label) j["rejected_label"] = labels[*t.rejected_label].name;
  }
  if (!t.rule_name.empty()) j["rule"] = t.rule_name;
  return j;
}

}  // namespace hybridtn
