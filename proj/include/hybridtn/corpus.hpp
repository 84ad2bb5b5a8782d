#pragma once

// Labeled-corpus data model: line-format I/O, context windows, label
// distributions and splitting.
//
// Corpus line format (UTF-8 JSON Lines, one sentence per line):
//
//   {"text":"今天是2019-10-01","spans":[{"start":3,"end":13,"label":"B_Date_YMD"}]}
//
// Offsets count Unicode scalar values, end is exclusive. "label" may be
// omitted for unlabeled spans; "shift" (integer) is written only when a
// window_shift augmentation set it.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <regex>
#include <string>
#include <vector>

#include "json.hpp"

#include "hybridtn/corpus_types.hpp"
#include "hybridtn/error.hpp"
#include "hybridtn/extractor.hpp"
#include "hybridtn/random.hpp"
#include "hybridtn/taxonomy.hpp"
#include "hybridtn/unicode.hpp"

namespace hybridtn {

inline constexpr std::size_t kDefaultWindow = 30;

// Throws ValidationError when spans are out of bounds, overlap or do not
// match the extraction grammar.
inline void validate_sentence(const LabeledSentence& s, const LabelSet* labels = nullptr) {
  std::vector<NSWSpan> sorted = s.spans;
  std::sort(sorted.begin(), sorted.end(),
            [](const NSWSpan& a, const NSWSpan& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& sp = sorted[i];
    if (sp.start >= sp.end || sp.end > s.text.size()) {
      throw ValidationError("span [" + std::to_string(sp.start) + "," +
                            std::to_string(sp.end) + ") out of bounds for text of length " +
                            std::to_string(s.text.size()));
    }
    if (i > 0 && sorted[i - 1].end > sp.start) {
      throw ValidationError("overlapping spans at offset " + std::to_string(sp.start));
    }
    const auto surf = s.surface(sp);
    if (!std::regex_match(surf.begin(), surf.end(), extraction_pattern())) {
      throw ValidationError("span surface '" + to_utf8(surf) +
                            "' is not a digit/symbol NSW");
    }
    if (labels && sp.label && (*sp.label < 0 || static_cast<std::size_t>(*sp.label) >= labels->size())) {
      throw ValidationError("span label id out of range");
    }
  }
}

inline LabeledSentence sentence_from_json(const nlohmann::json& j, const LabelSet& labels) {
  LabeledSentence s;
  s.text = from_utf8(j.at("text").get<std::string>());
  if (j.contains("spans")) {
    for (const auto& js : j.at("spans")) {
      NSWSpan sp;
      sp.start = js.at("start").get<std::size_t>();
      sp.end = js.at("end").get<std::size_t>();
      if (js.contains("label") && !js.at("label").is_null()) {
        const auto name = js.at("label").get<std::string>();
        auto id = labels.find(name);
        if (!id) throw ValidationError("unknown label '" + name + "'");
        sp.label = *id;
      }
      if (js.contains("shift")) sp.window_shift = js.at("shift").get<int>();
      s.spans.push_back(sp);
    }
  }
  std::sort(s.spans.begin(), s.spans.end(),
            [](const NSWSpan& a, const NSWSpan& b) { return a.start < b.start; });
  validate_sentence(s, &labels);
  return s;
}

inline nlohmann::json sentence_to_json(const LabeledSentence& s, const LabelSet& labels) {
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& sp : s.spans) {
    nlohmann::json js = {{"start", sp.start}, {"end", sp.end}};
    if (sp.label) js["label"] = labels[*sp.label].name;
    if (sp.window_shift != 0) js["shift"] = sp.window_shift;
    spans.push_back(std::move(js));
  }
  return {{"text", to_utf8(s.text)}, {"spans", std::move(spans)}};
}

// Parses one record per non-blank line. Errors name the 1-based line.
inline Corpus read_corpus(std::istream& in, const LabelSet& labels) {
  Corpus out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(sentence_from_json(nlohmann::json::parse(line), labels));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), lineno);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return out;
}

inline Corpus load_corpus(const std::string& path, const LabelSet& labels) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_corpus(in, labels);
}

inline void write_corpus(std::ostream& out, const Corpus& corpus, const LabelSet& labels) {
  for (const auto& s : corpus) out << sentence_to_json(s, labels).dump() << '\n';
}

inline void save_corpus(const std::string& path, const Corpus& corpus, const LabelSet& labels) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_corpus(out, corpus, labels);
}

// Window of `width` characters centred on the NSW; on an odd remainder the
// extra context character goes to the right. An NSW longer than the window
// keeps its first `width` characters and no context.
inline ContextWindow extract_window(const LabeledSentence& sentence, const NSWSpan& span,
                                    std::size_t width = kDefaultWindow) {
  ContextWindow w;
  w.chars.assign(width, kPadChar);
  w.nsw_mask.assign(width, false);
  w.pad_mask.assign(width, true);
  const auto len = span.length();
  long long start;
  if (len >= width) {
    start = static_cast<long long>(span.start);
  } else {
    const long long left = static_cast<long long>((width - len) / 2);
    const long long right = static_cast<long long>(width - len) - left;
    const long long shift = std::clamp<long long>(span.window_shift, -left, right);
    start = static_cast<long long>(span.start) - left + shift;
  }
  const auto n = static_cast<long long>(sentence.text.size());
  for (std::size_t i = 0; i < width; ++i) {
    const long long p = start + static_cast<long long>(i);
    if (p >= 0 && p < n) {
      const wchar_t c = sentence.text[static_cast<std::size_t>(p)];
      w.chars[i] = c;
      w.pad_mask[i] = (c == kPadChar);
    }
    w.nsw_mask[i] = p >= static_cast<long long>(span.start) && p < static_cast<long long>(span.end);
  }
  return w;
}

// Per-label target proportions, indexed by label id.
struct CorpusDistribution {
  std::vector<double> proportions;

  void validate() const {
    double sum = 0;
    for (double p : proportions) {
      if (!(p >= 0 && p <= 1)) throw ConfigError("proportion outside [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError("proportions sum to " + std::to_string(sum) + ", expected 1");
    }
  }
};

// JSON object mapping label name to proportion; unnamed labels get 0.
inline CorpusDistribution distribution_from_json(const nlohmann::json& j, const LabelSet& labels) {
  CorpusDistribution d;
  d.proportions.assign(labels.size(), 0.0);
  for (const auto& [name, value] : j.items()) {
    d.proportions[labels.require(name)] = value.get<double>();
  }
  d.validate();
  return d;
}

inline CorpusDistribution load_distribution(const std::string& path, const LabelSet& labels) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return distribution_from_json(nlohmann::json::parse(in), labels);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// Approximation of a news-corpus NSW distribution: the five most frequent
// labels hold 91% of the mass.
inline CorpusDistribution default_distribution(const LabelSet& labels) {
  return distribution_from_json(
      {{std::string(labels::kReadNoZero), 0.40},
       {std::string(labels::kSpellKeepZero), 0.20},
       {std::string(labels::kPercent), 0.12},
       {std::string(labels::kDateYMD), 0.10},
       {std::string(labels::kRange), 0.09},
       {std::string(labels::kTime), 0.025},
       {std::string(labels::kScoreRatio), 0.02},
       {std::string(labels::kTwoLiang), 0.02},
       {std::string(labels::kOneYaoSpell), 0.015},
       {std::string(labels::kSlashPer), 0.01}},
      labels);
}

// Span-level label histogram.
inline std::vector<std::size_t> label_counts(const Corpus& corpus, std::size_t num_labels) {
  std::vector<std::size_t> counts(num_labels, 0);
  for (const auto& s : corpus) {
    for (const auto& sp : s.spans) {
      if (sp.label) ++counts.at(*sp.label);
    }
  }
  return counts;
}

struct CorpusSplit {
  Corpus train, dev, test;
};

// Deterministic 80/10/10 split by seeded shuffle of sentence order.
inline CorpusSplit split_corpus(const Corpus& corpus, std::uint64_t seed) {
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  shuffle_in_place(rng, order);
  const std::size_t n_train = corpus.size() * 8 / 10;
  const std::size_t n_dev = corpus.size() / 10;
  CorpusSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < n_train ? split.train : (i < n_train + n_dev ? split.dev : split.test);
    dst.push_back(corpus[order[i]]);
  }
  return split;
}

// Joins runs of 1..max_clauses consecutive sentences with a full-width comma
// into multi-NSW sentences.
inline Corpus compose_clauses(const Corpus& corpus, std::size_t max_clauses, std::uint64_t seed) {
  Corpus out;
  Rng rng(seed);
  std::size_t i = 0;
  while (i < corpus.size()) {
    const auto k = static_cast<std::size_t>(uniform_int(rng, 1, static_cast<long long>(std::max<std::size_t>(1, max_clauses))));
    LabeledSentence joined;
    for (std::size_t j = 0; j < k && i < corpus.size(); ++j, ++i) {
      if (j > 0) joined.text += L'，';
      const std::size_t offset = joined.text.size();
      for (auto sp : corpus[i].spans) {
        sp.start += offset;
        sp.end += offset;
        joined.spans.push_back(sp);
      }
      joined.text += corpus[i].text;
    }
    out.push_back(std::move(joined));
  }
  return out;
}

}  // namespace hybridtn
