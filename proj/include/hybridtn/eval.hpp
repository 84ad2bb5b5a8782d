#pragma once

// Pattern-level precision/recall/F1, sentence accuracy against a golden set,
// and the classifier ablation runner.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hybridtn/corpus.hpp"
#include "hybridtn/corpus_generator.hpp"
#include "hybridtn/error.hpp"
#include "hybridtn/neural/trainer.hpp"
#include "hybridtn/pipeline.hpp"

namespace hybridtn {

struct LabelScore {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // predicted count
};

struct PatternMetrics {
  std::vector<LabelScore> per_label;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][predicted]
  std::size_t unpredicted = 0;  // spans with no predicted label at all
  double accuracy = 0;
};

// A missing prediction counts against recall and accuracy but not against
// any label's precision. Zero denominators give 0.
inline PatternMetrics pattern_metrics(
    const std::vector<std::pair<LabelId, std::optional<LabelId>>>& pairs, std::size_t num_labels) {
  if (pairs.empty()) throw ValidationError("pattern_metrics needs at least one prediction");
  PatternMetrics m;
  m.per_label.resize(num_labels);
  m.confusion.assign(num_labels, std::vector<std::size_t>(num_labels, 0));
  const auto check = [&](LabelId l) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_labels) {
      throw ConfigError("unregistered label id " + std::to_string(l));
    }
  };
  std::size_t correct = 0;
  for (const auto& [gold, pred] : pairs) {
    check(gold);
    ++m.per_label[gold].support;
    if (!pred) {
      ++m.unpredicted;
      continue;
    }
    check(*pred);
    ++m.per_label[*pred].predicted;
    ++m.confusion[gold][*pred];
    if (gold == *pred) ++correct;
  }
  for (std::size_t l = 0; l < num_labels; ++l) {
    auto& s = m.per_label[l];
    const double tp = static_cast<double>(m.confusion[l][l]);
    s.precision = s.predicted ? tp / s.predicted : 0;
    s.recall = s.support ? tp / s.support : 0;
    s.f1 = (s.precision + s.recall) > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0;
  }
  m.accuracy = static_cast<double>(correct) / pairs.size();
  return m;
}

inline double f1_score(double precision, double recall) {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0;
}

// Fraction of pairs whose two strings are identical character for character.
inline double sentence_accuracy(const std::vector<std::pair<Text, Text>>& pairs) {
  if (pairs.empty()) throw ValidationError("sentence_accuracy needs at least one pair");
  std::size_t ok = 0;
  for (const auto& [out, ref] : pairs) ok += out == ref;
  return static_cast<double>(ok) / pairs.size();
}

// A labeled sentence with its reference normalization.
struct GoldenEntry {
  LabeledSentence sentence;
  Text reference;
};

// References rendered from the gold labels.
inline std::vector<GoldenEntry> make_golden(const Corpus& corpus, const PatternReader& reader) {
  std::vector<GoldenEntry> out;
  for (const auto& s : corpus) {
    std::vector<NormalizationTrace> traces;
    for (const auto& sp : s.spans) {
      if (!sp.label) throw ValidationError("golden sentences need labeled spans");
      NormalizationTrace t;
      t.span = sp;
      t.sfw = reader.render(s.surface(sp), *sp.label).text;
      traces.push_back(std::move(t));
    }
    out.push_back({s, splice(s.text, traces)});
  }
  return out;
}

// Golden file: corpus line format plus a "reference" string. Lines without a
// reference get one rendered from their gold labels.
inline std::vector<GoldenEntry> load_golden(const std::string& path, const LabelSet& labels,
                                            const PatternReader& reader) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<GoldenEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      GoldenEntry e;
      e.sentence = sentence_from_json(j, labels);
      if (j.contains("reference")) {
        e.reference = from_utf8(j.at("reference").get<std::string>());
      } else {
        e.reference = make_golden({e.sentence}, reader).front().reference;
      }
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), lineno);
    } catch (const Error& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return out;
}

inline void save_golden(const std::string& path, const std::vector<GoldenEntry>& golden,
                        const LabelSet& labels) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const auto& g : golden) {
    auto j = sentence_to_json(g.sentence, labels);
    j["reference"] = to_utf8(g.reference);
    out << j.dump() << '\n';
  }
}

struct SystemScore {
  double sentence_accuracy = 0;
  double pattern_accuracy = 0;
  PatternMetrics metrics;
};

struct GoldenReport {
  SystemScore hybrid;
  SystemScore rules;
  RoutingStats routing;
};

namespace detail {

inline SystemScore score_system(const std::vector<GoldenEntry>& golden,
                                const std::vector<NormalizationResult>& results,
                                std::size_t num_labels) {
  std::vector<std::pair<Text, Text>> sentences;
  std::vector<std::pair<LabelId, std::optional<LabelId>>> patterns;
  for (std::size_t i = 0; i < golden.size(); ++i) {
    sentences.emplace_back(results[i].text, golden[i].reference);
    for (const auto& sp : golden[i].sentence.spans) {
      std::optional<LabelId> pred;
      for (const auto& t : results[i].traces) {
        if (t.span.start == sp.start && t.span.end == sp.end) pred = t.label;
      }
      patterns.emplace_back(*sp.label, pred);
    }
  }
  SystemScore s;
  s.sentence_accuracy = sentence_accuracy(sentences);
  if (!patterns.empty()) {
    s.metrics = pattern_metrics(patterns, num_labels);
    s.pattern_accuracy = s.metrics.accuracy;
  }
  return s;
}

}  // namespace detail

// Scores the hybrid pipeline and the rules-only baseline on the same
// golden set.
inline GoldenReport evaluate_golden(const std::vector<GoldenEntry>& golden, const HybridSystem& sys) {
  if (golden.empty()) throw ValidationError("golden set is empty");
  std::vector<NormalizationResult> hybrid, rules;
  std::vector<Text> texts;
  for (const auto& g : golden) {
    hybrid.push_back(normalize(g.sentence.text, sys));
    rules.push_back(normalize_rules_only(g.sentence.text, sys));
    texts.push_back(g.sentence.text);
  }
  GoldenReport r;
  r.hybrid = detail::score_system(golden, hybrid, sys.labels().size());
  r.rules = detail::score_system(golden, rules, sys.labels().size());
  for (const auto& res : hybrid) {
    for (const auto& t : res.traces) {
      ++r.routing.total;
      if (t.route == Route::kPriorityRule) {
        ++r.routing.priority;
      } else {
        ++r.routing.neural;
        r.routing.fallback += t.verification_failed;
      }
    }
  }
  return r;
}

inline std::string format_fixed(double v, int digits = 3) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << v;
  return o.str();
}

// Aligned text table of per-label precision/recall/F1 plus overall accuracy.
inline std::string format_metrics_table(const PatternMetrics& m, const LabelSet& labels) {
  std::size_t w = 12;
  for (const auto& l : labels.all()) w = std::max(w, l.name.size());
  std::ostringstream o;
  o << std::left << std::setw(static_cast<int>(w)) << "label" << "  precision  recall  f1     support\n";
  for (std::size_t l = 0; l < m.per_label.size(); ++l) {
    const auto& s = m.per_label[l];
    if (s.support == 0 && s.predicted == 0) continue;
    o << std::left << std::setw(static_cast<int>(w)) << labels[static_cast<LabelId>(l)].name << "  "
      << std::setw(9) << format_fixed(s.precision) << "  " << std::setw(6) << format_fixed(s.recall)
      << "  " << std::setw(5) << format_fixed(s.f1) << "  " << s.support << '\n';
  }
  o << std::left << std::setw(static_cast<int>(w)) << "accuracy" << "  " << format_fixed(m.accuracy) << '\n';
  return o.str();
}

// ---------------------------------------------------------------------------
// Ablation

struct AblationEntry {
  std::string name;
  nlohmann::json overrides = nlohmann::json::object();
  std::vector<std::string> expand;  // oversampling strategies; empty = none
};

struct AblationGrid {
  neural::ClassifierConfig base;
  std::vector<AblationEntry> entries;
  double rare_threshold = 0.05;
  std::size_t expand_factor = 1;
};

inline AblationGrid grid_from_json(const nlohmann::json& j) {
  AblationGrid g;
  if (j.contains("base")) g.base = j.at("base").get<neural::ClassifierConfig>();
  g.rare_threshold = j.value("rare_threshold", g.rare_threshold);
  g.expand_factor = j.value("expand_factor", g.expand_factor);
  for (const auto& row : j.at("rows")) {
    AblationEntry e;
    e.name = row.at("name").get<std::string>();
    if (row.contains("overrides")) e.overrides = row.at("overrides");
    if (row.contains("expand")) e.expand = row.at("expand").get<std::vector<std::string>>();
    ExpandOptions::parse(e.expand);  // reject unknown strategies up front
    neural::apply_overrides(g.base, e.overrides).validate();
    g.entries.push_back(std::move(e));
  }
  return g;
}

inline AblationGrid load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return grid_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

struct AblationRow {
  std::string name;
  bool failed = false;
  std::string error;
  double accuracy = 0;
  double rare_recall = 0;  // macro recall over the rare labels
  std::vector<double> recall;
  std::size_t window = 0;
};

// Labels with the fewest nonzero spans in `corpus`, at most `count` of them,
// ties broken by id.
inline std::vector<LabelId> rarest_labels(const Corpus& corpus, std::size_t num_labels,
                                          std::size_t count) {
  const auto counts = label_counts(corpus, num_labels);
  std::vector<LabelId> ids;
  for (std::size_t l = 0; l < num_labels; ++l) {
    if (counts[l] > 0) ids.push_back(static_cast<LabelId>(l));
  }
  std::stable_sort(ids.begin(), ids.end(), [&](LabelId a, LabelId b) { return counts[a] < counts[b]; });
  if (ids.size() > count) ids.resize(count);
  return ids;
}

struct ClassifierScore {
  double accuracy = 0;
  double rare_recall = 0;
  PatternMetrics metrics;
};

inline ClassifierScore score_classifier(const neural::Classifier& model, const Corpus& test,
                                        const FormatRegistry& formats,
                                        const std::vector<LabelId>& rare) {
  const auto samples = neural::make_samples(test, model, formats, model.config.use_mask);
  const auto pred = neural::predict(model.params, samples);
  std::vector<std::pair<LabelId, std::optional<LabelId>>> pairs;
  for (std::size_t i = 0; i < samples.size(); ++i) pairs.emplace_back(samples[i].target, pred[i]);
  ClassifierScore s;
  s.metrics = pattern_metrics(pairs, formats.size());
  s.accuracy = s.metrics.accuracy;
  double sum = 0;
  std::size_t n = 0;
  for (auto l : rare) {
    if (s.metrics.per_label[l].support == 0) continue;
    sum += s.metrics.per_label[l].recall;
    ++n;
  }
  s.rare_recall = n ? sum / n : 0;
  return s;
}

// Trains one classifier per grid entry on the train split of `corpus` and
// scores it on the test split. All rows share the split and the seed; a row
// whose training aborts is marked failed and the run continues.
inline std::vector<AblationRow> run_ablation(const AblationGrid& grid, const Corpus& corpus,
                                             std::uint64_t seed, const LabelSet& labels,
                                             const FormatRegistry& formats,
                                             const std::function<void(const AblationRow&)>& on_row = {}) {
  const auto split = split_corpus(corpus, seed);
  const auto rare = rarest_labels(split.train, labels.size(), 5);
  std::vector<AblationRow> rows;
  for (const auto& entry : grid.entries) {
    AblationRow row;
    row.name = entry.name;
    try {
      auto cfg = neural::apply_overrides(grid.base, entry.overrides);
      cfg.seed = seed;
      Corpus train_set = split.train;
      if (!entry.expand.empty()) {
        ExpandOptions opt;
        opt.strategies = ExpandOptions::parse(entry.expand);
        opt.rare_threshold = grid.rare_threshold;
        opt.factor = grid.expand_factor;
        opt.window = cfg.window;
        opt.seed = seed;
        train_set = oversample_expand(train_set, opt, labels, formats);
      }
      const auto trained = neural::train_classifier(train_set, cfg, labels, formats);
      const auto score = score_classifier(trained.model, split.test, formats, rare);
      row.accuracy = score.accuracy;
      row.rare_recall = score.rare_recall;
      row.window = trained.model.config.window;
      for (const auto& s : score.metrics.per_label) row.recall.push_back(s.recall);
    } catch (const Error& e) {
      row.failed = true;
      row.error = e.what();
    }
    rows.push_back(row);
    if (on_row) on_row(row);
  }
  return rows;
}

inline std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::size_t w = 5;
  for (const auto& r : rows) w = std::max(w, r.name.size());
  std::ostringstream o;
  o << std::left << std::setw(static_cast<int>(w)) << "setup" << "  accuracy  rare_recall  window\n";
  for (const auto& r : rows) {
    o << std::left << std::setw(static_cast<int>(w)) << r.name << "  ";
    if (r.failed) {
      o << "FAILED: " << r.error << '\n';
      continue;
    }
    o << std::setw(8) << format_fixed(r.accuracy) << "  " << std::setw(11) << format_fixed(r.rare_recall)
      << "  " << r.window << '\n';
  }
  return o.str();
}

inline nlohmann::json ablation_row_json(const AblationRow& r) {
  nlohmann::json j = {{"setup", r.name}, {"failed", r.failed}};
  if (r.failed) {
    j["error"] = r.error;
  } else {
    j["accuracy"] = r.accuracy;
    j["rare_recall"] = r.rare_recall;
    j["recall"] = r.recall;
    j["window"] = r.window;
  }
  return j;
}

}  // namespace hybridtn
