// Command-line front end: corpus generation, training, classification,
// normalization, evaluation and ablation.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "hybridtn/hybridtn.hpp"

namespace htn = hybridtn;

namespace {

const std::string kDataDir = HYBRIDTN_DATA_DIR;

std::string data_file(const char* name) { return kDataDir + "/" + name; }

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw htn::Error("cannot open " + path);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

struct Output {
  std::ofstream file;
  std::ostream* stream = &std::cout;
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file.open(path);
    if (!file) throw htn::Error("cannot write " + path);
    stream = &file;
  }
};

htn::HybridSystem load_system(const std::string& model, const std::string& rules,
                              const std::string& priority) {
  auto labels = htn::default_labels();
  auto rs = htn::compile_rules(rules, labels);
  auto pl = priority.empty() ? htn::default_priority_list() : htn::load_priority_list(priority);
  std::optional<htn::neural::Classifier> m;
  if (!model.empty()) m = htn::neural::load_params(model);
  return htn::HybridSystem(std::move(labels), std::move(rs), std::move(pl), std::move(m));
}

void print_epoch(const htn::neural::EpochLog& e) {
  std::cout << "epoch " << e.epoch << "  loss " << htn::format_fixed(e.loss, 5) << "  train "
            << htn::format_fixed(e.train_accuracy);
  if (e.dev_accuracy >= 0) std::cout << "  dev " << htn::format_fixed(e.dev_accuracy);
  std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid rule/neural text normalization for Mandarin non-standard words"};
  app.require_subcommand(1);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Generate a labeled synthetic corpus");
  std::string gen_dist = data_file("distribution.json"), gen_templates = data_file("templates.txt"),
              gen_out;
  std::size_t gen_n = 5000, gen_clauses = 0;
  std::uint64_t gen_seed = 1;
  bool gen_golden = false;
  gen->add_option("--dist", gen_dist, "Label distribution JSON")->check(CLI::ExistingFile);
  gen->add_option("--n", gen_n, "Number of sentences")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--out", gen_out, "Output JSONL (default stdout)");
  gen->add_option("--templates", gen_templates, "Template file")->check(CLI::ExistingFile);
  gen->add_option("--clauses", gen_clauses,
                  "Join up to this many sentences into one multi-NSW sentence");
  gen->add_flag("--golden", gen_golden, "Add rendered reference normalizations");

  // train
  auto* tr = app.add_subcommand("train", "Train the pattern classifier");
  std::string tr_corpus, tr_config = data_file("train_config.json"), tr_out;
  std::optional<std::size_t> tr_epochs;
  tr->add_option("--corpus", tr_corpus, "Training corpus JSONL")->required()->check(CLI::ExistingFile);
  tr->add_option("--config", tr_config, "Classifier config JSON")->check(CLI::ExistingFile);
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--epochs", tr_epochs, "Override the configured epoch count");

  // classify
  auto* cl = app.add_subcommand("classify", "Classify every NSW in some text");
  std::string cl_model, cl_text, cl_in;
  cl->add_option("--model", cl_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  auto* cl_text_opt = cl->add_option("--text", cl_text, "Sentence to classify");
  auto* cl_in_opt = cl->add_option("--in", cl_in, "File with one sentence per line")->check(CLI::ExistingFile);
  cl_text_opt->excludes(cl_in_opt);

  // normalize
  auto* no = app.add_subcommand("normalize", "Normalize text to spoken form");
  std::string no_model, no_rules = data_file("rules.txt"), no_priority = data_file("priority.txt"),
              no_in, no_out, no_trace;
  bool no_rules_only = false;
  no->add_option("--model", no_model, "Checkpoint")->check(CLI::ExistingFile);
  no->add_option("--rules", no_rules, "Rule file")->check(CLI::ExistingFile);
  no->add_option("--priority", no_priority, "Priority list")->check(CLI::ExistingFile);
  no->add_option("--in", no_in, "Input text, one document per line")->required()->check(CLI::ExistingFile);
  no->add_option("--out", no_out, "Output (default stdout)");
  no->add_option("--trace", no_trace, "Write one JSON record per NSW to this file");
  no->add_flag("--rules-only", no_rules_only, "Use the rule-based baseline only");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score hybrid and rules-only output on a golden set");
  std::string ev_golden, ev_model, ev_rules = data_file("rules.txt"),
              ev_priority = data_file("priority.txt");
  ev->add_option("--golden", ev_golden, "Golden JSONL")->required()->check(CLI::ExistingFile);
  ev->add_option("--model", ev_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--rules", ev_rules, "Rule file")->check(CLI::ExistingFile);
  ev->add_option("--priority", ev_priority, "Priority list")->check(CLI::ExistingFile);

  // ablate
  auto* ab = app.add_subcommand("ablate", "Train and score every classifier setup in a grid");
  std::string ab_grid = data_file("ablation_grid.json"), ab_corpus, ab_json;
  std::uint64_t ab_seed = 1;
  ab->add_option("--grid", ab_grid, "Ablation grid JSON")->check(CLI::ExistingFile);
  ab->add_option("--corpus", ab_corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  ab->add_option("--seed", ab_seed, "Seed for the split, initialization and shuffling");
  ab->add_option("--json", ab_json, "Also write one JSON record per row to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto labels = htn::default_labels();
      const htn::FormatRegistry formats(labels);
      const auto corpus = htn::generate_synthetic_corpus(
          htn::load_distribution(gen_dist, labels), gen_n, gen_seed,
          htn::load_templates(gen_templates, labels), labels, formats);
      const auto out_corpus =
          gen_clauses > 1 ? htn::compose_clauses(corpus, gen_clauses, gen_seed) : corpus;
      Output out(gen_out);
      if (gen_golden) {
        const htn::PatternReader reader(labels);
        for (const auto& g : htn::make_golden(out_corpus, reader)) {
          auto j = htn::sentence_to_json(g.sentence, labels);
          j["reference"] = htn::to_utf8(g.reference);
          *out.stream << j.dump() << '\n';
        }
      } else {
        htn::write_corpus(*out.stream, out_corpus, labels);
      }
      std::cerr << "wrote " << out_corpus.size() << " sentences\n";
    } else if (*tr) {
      const auto labels = htn::default_labels();
      const htn::FormatRegistry formats(labels);
      auto cfg = htn::neural::load_config(tr_config);
      if (tr_epochs) cfg.epochs = *tr_epochs;
      const auto corpus = htn::load_corpus(tr_corpus, labels);
      const auto split = htn::split_corpus(corpus, cfg.seed);
      std::cerr << "train " << split.train.size() << "  dev " << split.dev.size() << "  test "
                << split.test.size() << '\n';
      const auto t0 = std::chrono::steady_clock::now();
      const auto trained =
          htn::neural::train_classifier(split.train, cfg, labels, formats, &split.dev, print_epoch);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      htn::neural::save_params(tr_out, trained.model);
      const auto score = htn::score_classifier(trained.model, split.test, formats,
                                               htn::rarest_labels(split.train, labels.size(), 5));
      std::cout << "test accuracy " << htn::format_fixed(score.accuracy) << "  rare-5 recall "
                << htn::format_fixed(score.rare_recall) << "  (" << htn::format_fixed(secs, 1)
                << " s)\n"
                << htn::format_metrics_table(score.metrics, labels);
    } else if (*cl) {
      if (cl_text.empty() && cl_in.empty()) throw htn::ConfigError("give --text or --in");
      const auto model = htn::neural::load_params(cl_model);
      const auto labels = htn::default_labels();
      if (model.label_names != labels.names()) {
        throw htn::ConfigError("checkpoint was trained on a different label set");
      }
      const htn::FormatRegistry formats(labels);
      const auto lines = cl_in.empty() ? std::vector<std::string>{cl_text} : read_lines(cl_in);
      for (const auto& line : lines) {
        htn::LabeledSentence s{htn::from_utf8(line), {}};
        for (const auto& span : htn::extract_nsw(s.text)) {
          const auto surface = s.surface(span);
          auto legal = model.config.use_mask ? formats.legal_labels(surface)
                                             : htn::LabelMask(labels.size(), true);
          nlohmann::json j = {{"text", line}, {"start", span.start}, {"end", span.end},
                              {"surface", htn::to_utf8(surface)}};
          if (!htn::any_legal(legal)) {
            j["label"] = nullptr;
          } else {
            const auto c = htn::neural::classify(model.params, model.encode(s, span), legal);
            j["label"] = labels[c.label].name;
            nlohmann::json probs = nlohmann::json::object();
            for (std::size_t l = 0; l < labels.size(); ++l) {
              if (c.probabilities[l] > 0) probs[labels[static_cast<htn::LabelId>(l)].name] = c.probabilities[l];
            }
            j["probabilities"] = probs;
          }
          std::cout << j.dump() << '\n';
        }
      }
    } else if (*no) {
      if (no_model.empty() && !no_rules_only) {
        throw htn::ConfigError("--model is required unless --rules-only is given");
      }
      const auto sys = load_system(no_rules_only ? "" : no_model, no_rules, no_priority);
      Output out(no_out);
      std::ofstream trace;
      if (!no_trace.empty()) {
        trace.open(no_trace);
        if (!trace) throw htn::Error("cannot write " + no_trace);
      }
      std::size_t line_no = 0;
      for (const auto& line : read_lines(no_in)) {
        ++line_no;
        const auto result = htn::normalize_document(htn::from_utf8(line), sys, no_rules_only);
        *out.stream << htn::to_utf8(result.text) << '\n';
        for (const auto& t : result.traces) {
          auto j = htn::trace_to_json(t, sys.labels());
          j["line"] = line_no;
          if (trace) trace << j.dump() << '\n';
        }
      }
      if (trace && !trace.flush()) throw htn::Error("failed writing " + no_trace);
    } else if (*ev) {
      const auto sys = load_system(ev_model, ev_rules, ev_priority);
      const auto golden = htn::load_golden(ev_golden, sys.labels(), sys.reader());
      const auto r = htn::evaluate_golden(golden, sys);
      std::cout << "sentences " << golden.size() << '\n'
                << "hybrid sentence accuracy      " << htn::format_fixed(r.hybrid.sentence_accuracy, 4) << '\n'
                << "rules-only sentence accuracy  " << htn::format_fixed(r.rules.sentence_accuracy, 4) << '\n'
                << "hybrid pattern accuracy       " << htn::format_fixed(r.hybrid.pattern_accuracy, 4) << '\n'
                << "rules-only pattern accuracy   " << htn::format_fixed(r.rules.pattern_accuracy, 4) << '\n'
                << "priority route " << r.routing.priority << "  neural route " << r.routing.neural
                << "  fallback " << r.routing.fallback << "\n\n"
                << "hybrid per-label\n" << htn::format_metrics_table(r.hybrid.metrics, sys.labels())
                << "\nrules-only per-label\n" << htn::format_metrics_table(r.rules.metrics, sys.labels());
    } else if (*ab) {
      const auto labels = htn::default_labels();
      const htn::FormatRegistry formats(labels);
      const auto grid = htn::load_grid(ab_grid);
      const auto corpus = htn::load_corpus(ab_corpus, labels);
      std::optional<Output> json_out;
      if (!ab_json.empty()) json_out.emplace(ab_json);
      const auto rows = htn::run_ablation(grid, corpus, ab_seed, labels, formats,
                                          [&](const htn::AblationRow& row) {
                                            std::cerr << "finished " << row.name << '\n';
                                            if (json_out) {
                                              *json_out->stream << htn::ablation_row_json(row).dump() << '\n';
                                            }
                                          });
      std::cout << htn::format_ablation_table(rows);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
