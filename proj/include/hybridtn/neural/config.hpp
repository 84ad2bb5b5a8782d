#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "json.hpp"

#include "hybridtn/error.hpp"

namespace hybridtn::neural {

// Hyperparameters of the attention classifier. `labels` is filled from the
// label registry, not from configuration files.
struct ClassifierConfig {
  std::size_t window = 30;
  std::size_t heads = 8;
  std::size_t d_model = 64;
  std::size_t d_ff = 128;
  std::size_t labels = 0;
  double focal_alpha = 0.5;
  double focal_gamma = 4.0;
  double learning_rate = 1e-3;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  int pad_id = 1;            // 0 selects the pad-with-zeros ablation
  bool use_mask = true;      // legality mask before softmax
  bool max_window = false;   // window = longest training sentence instead of `window`
  std::string pretrained_vectors;  // optional character vector file

  std::size_t head_dim() const { return d_model / heads; }

  void validate() const {
    if (heads == 0 || d_model % heads != 0) {
      throw ConfigError("d_model must be a positive multiple of heads");
    }
    if (window == 0 || d_ff == 0) throw ConfigError("window and d_ff must be positive");
    if (!(focal_alpha > 0 && focal_alpha <= 1)) throw ConfigError("focal_alpha must be in (0,1]");
    if (focal_gamma < 0) throw ConfigError("focal_gamma must be >= 0");
    if (pad_id != 0 && pad_id != 1) throw ConfigError("pad_id must be 0 or 1");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  }
};

inline void from_json(const nlohmann::json& j, ClassifierConfig& c) {
  static const char* kKnown[] = {"window", "heads", "d_model", "d_ff", "focal_alpha",
                                 "focal_gamma", "learning_rate", "epochs", "batch_size", "seed",
                                 "pad_id", "use_mask", "max_window", "pretrained_vectors"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : kKnown) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown classifier config key '" + key + "'");
  }
  c.window = j.value("window", c.window);
  c.heads = j.value("heads", c.heads);
  c.d_model = j.value("d_model", c.d_model);
  c.d_ff = j.value("d_ff", c.d_ff);
  c.focal_alpha = j.value("focal_alpha", c.focal_alpha);
  c.focal_gamma = j.value("focal_gamma", c.focal_gamma);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.pad_id = j.value("pad_id", c.pad_id);
  c.use_mask = j.value("use_mask", c.use_mask);
  c.max_window = j.value("max_window", c.max_window);
  c.pretrained_vectors = j.value("pretrained_vectors", c.pretrained_vectors);
}

inline void to_json(nlohmann::json& j, const ClassifierConfig& c) {
  j = {{"window", c.window},           {"heads", c.heads},
       {"d_model", c.d_model},         {"d_ff", c.d_ff},
       {"focal_alpha", c.focal_alpha}, {"focal_gamma", c.focal_gamma},
       {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
       {"batch_size", c.batch_size},   {"seed", c.seed},
       {"pad_id", c.pad_id},           {"use_mask", c.use_mask},
       {"max_window", c.max_window},   {"pretrained_vectors", c.pretrained_vectors}};
}

// Applies the keys present in `overrides` on top of `base`.
inline ClassifierConfig apply_overrides(ClassifierConfig base, const nlohmann::json& overrides) {
  nlohmann::json merged = base;
  merged.update(overrides);
  ClassifierConfig out = merged.get<ClassifierConfig>();
  out.labels = base.labels;
  return out;
}

inline ClassifierConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    auto c = nlohmann::json::parse(in).get<ClassifierConfig>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace hybridtn::neural
