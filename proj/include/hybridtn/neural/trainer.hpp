#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "hybridtn/corpus.hpp"
#include "hybridtn/error.hpp"
#include "hybridtn/legality.hpp"
#include "hybridtn/neural/classifier.hpp"
#include "hybridtn/random.hpp"

namespace hybridtn::neural {

class TrainingError : public Error {
 public:
  using Error::Error;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0;
  double train_accuracy = 0;  // argmax before each update, over the epoch
  double dev_accuracy = -1;   // -1 when no dev set was given
};

// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
 public:
  Adam(const EncoderParams& like, double lr) : lr_(lr), m_(like.zeros_like()), v_(like.zeros_like()) {}

  void step(EncoderParams& params, const EncoderParams& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    std::vector<Matrix*> ps, ms, vs;
    std::vector<const Matrix*> gs;
    params.for_each([&](const std::string&, Matrix& x) { ps.push_back(&x); });
    m_.for_each([&](const std::string&, Matrix& x) { ms.push_back(&x); });
    v_.for_each([&](const std::string&, Matrix& x) { vs.push_back(&x); });
    grad.for_each([&](const std::string&, const Matrix& x) { gs.push_back(&x); });
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto m = ms[i]->array();
      auto v = vs[i]->array();
      const auto g = gs[i]->array();
      m = kBeta1 * m + (1.0 - kBeta1) * g;
      v = kBeta2 * v + (1.0 - kBeta2) * g.square();
      ps[i]->array() -= lr_ * (m / c1) / ((v / c2).sqrt() + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  std::size_t t_ = 0;
  EncoderParams m_, v_;
};

// One sample per labeled span. With use_mask off, every label is legal.
inline std::vector<TrainingSample> make_samples(const Corpus& corpus, const Classifier& model,
                                                const FormatRegistry& formats, bool use_mask) {
  std::vector<TrainingSample> out;
  for (const auto& s : corpus) {
    for (const auto& sp : s.spans) {
      if (!sp.label) continue;
      TrainingSample t;
      t.window = model.encode(s, sp);
      t.legal = use_mask ? formats.legal_labels(s.surface(sp)) : LabelMask(formats.size(), true);
      t.target = *sp.label;
      if (!t.legal.at(static_cast<std::size_t>(t.target))) {
        throw ValidationError("span '" + to_utf8(s.surface(sp)) + "' is illegal for its label");
      }
      out.push_back(std::move(t));
    }
  }
  return out;
}

inline std::vector<LabelId> predict(const EncoderParams& params,
                                    const std::vector<TrainingSample>& samples) {
  std::vector<LabelId> out;
  out.reserve(samples.size());
  ForwardCache cache;
  for (const auto& s : samples) {
    out.push_back(argmax(masked_softmax(forward(params, s.window, cache), s.legal)));
  }
  return out;
}

inline double accuracy(const EncoderParams& params, const std::vector<TrainingSample>& samples) {
  if (samples.empty()) return 0;
  const auto pred = predict(params, samples);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) ok += pred[i] == samples[i].target;
  return static_cast<double>(ok) / static_cast<double>(samples.size());
}

using EpochCallback = std::function<void(const EpochLog&)>;

struct TrainResult {
  EncoderParams params;
  std::vector<EpochLog> log;
};

// Mini-batch Adam on the mean focal loss. Sample order is reshuffled every
// epoch from a generator seeded with config.seed, so results depend only on
// the inputs. Zero epochs return `init` unchanged.
inline TrainResult train(const std::vector<TrainingSample>& samples, const ClassifierConfig& c,
                         EncoderParams init, const std::vector<TrainingSample>* dev = nullptr,
                         const EpochCallback& on_epoch = {}) {
  if (samples.empty()) throw TrainingError("training set is empty");
  TrainResult result{std::move(init), {}};
  if (c.epochs == 0) return result;
  Adam opt(result.params, c.learning_rate);
  Rng rng(c.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  EncoderParams grad = result.params.zeros_like();
  std::vector<TrainingSample> batch;
  for (std::size_t epoch = 1; epoch <= c.epochs; ++epoch) {
    shuffle_in_place(rng, order);
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < order.size(); b += c.batch_size) {
      batch.clear();
      for (std::size_t i = b; i < std::min(order.size(), b + c.batch_size); ++i) {
        batch.push_back(samples[order[i]]);
      }
      grad.for_each([](const std::string&, Matrix& m) { m.setZero(); });
      const double loss = loss_and_gradient(result.params, batch, c, grad, &correct);
      if (!std::isfinite(loss) || !grad.all_finite()) {
        std::ostringstream msg;
        msg << "non-finite loss or gradient at epoch " << epoch << ", batch starting at "
            << b << " (loss " << loss << ", lr " << c.learning_rate << ")";
        throw TrainingError(msg.str());
      }
      loss_sum += loss * static_cast<double>(batch.size());
      opt.step(result.params, grad);
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = loss_sum / static_cast<double>(samples.size());
    entry.train_accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
    if (dev && !dev->empty()) entry.dev_accuracy = accuracy(result.params, *dev);
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

// Overwrites embedding rows from a text file with one character followed by
// D reals per line. Characters missing from the vocabulary are skipped.
// Returns the number of rows replaced.
inline std::size_t load_char_vectors(const std::string& path, const Vocabulary& vocab,
                                     EncoderParams& params) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  const auto D = params.embedding.cols();
  std::string line;
  std::size_t lineno = 0, replaced = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (hybridtn::detail::trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    const Text ch = from_utf8(token);
    if (ch.size() != 1) throw ParseError("expected a single character", lineno);
    RowVector v(D);
    for (Eigen::Index k = 0; k < D; ++k) {
      if (!(ls >> v[k])) throw ParseError("expected " + std::to_string(D) + " values", lineno);
    }
    double extra;
    if (ls >> extra) throw ParseError("more than " + std::to_string(D) + " values", lineno);
    const int id = vocab.id(ch[0]);
    if (id == vocab.unk_id()) continue;
    params.embedding.row(id) = v;
    ++replaced;
  }
  return replaced;
}

inline std::size_t longest_sentence(const Corpus& corpus) {
  std::size_t n = 0;
  for (const auto& s : corpus) n = std::max(n, s.text.size());
  return n;
}

struct TrainedClassifier {
  Classifier model;
  std::vector<EpochLog> log;
};

// Builds the vocabulary and window from `train_set`, initializes, optionally
// imports character vectors, and trains.
inline TrainedClassifier train_classifier(const Corpus& train_set, ClassifierConfig c,
                                          const LabelSet& labels, const FormatRegistry& formats,
                                          const Corpus* dev_set = nullptr,
                                          const EpochCallback& on_epoch = {}) {
  if (train_set.empty()) throw TrainingError("training corpus is empty");
  c.labels = labels.size();
  if (c.max_window) c.window = std::max<std::size_t>(1, longest_sentence(train_set));
  c.validate();
  Classifier model;
  model.config = c;
  model.vocab = Vocabulary::build(train_set, c.pad_id);
  model.label_names = labels.names();
  model.params = init_params(c, model.vocab.size());
  if (!c.pretrained_vectors.empty()) load_char_vectors(c.pretrained_vectors, model.vocab, model.params);
  const auto samples = make_samples(train_set, model, formats, c.use_mask);
  std::vector<TrainingSample> dev;
  if (dev_set) dev = make_samples(*dev_set, model, formats, c.use_mask);
  auto result = train(samples, c, std::move(model.params), dev_set ? &dev : nullptr, on_epoch);
  model.params = std::move(result.params);
  return {std::move(model), std::move(result.log)};
}

}  // namespace hybridtn::neural
