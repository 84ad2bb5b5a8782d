#pragma once

#include <span>
#include <string>
#include <vector>

#include "hybridtn/corpus.hpp"
#include "hybridtn/error.hpp"
#include "hybridtn/legality.hpp"
#include "hybridtn/neural/config.hpp"
#include "hybridtn/neural/encoder.hpp"
#include "hybridtn/neural/focal_loss.hpp"
#include "hybridtn/neural/vocabulary.hpp"

namespace hybridtn::neural {

// A trained (or freshly initialized) classifier with everything needed to
// run inference on raw sentences.
struct Classifier {
  ClassifierConfig config;
  Vocabulary vocab;
  EncoderParams params;
  std::vector<std::string> label_names;

  EncodedWindow encode(const LabeledSentence& sentence, const NSWSpan& span) const {
    const ContextWindow w = extract_window(sentence, span, config.window);
    return {vocab.encode(w), w.nsw_mask, w.pad_mask};
  }
};

struct Classification {
  std::vector<double> probabilities;
  LabelId label = 0;
};

inline LabelId argmax(const RowVector& p) {
  Eigen::Index best = 0;
  p.maxCoeff(&best);
  return static_cast<LabelId>(best);
}

// Masked-softmax classification of one encoded window. Throws
// ValidationError when no label is legal.
inline Classification classify(const EncoderParams& params, const EncodedWindow& window,
                               const LabelMask& legal) {
  if (!any_legal(legal)) throw ValidationError("no legal label for this NSW");
  ForwardCache cache;
  const RowVector p = masked_softmax(forward(params, window, cache), legal);
  return {std::vector<double>(p.data(), p.data() + p.size()), argmax(p)};
}

struct TrainingSample {
  EncodedWindow window;
  LabelMask legal;
  LabelId target = 0;
};

// Mean focal loss of the target-label probabilities.
inline double batch_loss(std::span<const RowVector> probabilities, std::span<const TrainingSample> batch,
                         const ClassifierConfig& c) {
  if (batch.empty()) throw ValidationError("empty batch");
  double total = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto t = batch[i].target;
    if (!batch[i].legal.at(static_cast<std::size_t>(t))) {
      throw ValidationError("target label is illegal under its legality mask");
    }
    total += focal_loss(probabilities[i][t], true, c.focal_alpha, c.focal_gamma);
  }
  return total / static_cast<double>(batch.size());
}

inline double batch_loss(const EncoderParams& params, std::span<const TrainingSample> batch,
                         const ClassifierConfig& c) {
  std::vector<RowVector> probs;
  probs.reserve(batch.size());
  for (const auto& s : batch) {
    ForwardCache cache;
    probs.push_back(masked_softmax(forward(params, s.window, cache), s.legal));
  }
  return batch_loss(probs, batch, c);
}

// Loss of the batch; gradients of the mean loss are accumulated into `grad`.
// `correct` receives the number of samples whose argmax equals the target.
inline double loss_and_gradient(const EncoderParams& params, std::span<const TrainingSample> batch,
                                const ClassifierConfig& c, EncoderParams& grad,
                                std::size_t* correct = nullptr) {
  if (batch.empty()) throw ValidationError("empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double total = 0;
  ForwardCache cache;
  for (const auto& s : batch) {
    const auto t = s.target;
    if (!s.legal.at(static_cast<std::size_t>(t))) {
      throw ValidationError("target label is illegal under its legality mask");
    }
    const RowVector p = masked_softmax(forward(params, s.window, cache), s.legal);
    if (correct && argmax(p) == t) ++*correct;
    const double pt = p[t];
    total += focal_loss(pt, true, c.focal_alpha, c.focal_gamma);
    // d pt / d z_j = pt (delta_tj - p_j) on legal entries, 0 elsewhere.
    const double dl_dpt = focal_loss_grad(pt, c.focal_alpha, c.focal_gamma) * inv_b;
    RowVector dlogits = -pt * p;
    dlogits[t] += pt;
    dlogits *= dl_dpt;
    backward(params, s.window, cache, dlogits, grad);
  }
  return total * inv_b;
}

}  // namespace hybridtn::neural
