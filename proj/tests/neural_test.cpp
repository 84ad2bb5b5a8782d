#include <gtest/gtest.h>

#include <chrono>
#include <fstream>
#include <sstream>

#include "test_support.hpp"

namespace hybridtn::neural {
namespace {

using hybridtn::testing::TempDir;

ClassifierConfig small_config(std::size_t L = 4) {
  ClassifierConfig c;
  c.window = 10;
  c.heads = 2;
  c.d_model = 8;
  c.d_ff = 12;
  c.labels = L;
  return c;
}

// A random window with a 2..4 character NSW in the middle and some padding
// at the left edge.
EncodedWindow random_window(Rng& rng, std::size_t W, int vocab, int pad_id) {
  EncodedWindow w;
  const auto pads = uniform_below(rng, 3);
  const auto start = 3 + uniform_below(rng, 2);
  const auto len = 2 + uniform_below(rng, 3);
  for (std::size_t i = 0; i < W; ++i) {
    const bool pad = i < pads;
    w.pad_mask.push_back(pad);
    w.nsw_mask.push_back(i >= start && i < start + len);
    w.ids.push_back(pad ? pad_id : static_cast<int>(2 + uniform_below(rng, static_cast<std::uint64_t>(vocab - 2))));
  }
  return w;
}

// ----- focal loss ----------------------------------------------------------

TEST(FocalLoss, ClosedForm) {
  // 0.5 * 0.5^4 * ln 2
  EXPECT_NEAR(focal_loss(0.5, true, 0.5, 4), 0.021660849392498290, 1e-15);
}

TEST(FocalLoss, GammaZeroAlphaOneIsCrossEntropy) {
  for (int i = 1; i <= 1000; ++i) {
    const double p = i / 1001.0;
    EXPECT_NEAR(focal_loss(p, true, 1.0, 0.0), -std::log(p), 1e-12);
  }
}

TEST(FocalLoss, PerfectConfidenceGivesZero) {
  EXPECT_NEAR(focal_loss(1.0, true, 0.5, 4), 0.0, 1e-30);
  EXPECT_LT(focal_loss(0.999, true, 0.5, 4), 1e-12);
}

TEST(FocalLoss, NegativeBranch) {
  EXPECT_NEAR(focal_loss(0.3, false, 0.5, 2), -0.5 * 0.09 * std::log(0.7), 1e-15);
  EXPECT_NEAR(focal_loss(0.0, false, 0.5, 2), 0.0, 1e-12);
}

TEST(FocalLoss, MonotoneAndBelowCrossEntropy) {
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 1; i < 1000; ++i) {
    const double p = i / 1000.0;
    const double l = focal_loss(p, true, 0.5, 4);
    EXPECT_GE(l, 0.0);
    EXPECT_LT(l, prev);
    prev = l;
    if (p > 0.5) EXPECT_LT(focal_loss(p, true, 1.0, 4), -std::log(p));
  }
}

TEST(FocalLoss, DerivativeMatchesFiniteDifference) {
  for (double gamma : {0.0, 1.0, 4.0}) {
    for (double p : {0.05, 0.3, 0.5, 0.8, 0.97}) {
      const double h = 1e-6;
      const double numeric = (focal_loss(p + h, true, 0.5, gamma) - focal_loss(p - h, true, 0.5, gamma)) / (2 * h);
      EXPECT_NEAR(focal_loss_grad(p, 0.5, gamma), numeric, 1e-6 * std::max(1.0, std::abs(numeric)));
    }
  }
}

TEST(BatchLoss, SingleSampleAtHalf) {
  ClassifierConfig c = small_config(2);
  TrainingSample s;
  s.legal = {true, true};
  s.target = 0;
  const std::vector<RowVector> probs = {(RowVector(2) << 0.5, 0.5).finished()};
  const std::vector<TrainingSample> batch = {s};
  EXPECT_NEAR(batch_loss(probs, batch, c), 0.021660849392498290, 1e-12);
}

TEST(BatchLoss, CertainTargetsGiveZero) {
  ClassifierConfig c = small_config(2);
  TrainingSample s;
  s.legal = {true, true};
  s.target = 1;
  const std::vector<RowVector> probs = {(RowVector(2) << 0.0, 1.0).finished(),
                                        (RowVector(2) << 0.0, 1.0).finished()};
  const std::vector<TrainingSample> batch = {s, s};
  EXPECT_NEAR(batch_loss(probs, batch, c), 0.0, 1e-20);
}

TEST(BatchLoss, IllegalTargetIsAnError) {
  ClassifierConfig c = small_config(2);
  TrainingSample s;
  s.legal = {true, false};
  s.target = 1;
  const std::vector<RowVector> probs = {(RowVector(2) << 1.0, 0.0).finished()};
  const std::vector<TrainingSample> batch = {s};
  EXPECT_THROW(batch_loss(probs, batch, c), ValidationError);
}

// ----- masked softmax --------------------------------------------------------

TEST(MaskedSoftmax, RandomPairs) {
  Rng rng(1);
  for (int iter = 0; iter < 10000; ++iter) {
    const auto L = 1 + uniform_below(rng, 36);
    RowVector z(static_cast<Eigen::Index>(L));
    for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = (uniform01(rng) - 0.5) * 60;
    LabelMask m(L);
    for (std::size_t j = 0; j < L; ++j) m[j] = uniform01(rng) < 0.5;
    if (!any_legal(m)) m[uniform_below(rng, L)] = true;
    const RowVector p = masked_softmax(z, m);
    double sum = 0;
    for (std::size_t j = 0; j < L; ++j) {
      if (m[j]) {
        ASSERT_GE(p[static_cast<Eigen::Index>(j)], 0.0);
        sum += p[static_cast<Eigen::Index>(j)];
      } else {
        ASSERT_EQ(p[static_cast<Eigen::Index>(j)], 0.0);
      }
    }
    ASSERT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(MaskedSoftmax, SingleLegalLabelGetsEverything) {
  const RowVector z = (RowVector(4) << 100, -5, 3, 0).finished();
  const RowVector p = masked_softmax(z, {false, true, false, false});
  EXPECT_EQ(p[1], 1.0);
  EXPECT_EQ(p[0], 0.0);
}

TEST(MaskedSoftmax, EmptyMaskThrows) {
  EXPECT_THROW(masked_softmax(RowVector::Zero(3), {false, false, false}), ValidationError);
}

// ----- encoder ------------------------------------------------------------------

TEST(Embed, AllPaddingWindow) {
  const auto c = small_config();
  const auto p = init_params(c, 20);
  const std::vector<int> ids(c.window, 1);
  const Matrix x = embed(p, ids);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    EXPECT_TRUE(x.row(i).isApprox(p.embedding.row(1) + p.position.row(i)));
  }
}

TEST(Embed, Locality) {
  const auto c = small_config();
  const auto p = init_params(c, 20);
  std::vector<int> a(c.window, 5), b = a;
  b[4] = 7;
  const Matrix d = embed(p, a) - embed(p, b);
  for (Eigen::Index i = 0; i < d.rows(); ++i) EXPECT_EQ(d.row(i).isZero(0), i != 4) << i;
}

TEST(Embed, OutOfRangeIdThrows) {
  const auto c = small_config();
  const auto p = init_params(c, 20);
  EXPECT_THROW(embed(p, std::vector<int>(c.window, 20)), ValidationError);
  EXPECT_THROW(embed(p, std::vector<int>(c.window - 1, 2)), ValidationError);
}

TEST(Attention, RowsAreDistributionsOverNonPadPositions) {
  const auto c = small_config();
  const auto p = init_params(c, 20);
  Rng rng(3);
  for (int iter = 0; iter < 50; ++iter) {
    const auto w = random_window(rng, c.window, 20, 1);
    for (const Matrix& a : attention_weights(p, embed(p, w.ids), w.pad_mask)) {
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        EXPECT_NEAR(a.row(i).sum(), 1.0, 1e-12);
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
          if (w.pad_mask[static_cast<std::size_t>(j)]) EXPECT_EQ(a(i, j), 0.0);
          else EXPECT_GT(a(i, j), 0.0);
        }
      }
    }
  }
}

TEST(Attention, PermutationEquivariant) {
  ClassifierConfig c = small_config();
  c.window = 3;
  c.d_model = 4;
  c.heads = 2;
  c.d_ff = 6;
  const auto p = init_params(c, 10);
  Rng rng(8);
  const Matrix x = detail::uniform_matrix(rng, 3, 4, 1.0);
  const std::vector<Eigen::Index> perm = {2, 0, 1};
  const Matrix xp = x(perm, Eigen::all);
  ForwardCache c1, c2;
  const Matrix y = encoder_block(p, x, {false, false, false}, c1);
  const Matrix yp = encoder_block(p, xp, {false, false, false}, c2);
  EXPECT_TRUE(yp.isApprox(y(perm, Eigen::all), 1e-12));
}

TEST(Attention, RestrictedRowsMatchFullBlock) {
  const auto c = small_config();
  const auto p = init_params(c, 20);
  Rng rng(12);
  const auto w = random_window(rng, c.window, 20, 1);
  const Matrix x = embed(p, w.ids);
  ForwardCache full, part;
  const Matrix all = encoder_block(p, x, w.pad_mask, full);
  const std::vector<Eigen::Index> rows = {3, 4, 7};
  const Matrix some = encoder_block(p, x, w.pad_mask, rows, part);
  EXPECT_TRUE(some.isApprox(all(rows, Eigen::all), 1e-12));
}

// ----- classify -------------------------------------------------------------------

TEST(Classify, ForcedChoice) {
  const auto c = small_config(4);
  const auto p = init_params(c, 20);
  Rng rng(2);
  const auto w = random_window(rng, c.window, 20, 1);
  const auto r = classify(p, w, {false, false, true, false});
  EXPECT_EQ(r.label, 2);
  EXPECT_EQ(r.probabilities[2], 1.0);
  EXPECT_THROW(classify(p, w, {false, false, false, false}), ValidationError);
}

TEST(Classify, CharactersOutsideWindowDoNotMatter) {
  const auto labels = default_labels();
  ClassifierConfig c = small_config(labels.size());
  Classifier m;
  m.config = c;
  const LabeledSentence a{L"很久很久以前的某一天他说会议于10:30开始，大家都来了", {{15, 20, std::nullopt}}};
  LabeledSentence b = a;
  b.text[0] = L'在';
  b.text[b.text.size() - 1] = L'吗';
  m.vocab = Vocabulary::build({a, b});
  m.params = init_params(c, m.vocab.size());
  m.label_names = labels.names();
  const LabelMask legal(labels.size(), true);
  EXPECT_EQ(classify(m.params, m.encode(a, a.spans[0]), legal).probabilities,
            classify(m.params, m.encode(b, b.spans[0]), legal).probabilities);
  LabeledSentence inside = a;
  inside.text[14] = L'在';
  EXPECT_NE(classify(m.params, m.encode(a, a.spans[0]), legal).probabilities,
            classify(m.params, m.encode(inside, inside.spans[0]), legal).probabilities);
}

// ----- gradients ------------------------------------------------------------------

std::vector<TrainingSample> random_batch(Rng& rng, const ClassifierConfig& c, int vocab, std::size_t n) {
  std::vector<TrainingSample> batch;
  for (std::size_t i = 0; i < n; ++i) {
    TrainingSample s;
    s.window = random_window(rng, c.window, vocab, c.pad_id);
    s.legal.assign(c.labels, false);
    for (std::size_t j = 0; j < c.labels; ++j) s.legal[j] = uniform01(rng) < 0.7;
    s.target = static_cast<LabelId>(uniform_below(rng, c.labels));
    s.legal[static_cast<std::size_t>(s.target)] = true;
    batch.push_back(s);
  }
  return batch;
}

TEST(GradientCheck, AllTensorsAtDeskDimensions) {
  const auto c = small_config(5);
  Rng rng(21);
  const auto p = init_params(c, 12);
  const auto batch = random_batch(rng, c, 12, 4);
  const auto report = gradient_check(p, batch, c, 1e-4, 8, 3);
  std::size_t tensors = 0;
  p.for_each([&](const std::string&, const Matrix&) { ++tensors; });
  EXPECT_EQ(report.tensors_covered.size(), tensors);
  EXPECT_GE(report.entries.size(), 100u);
  EXPECT_LE(report.max_relative_error, 1e-3);
}

TEST(GradientCheck, CrossEntropySettingAndPadZero) {
  ClassifierConfig c = small_config(3);
  c.focal_alpha = 1.0;
  c.focal_gamma = 0.0;
  c.pad_id = 0;
  Rng rng(4);
  const auto p = init_params(c, 12);
  const auto report = gradient_check(p, random_batch(rng, c, 12, 3), c, 1e-4, 6, 1);
  EXPECT_LE(report.max_relative_error, 1e-3);
}

TEST(Gradient, SymmetricLabelsGetSymmetricClassifierRows) {
  const auto c = small_config(4);
  Rng rng(6);
  auto p = init_params(c, 12);
  p.classifier.setZero();
  p.classifier_bias.setZero();
  auto batch = random_batch(rng, c, 12, 1);
  batch[0].legal.assign(4, true);
  batch[0].target = 1;
  EncoderParams g = p.zeros_like();
  loss_and_gradient(p, batch, c, g);
  EXPECT_TRUE(g.classifier.col(0).isApprox(g.classifier.col(2), 1e-12));
  EXPECT_TRUE(g.classifier.col(0).isApprox(g.classifier.col(3), 1e-12));
  EXPECT_TRUE(g.classifier.col(1).isApprox(-3 * g.classifier.col(0), 1e-12));
}

// ----- training ------------------------------------------------------------------

// Two labels told apart only by a trigger character left of the NSW.
Corpus trigger_corpus(std::size_t n, std::uint64_t seed, const LabelSet& labels) {
  Corpus c;
  Rng rng(seed);
  const Text filler = L"我们今天的是在有了";
  for (std::size_t i = 0; i < n; ++i) {
    const bool spell = uniform01(rng) < 0.5;
    Text pre;
    for (int k = 0; k < 3; ++k) pre += filler[uniform_below(rng, filler.size())];
    pre += spell ? L'码' : L'共';
    const Text nsw = std::to_wstring(uniform_int(rng, 100, 9999));
    Text post;
    for (int k = 0; k < 3; ++k) post += filler[uniform_below(rng, filler.size())];
    const auto label = labels.require(spell ? labels::kSpellKeepZero : labels::kReadNoZero);
    c.push_back({pre + nsw + post, {{pre.size(), pre.size() + nsw.size(), label}}});
  }
  return c;
}

ClassifierConfig toy_config() {
  ClassifierConfig c;
  c.window = 12;
  c.heads = 2;
  c.d_model = 16;
  c.d_ff = 16;
  c.epochs = 20;
  c.batch_size = 16;
  c.learning_rate = 5e-3;
  c.seed = 3;
  return c;
}

TEST(Train, SeparableToyReachesPerfectAccuracy) {
  const auto labels = default_labels();
  const FormatRegistry formats(labels);
  const auto corpus = trigger_corpus(200, 1, labels);
  const auto trained = train_classifier(corpus, toy_config(), labels, formats);
  ASSERT_EQ(trained.log.size(), 20u);
  const auto samples = make_samples(corpus, trained.model, formats, true);
  EXPECT_EQ(accuracy(trained.model.params, samples), 1.0);
  EXPECT_LT(trained.log.back().loss, trained.log.front().loss);
}

TEST(Train, SameSeedSameResult) {
  const auto labels = default_labels();
  const FormatRegistry formats(labels);
  const auto corpus = trigger_corpus(80, 2, labels);
  auto cfg = toy_config();
  cfg.epochs = 3;
  const auto a = train_classifier(corpus, cfg, labels, formats);
  const auto b = train_classifier(corpus, cfg, labels, formats);
  EXPECT_EQ(a.log.back().loss, b.log.back().loss);
  EXPECT_EQ(a.model.params.classifier, b.model.params.classifier);
  cfg.seed = 4;
  EXPECT_NE(train_classifier(corpus, cfg, labels, formats).log.back().loss, a.log.back().loss);
}

TEST(Train, ZeroEpochsReturnsInitialization) {
  const auto labels = default_labels();
  const FormatRegistry formats(labels);
  const auto corpus = trigger_corpus(20, 3, labels);
  auto cfg = toy_config();
  cfg.labels = labels.size();
  Classifier m;
  m.config = cfg;
  m.vocab = Vocabulary::build(corpus);
  m.params = init_params(cfg, m.vocab.size());
  cfg.epochs = 0;
  const auto r = train(make_samples(corpus, m, formats, true), cfg, m.params);
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(r.params.embedding, m.params.embedding);
  EXPECT_EQ(r.params.classifier, m.params.classifier);
}

TEST(Train, NonFiniteLossAborts) {
  const auto labels = default_labels();
  const FormatRegistry formats(labels);
  const auto corpus = trigger_corpus(20, 3, labels);
  auto cfg = toy_config();
  cfg.labels = labels.size();
  Classifier m;
  m.config = cfg;
  m.vocab = Vocabulary::build(corpus);
  m.params = init_params(cfg, m.vocab.size());
  m.params.classifier(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(train(make_samples(corpus, m, formats, true), cfg, m.params), TrainingError);
}

TEST(Train, EmptyCorpusIsATrainingError) {
  const auto labels = default_labels();
  EXPECT_THROW(train_classifier({}, toy_config(), labels, FormatRegistry(labels)), TrainingError);
}

TEST(Train, MaxWindowUsesLongestSentence) {
  const auto labels = default_labels();
  const FormatRegistry formats(labels);
  const auto corpus = trigger_corpus(30, 5, labels);
  auto cfg = toy_config();
  cfg.epochs = 1;
  cfg.max_window = true;
  const auto trained = train_classifier(corpus, cfg, labels, formats);
  EXPECT_EQ(trained.model.config.window, longest_sentence(corpus));
}

TEST(Train, PretrainedVectorsAreImported) {
  const auto labels = default_labels();
  const FormatRegistry formats(labels);
  const auto corpus = trigger_corpus(20, 5, labels);
  TempDir dir;
  auto cfg = toy_config();
  cfg.epochs = 0;
  {
    std::ofstream out(dir.file("vec.txt"));
    out << "码";
    for (int k = 0; k < 16; ++k) out << " 0.25";
    out << "\n龘";
    for (int k = 0; k < 16; ++k) out << " 1";
    out << "\n";
  }
  cfg.pretrained_vectors = dir.file("vec.txt");
  const auto trained = train_classifier(corpus, cfg, labels, formats);
  EXPECT_TRUE(trained.model.params.embedding.row(trained.model.vocab.id(L'码')).isConstant(0.25));
  {
    std::ofstream out(dir.file("bad.txt"));
    out << "码 1 2\n";
  }
  cfg.labels = labels.size();
  Classifier m;
  m.vocab = Vocabulary::build(corpus);
  m.params = init_params(cfg, m.vocab.size());
  EXPECT_THROW(load_char_vectors(dir.file("bad.txt"), m.vocab, m.params), ParseError);
}

// ----- vocabulary and config -----------------------------------------------------

TEST(Vocabulary, ReservedIds) {
  const Corpus c = {{L"abc1", {}}};
  for (int pad : {0, 1}) {
    const auto v = Vocabulary::build(c, pad);
    EXPECT_EQ(v.pad_id(), pad);
    EXPECT_NE(v.unk_id(), v.pad_id());
    EXPECT_EQ(v.size(), 6u);
    EXPECT_EQ(v.id(L'z'), v.unk_id());
    EXPECT_EQ(v.id(hybridtn::kPadChar), pad);
    std::set<int> ids;
    for (wchar_t ch : Text(L"abc1")) ids.insert(v.id(ch));
    EXPECT_EQ(*ids.begin(), 2);
    EXPECT_EQ(*ids.rbegin(), 5);
  }
  EXPECT_THROW(Vocabulary(2), ConfigError);
}

TEST(Config, Validation) {
  ClassifierConfig c;
  EXPECT_NO_THROW(c.validate());
  c.heads = 7;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.focal_alpha = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.focal_gamma = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(nlohmann::json({{"widnow", 30}}).get<ClassifierConfig>(), ConfigError);
  const auto loaded = load_config(hybridtn::testing::data_path("train_config.json"));
  EXPECT_EQ(loaded.window, 30u);
  EXPECT_EQ(loaded.heads, 8u);
  EXPECT_EQ(loaded.focal_alpha, 0.5);
  EXPECT_EQ(loaded.focal_gamma, 4.0);
  EXPECT_EQ(loaded.pad_id, 1);
}

TEST(Config, Overrides) {
  ClassifierConfig c;
  c.labels = 11;
  const auto o = apply_overrides(c, {{"pad_id", 0}, {"use_mask", false}});
  EXPECT_EQ(o.pad_id, 0);
  EXPECT_FALSE(o.use_mask);
  EXPECT_EQ(o.labels, 11u);
  EXPECT_EQ(o.window, c.window);
}

// ----- checkpoints -----------------------------------------------------------------

Classifier small_model() {
  const auto labels = default_labels();
  Classifier m;
  m.config = small_config(labels.size());
  m.vocab = Vocabulary::build({{L"今天是2019-10-01", {}}});
  m.params = init_params(m.config, m.vocab.size());
  m.label_names = labels.names();
  return m;
}

TEST(Checkpoint, RoundTripIsExact) {
  TempDir dir;
  const auto m = small_model();
  save_params(dir.file("m.ckpt"), m);
  const auto back = load_params(dir.file("m.ckpt"), m.config);
  EXPECT_EQ(back.label_names, m.label_names);
  EXPECT_EQ(back.vocab.chars(), m.vocab.chars());
  EXPECT_EQ(back.config.pad_id, m.config.pad_id);
  std::vector<Matrix> a, b;
  m.params.for_each([&](const std::string&, const Matrix& t) { a.push_back(t); });
  back.params.for_each([&](const std::string&, const Matrix& t) { b.push_back(t); });
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Checkpoint, WrongLabelCountIsRejected) {
  TempDir dir;
  const auto m = small_model();
  save_params(dir.file("m.ckpt"), m);
  auto expected = m.config;
  expected.labels = 10;
  EXPECT_THROW(load_params(dir.file("m.ckpt"), expected), CheckpointError);
}

TEST(Checkpoint, TruncatedAndCorruptFilesAreRejected) {
  const auto m = small_model();
  std::ostringstream out;
  write_checkpoint(out, m);
  const std::string bytes = out.str();
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1}) {
    std::istringstream in(bytes.substr(0, cut));
    EXPECT_THROW(read_checkpoint(in), CheckpointError) << cut;
  }
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::istringstream in1(bad_magic);
  EXPECT_THROW(read_checkpoint(in1), CheckpointError);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  std::istringstream in2(bad_version);
  EXPECT_THROW(read_checkpoint(in2), CheckpointError);
  std::istringstream in3(bytes + "x");
  EXPECT_THROW(read_checkpoint(in3), CheckpointError);
}

}  // namespace
}  // namespace hybridtn::neural
