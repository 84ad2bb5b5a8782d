#pragma once

// One transformer-encoder block over a character window, followed by mean
// pooling over the NSW positions and a linear classifier with a masked
// softmax. Forward and backward passes are written out by hand.
//
//   X0 = E[ids] + P
//   per head h: A_h = softmax(X0 Q_h (X0 K_h)^T / sqrt(D/H) + pad_mask), H_h = A_h X0 V_h
//   N1 = LN1(X0 + concat(H_h) O)
//   N2 = LN2(N1 + relu(N1 W1 + b1) W2 + b2)
//   u  = mean of N2 over NSW positions
//   p  = masked_softmax(u C + c)

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridtn/error.hpp"
#include "hybridtn/legality.hpp"
#include "hybridtn/neural/config.hpp"
#include "hybridtn/random.hpp"

namespace hybridtn::neural {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

inline constexpr double kAttentionMaskValue = -1e9;
inline constexpr double kLayerNormEpsilon = 1e-5;

struct EncoderParams {
  Matrix embedding;  // V x D
  Matrix position;   // W x D
  std::vector<Matrix> query, key, value;  // H of D x D/H
  Matrix output;     // D x D
  Matrix ff1, ff1_bias, ff2, ff2_bias;    // D x F, 1 x F, F x D, 1 x D
  Matrix norm1_scale, norm1_shift, norm2_scale, norm2_shift;  // 1 x D
  Matrix classifier, classifier_bias;     // D x L, 1 x L

  // Visits every tensor in a fixed order with a stable name.
  template <typename Params, typename Fn>
  static void visit(Params& p, Fn&& fn) {
    fn(std::string("embedding"), p.embedding);
    fn(std::string("position"), p.position);
    for (std::size_t h = 0; h < p.query.size(); ++h) {
      fn("query." + std::to_string(h), p.query[h]);
      fn("key." + std::to_string(h), p.key[h]);
      fn("value." + std::to_string(h), p.value[h]);
    }
    fn(std::string("output"), p.output);
    fn(std::string("ff1"), p.ff1);
    fn(std::string("ff1_bias"), p.ff1_bias);
    fn(std::string("ff2"), p.ff2);
    fn(std::string("ff2_bias"), p.ff2_bias);
    fn(std::string("norm1_scale"), p.norm1_scale);
    fn(std::string("norm1_shift"), p.norm1_shift);
    fn(std::string("norm2_scale"), p.norm2_scale);
    fn(std::string("norm2_shift"), p.norm2_shift);
    fn(std::string("classifier"), p.classifier);
    fn(std::string("classifier_bias"), p.classifier_bias);
  }
  template <typename Fn>
  void for_each(Fn&& fn) { visit(*this, std::forward<Fn>(fn)); }
  template <typename Fn>
  void for_each(Fn&& fn) const { visit(*this, std::forward<Fn>(fn)); }

  // Same shapes, all zeros.
  EncoderParams zeros_like() const {
    EncoderParams z = *this;
    z.for_each([](const std::string&, Matrix& m) { m.setZero(); });
    return z;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
    return ok;
  }

  void check_shapes(const ClassifierConfig& c, std::size_t vocab) const {
    const auto D = static_cast<Eigen::Index>(c.d_model);
    const auto F = static_cast<Eigen::Index>(c.d_ff);
    const auto L = static_cast<Eigen::Index>(c.labels);
    const auto dk = static_cast<Eigen::Index>(c.head_dim());
    const auto expect = [](const Matrix& m, Eigen::Index r, Eigen::Index cols, const char* name) {
      if (m.rows() != r || m.cols() != cols) {
        throw ValidationError(std::string("tensor '") + name + "' has shape " +
                              std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                              ", expected " + std::to_string(r) + "x" + std::to_string(cols));
      }
    };
    expect(embedding, static_cast<Eigen::Index>(vocab), D, "embedding");
    expect(position, static_cast<Eigen::Index>(c.window), D, "position");
    if (query.size() != c.heads || key.size() != c.heads || value.size() != c.heads) {
      throw ValidationError("head count mismatch");
    }
    for (std::size_t h = 0; h < c.heads; ++h) {
      expect(query[h], D, dk, "query");
      expect(key[h], D, dk, "key");
      expect(value[h], D, dk, "value");
    }
    expect(output, D, D, "output");
    expect(ff1, D, F, "ff1");
    expect(ff1_bias, 1, F, "ff1_bias");
    expect(ff2, F, D, "ff2");
    expect(ff2_bias, 1, D, "ff2_bias");
    expect(norm1_scale, 1, D, "norm1_scale");
    expect(norm1_shift, 1, D, "norm1_shift");
    expect(norm2_scale, 1, D, "norm2_scale");
    expect(norm2_shift, 1, D, "norm2_shift");
    expect(classifier, D, L, "classifier");
    expect(classifier_bias, 1, L, "classifier_bias");
  }
};

namespace detail {

inline Matrix uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double limit) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * uniform01(rng) - 1.0) * limit;
  return m;
}

inline double xavier(Eigen::Index fan_in, Eigen::Index fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace detail

// Scaled-uniform initialization: projection matrices U(-a, a) with
// a = sqrt(6 / (fan_in + fan_out)); embedding and position tables
// U(-1/sqrt(D), 1/sqrt(D)); biases and shifts 0; layer-norm scales 1.
inline EncoderParams init_params(const ClassifierConfig& c, std::size_t vocab_size) {
  c.validate();
  if (c.labels == 0) throw ConfigError("label count must be positive");
  Rng rng(c.seed);
  const auto D = static_cast<Eigen::Index>(c.d_model);
  const auto F = static_cast<Eigen::Index>(c.d_ff);
  const auto L = static_cast<Eigen::Index>(c.labels);
  const auto dk = static_cast<Eigen::Index>(c.head_dim());
  const double emb = 1.0 / std::sqrt(static_cast<double>(D));
  EncoderParams p;
  p.embedding = detail::uniform_matrix(rng, static_cast<Eigen::Index>(vocab_size), D, emb);
  p.position = detail::uniform_matrix(rng, static_cast<Eigen::Index>(c.window), D, emb);
  for (std::size_t h = 0; h < c.heads; ++h) {
    p.query.push_back(detail::uniform_matrix(rng, D, dk, detail::xavier(D, dk)));
    p.key.push_back(detail::uniform_matrix(rng, D, dk, detail::xavier(D, dk)));
    p.value.push_back(detail::uniform_matrix(rng, D, dk, detail::xavier(D, dk)));
  }
  p.output = detail::uniform_matrix(rng, D, D, detail::xavier(D, D));
  p.ff1 = detail::uniform_matrix(rng, D, F, detail::xavier(D, F));
  p.ff1_bias = Matrix::Zero(1, F);
  p.ff2 = detail::uniform_matrix(rng, F, D, detail::xavier(F, D));
  p.ff2_bias = Matrix::Zero(1, D);
  p.norm1_scale = Matrix::Ones(1, D);
  p.norm1_shift = Matrix::Zero(1, D);
  p.norm2_scale = Matrix::Ones(1, D);
  p.norm2_shift = Matrix::Zero(1, D);
  p.classifier = detail::uniform_matrix(rng, D, L, detail::xavier(D, L));
  p.classifier_bias = Matrix::Zero(1, L);
  return p;
}

// Probabilities with exact zeros on illegal entries; legal entries sum to 1.
inline RowVector masked_softmax(const RowVector& logits, const LabelMask& legal) {
  if (static_cast<std::size_t>(logits.size()) != legal.size()) {
    throw ValidationError("mask size does not match logits");
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    if (legal[static_cast<std::size_t>(j)]) mx = std::max(mx, logits[j]);
  }
  if (mx == -std::numeric_limits<double>::infinity()) {
    throw ValidationError("masked softmax needs at least one legal label");
  }
  RowVector p = RowVector::Zero(logits.size());
  double sum = 0;
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    if (!legal[static_cast<std::size_t>(j)]) continue;
    p[j] = std::exp(logits[j] - mx);
    sum += p[j];
  }
  p /= sum;
  return p;
}

// Input of one forward pass.
struct EncodedWindow {
  std::vector<int> ids;
  std::vector<bool> nsw_mask;
  std::vector<bool> pad_mask;
};

struct LayerNormCache {
  Matrix normalized;         // x-hat
  Eigen::VectorXd inv_std;   // per row
};

struct ForwardCache {
  Matrix x0;
  std::vector<Eigen::Index> rows;  // query positions carried through the block
  Matrix xq;                       // x0 restricted to `rows`
  std::vector<Matrix> q, k, v, attn;
  Matrix heads, r1, n1, hidden_pre, hidden, n2;
  LayerNormCache ln1, ln2;
  RowVector pooled, logits;
  std::size_t nsw_count = 0;
};

namespace detail {

inline Matrix layer_norm(const Matrix& x, const Matrix& scale, const Matrix& shift,
                         LayerNormCache& cache) {
  const auto n = x.rows();
  const auto d = static_cast<double>(x.cols());
  cache.normalized.resize(n, x.cols());
  cache.inv_std.resize(n);
  Matrix y(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).sum() / d;
    const RowVector centered = x.row(i).array() - mu;
    const double var = centered.squaredNorm() / d;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    cache.inv_std[i] = inv;
    cache.normalized.row(i) = centered * inv;
    y.row(i) = cache.normalized.row(i).cwiseProduct(scale.row(0)) + shift.row(0);
  }
  return y;
}

inline Matrix layer_norm_backward(const Matrix& dy, const Matrix& scale,
                                  const LayerNormCache& cache, Matrix& dscale, Matrix& dshift) {
  const auto d = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const RowVector xhat = cache.normalized.row(i);
    dscale.row(0) += dy.row(i).cwiseProduct(xhat);
    dshift.row(0) += dy.row(i);
    const RowVector dxhat = dy.row(i).cwiseProduct(scale.row(0));
    const double mean_dxhat = dxhat.sum() / d;
    const double mean_dxhat_xhat = dxhat.dot(xhat) / d;
    dx.row(i) = cache.inv_std[i] *
                (dxhat.array() - mean_dxhat - xhat.array() * mean_dxhat_xhat).matrix();
  }
  return dx;
}

}  // namespace detail

inline Matrix embed(const EncoderParams& p, const std::vector<int>& ids) {
  const auto W = static_cast<Eigen::Index>(ids.size());
  if (W != p.position.rows()) throw ValidationError("window length does not match position table");
  Matrix x(W, p.embedding.cols());
  for (Eigen::Index i = 0; i < W; ++i) {
    const int id = ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= p.embedding.rows()) throw ValidationError("token id out of range");
    x.row(i) = p.embedding.row(id) + p.position.row(i);
  }
  return x;
}

// Multi-head self-attention sub-block followed by the feed-forward
// sub-block, each with residual connection and layer normalization. Keys and
// values cover every position; outputs are computed only for the query
// positions in `rows`, which is all the pooled classifier ever reads.
inline Matrix encoder_block(const EncoderParams& p, const Matrix& x0,
                            const std::vector<bool>& pad_mask,
                            const std::vector<Eigen::Index>& rows, ForwardCache& cache) {
  const auto W = x0.rows();
  const auto n = static_cast<Eigen::Index>(rows.size());
  const std::size_t H = p.query.size();
  const auto dk = p.query.front().cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  cache.x0 = x0;
  cache.rows = rows;
  cache.xq = x0(rows, Eigen::all);
  cache.q.resize(H);
  cache.k.resize(H);
  cache.v.resize(H);
  cache.attn.resize(H);
  cache.heads.resize(n, x0.cols());
  for (std::size_t h = 0; h < H; ++h) {
    cache.q[h].noalias() = cache.xq * p.query[h];
    cache.k[h].noalias() = x0 * p.key[h];
    cache.v[h].noalias() = x0 * p.value[h];
    Matrix s = (cache.q[h] * cache.k[h].transpose()) * scale;
    for (Eigen::Index j = 0; j < W; ++j) {
      if (pad_mask[static_cast<std::size_t>(j)]) s.col(j).array() += kAttentionMaskValue;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mx = s.row(i).maxCoeff();
      s.row(i) = (s.row(i).array() - mx).exp();
    }
    // Vectorized exp clamps its argument and leaves subnormals on masked
    // columns; those are far slower to multiply than exact zeros.
    for (Eigen::Index j = 0; j < W; ++j) {
      if (pad_mask[static_cast<std::size_t>(j)]) s.col(j).setZero();
    }
    for (Eigen::Index i = 0; i < n; ++i) s.row(i) /= s.row(i).sum();
    cache.attn[h] = std::move(s);
    cache.heads.middleCols(static_cast<Eigen::Index>(h) * dk, dk).noalias() =
        cache.attn[h] * cache.v[h];
  }
  cache.r1 = cache.xq;
  cache.r1.noalias() += cache.heads * p.output;
  cache.n1 = detail::layer_norm(cache.r1, p.norm1_scale, p.norm1_shift, cache.ln1);
  cache.hidden_pre = cache.n1 * p.ff1;
  cache.hidden_pre.rowwise() += p.ff1_bias.row(0);
  cache.hidden = cache.hidden_pre.cwiseMax(0.0);
  Matrix r2 = cache.n1;
  r2.noalias() += cache.hidden * p.ff2;
  r2.rowwise() += p.ff2_bias.row(0);
  cache.n2 = detail::layer_norm(r2, p.norm2_scale, p.norm2_shift, cache.ln2);
  return cache.n2;
}

inline std::vector<Eigen::Index> all_rows(Eigen::Index n) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

// Full block output, one row per position.
inline Matrix encoder_block(const EncoderParams& p, const Matrix& x0,
                            const std::vector<bool>& pad_mask, ForwardCache& cache) {
  return encoder_block(p, x0, pad_mask, all_rows(x0.rows()), cache);
}

// Attention weights of every head for one input, rows over query positions.
inline std::vector<Matrix> attention_weights(const EncoderParams& p, const Matrix& x0,
                                             const std::vector<bool>& pad_mask) {
  ForwardCache cache;
  encoder_block(p, x0, pad_mask, cache);
  return cache.attn;
}

// Logits for one window.
inline RowVector forward(const EncoderParams& p, const EncodedWindow& in, ForwardCache& cache) {
  const Matrix x0 = embed(p, in.ids);
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < in.nsw_mask.size(); ++i) {
    if (in.nsw_mask[i]) rows.push_back(static_cast<Eigen::Index>(i));
  }
  if (rows.empty()) throw ValidationError("window has no NSW positions");
  const Matrix& n2 = encoder_block(p, x0, in.pad_mask, rows, cache);
  cache.nsw_count = rows.size();
  cache.pooled = n2.colwise().mean();
  cache.logits = cache.pooled * p.classifier + p.classifier_bias;
  return cache.logits;
}

// Accumulates parameter gradients of a scalar loss into `grad` given
// d loss / d logits.
inline void backward(const EncoderParams& p, const EncodedWindow& in, const ForwardCache& cache,
                     const RowVector& dlogits, EncoderParams& grad) {
  const auto W = cache.x0.rows();
  const auto n = static_cast<Eigen::Index>(cache.rows.size());
  const std::size_t H = p.query.size();
  const auto dk = p.query.front().cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  grad.classifier.noalias() += cache.pooled.transpose() * dlogits;
  grad.classifier_bias.row(0) += dlogits;
  const RowVector dpooled = dlogits * p.classifier.transpose();

  const Matrix dn2 = dpooled.replicate(n, 1) / static_cast<double>(n);
  const Matrix dr2 = detail::layer_norm_backward(dn2, p.norm2_scale, cache.ln2,
                                                 grad.norm2_scale, grad.norm2_shift);
  grad.ff2.noalias() += cache.hidden.transpose() * dr2;
  grad.ff2_bias.row(0) += dr2.colwise().sum();
  Matrix dhidden = dr2 * p.ff2.transpose();
  dhidden = dhidden.cwiseProduct((cache.hidden_pre.array() > 0.0).cast<double>().matrix());
  grad.ff1.noalias() += cache.n1.transpose() * dhidden;
  grad.ff1_bias.row(0) += dhidden.colwise().sum();
  Matrix dn1 = dr2;
  dn1.noalias() += dhidden * p.ff1.transpose();
  const Matrix dr1 = detail::layer_norm_backward(dn1, p.norm1_scale, cache.ln1,
                                                 grad.norm1_scale, grad.norm1_shift);
  Matrix dxq = dr1;  // residual path into the query rows
  Matrix dx0 = Matrix::Zero(W, cache.x0.cols());
  grad.output.noalias() += cache.heads.transpose() * dr1;
  const Matrix dheads = dr1 * p.output.transpose();
  for (std::size_t h = 0; h < H; ++h) {
    const Matrix dh = dheads.middleCols(static_cast<Eigen::Index>(h) * dk, dk);
    const Matrix& a = cache.attn[h];
    const Matrix da = dh * cache.v[h].transpose();
    const Matrix dv = a.transpose() * dh;
    Matrix ds = a.cwiseProduct(da);
    const Eigen::VectorXd row_dot = ds.rowwise().sum();
    ds -= a.cwiseProduct(row_dot.replicate(1, W));
    ds *= scale;
    const Matrix dq = ds * cache.k[h];
    const Matrix dkm = ds.transpose() * cache.q[h];
    grad.query[h].noalias() += cache.xq.transpose() * dq;
    grad.key[h].noalias() += cache.x0.transpose() * dkm;
    grad.value[h].noalias() += cache.x0.transpose() * dv;
    dxq.noalias() += dq * p.query[h].transpose();
    dx0.noalias() += dkm * p.key[h].transpose();
    dx0.noalias() += dv * p.value[h].transpose();
  }
  for (Eigen::Index i = 0; i < n; ++i) dx0.row(cache.rows[static_cast<std::size_t>(i)]) += dxq.row(i);
  grad.position += dx0;
  for (Eigen::Index i = 0; i < W; ++i) {
    grad.embedding.row(in.ids[static_cast<std::size_t>(i)]) += dx0.row(i);
  }
}

}  // namespace hybridtn::neural
