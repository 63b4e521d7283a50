// Copyright 2026 The Taiyan Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "taiyan/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "taiyan/error.hpp"

namespace taiyan {

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw Error(ErrorCode::kInvalidArgument, std::string(name) + " must be >= 1");
  };
  positive(n_layers, "n_layers");
  positive(d_model, "d_model");
  positive(n_heads, "n_heads");
  positive(d_ff, "d_ff");
  positive(vocab_size, "vocab_size");
  positive(max_seq_len, "max_seq_len");
  if (d_model % n_heads != 0) {
    throw Error(ErrorCode::kInvalidArgument, "n_heads must divide d_model");
  }
}

int default_d_ff(int d_model) {
  const int raw = static_cast<int>(std::lround(8.0 * d_model / 3.0));
  return (raw + 7) / 8 * 8;
}

ModelConfig desk_preset(int vocab_size) {
  ModelConfig cfg;
  cfg.n_layers = 4;
  cfg.d_model = 128;
  cfg.n_heads = 4;
  cfg.d_ff = default_d_ff(cfg.d_model);
  cfg.vocab_size = vocab_size;
  cfg.max_seq_len = 1024;
  return cfg;
}

ModelConfig paper_scale_preset(int vocab_size, double target_params) {
  ModelConfig best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int d = 128; d <= 16384; d += 128) {
    ModelConfig cfg;
    cfg.n_layers = 52;
    cfg.d_model = d;
    cfg.n_heads = d / 128;
    cfg.d_ff = default_d_ff(d);
    cfg.vocab_size = vocab_size;
    cfg.max_seq_len = 2048;
    const double gap = std::abs(static_cast<double>(parameter_count(cfg)) - target_params);
    if (gap < best_gap) {
      best_gap = gap;
      best = cfg;
    }
  }
  return best;
}

std::int64_t parameter_count(const ModelConfig& cfg) {
  const std::int64_t d = cfg.d_model;
  const std::int64_t ff = cfg.d_ff;
  const std::int64_t per_layer = 4 * d * d + 3 * d * ff + 2 * d;
  return static_cast<std::int64_t>(cfg.vocab_size) * d + cfg.n_layers * per_layer + d;
}

std::vector<double> alibi_slopes(int n_heads) {
  std::vector<double> slopes(static_cast<std::size_t>(n_heads));
  for (int h = 1; h <= n_heads; ++h) {
    slopes[static_cast<std::size_t>(h - 1)] = std::exp2(-8.0 * h / n_heads);
  }
  return slopes;
}

AlibiBias alibi_bias(int n_heads, int seq_len) {
  if (n_heads < 1 || seq_len < 1) {
    throw Error(ErrorCode::kInvalidArgument, "alibi_bias needs n_heads, seq_len >= 1");
  }
  AlibiBias bias;
  bias.n_heads = n_heads;
  bias.seq_len = seq_len;
  bias.values.resize(static_cast<std::size_t>(n_heads) * seq_len * seq_len);
  const auto slopes = alibi_slopes(n_heads);
  auto it = bias.values.begin();
  for (int h = 0; h < n_heads; ++h) {
    for (int i = 0; i < seq_len; ++i) {
      for (int j = 0; j < seq_len; ++j) {
        *it++ = j <= i ? -slopes[static_cast<std::size_t>(h)] * (i - j)
                       : -std::numeric_limits<double>::infinity();
      }
    }
  }
  return bias;
}

// ---------------------------------------------------------------------------
// Parameters

template <typename T>
Parameters<T> Parameters<T>::zeros(const ModelConfig& cfg) {
  cfg.validate();
  const int d = cfg.d_model;
  Parameters p;
  p.token_embedding = Matrix<T>::Zero(cfg.vocab_size, d);
  p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& layer : p.layers) {
    layer.attention_norm = RowVector<T>::Zero(d);
    layer.wq = Matrix<T>::Zero(d, d);
    layer.wk = Matrix<T>::Zero(d, d);
    layer.wv = Matrix<T>::Zero(d, d);
    layer.wo = Matrix<T>::Zero(d, d);
    layer.ffn_norm = RowVector<T>::Zero(d);
    layer.w_gate = Matrix<T>::Zero(d, cfg.d_ff);
    layer.w_up = Matrix<T>::Zero(d, cfg.d_ff);
    layer.w_down = Matrix<T>::Zero(cfg.d_ff, d);
  }
  p.final_norm = RowVector<T>::Zero(d);
  return p;
}

template <typename T>
Parameters<T> Parameters<T>::initialized(const ModelConfig& cfg, std::uint64_t seed) {
  Parameters p = zeros(cfg);
  std::mt19937_64 rng(seed);
  const double base_std = 0.02;
  const double residual_std = base_std / std::sqrt(2.0 * cfg.n_layers);
  for (auto& t : named_tensors(p)) {
    if (t.shape.size() == 1) {
      std::fill(t.data.begin(), t.data.end(), T(1));
      continue;
    }
    const bool residual = t.name.ends_with(".wo") || t.name.ends_with(".w_down");
    std::normal_distribution<double> dist(0.0, residual ? residual_std : base_std);
    for (T& v : t.data) v = static_cast<T>(dist(rng));
  }
  return p;
}

template <typename T>
template <typename U>
Parameters<U> Parameters<T>::cast() const {
  Parameters<U> out;
  out.token_embedding = token_embedding.template cast<U>();
  out.layers.resize(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& s = layers[i];
    auto& d = out.layers[i];
    d.attention_norm = s.attention_norm.template cast<U>();
    d.wq = s.wq.template cast<U>();
    d.wk = s.wk.template cast<U>();
    d.wv = s.wv.template cast<U>();
    d.wo = s.wo.template cast<U>();
    d.ffn_norm = s.ffn_norm.template cast<U>();
    d.w_gate = s.w_gate.template cast<U>();
    d.w_up = s.w_up.template cast<U>();
    d.w_down = s.w_down.template cast<U>();
  }
  out.final_norm = final_norm.template cast<U>();
  return out;
}

template <typename T>
bool Parameters<T>::operator==(const Parameters& other) const {
  auto a = named_tensors(*this);
  auto b = named_tensors(other);
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].shape != b[i].shape) return false;
    if (!std::equal(a[i].data.begin(), a[i].data.end(), b[i].data.begin())) return false;
  }
  return true;
}

namespace {

template <typename V, typename M>
TensorView<V> view_of(std::string name, M& m) {
  std::vector<std::int64_t> shape;
  if constexpr (M::RowsAtCompileTime == 1) {
    shape = {static_cast<std::int64_t>(m.cols())};
  } else {
    shape = {static_cast<std::int64_t>(m.rows()), static_cast<std::int64_t>(m.cols())};
  }
  return {std::move(name), std::span<V>(m.data(), static_cast<std::size_t>(m.size())), std::move(shape)};
}

template <typename V, typename P>
std::vector<TensorView<V>> collect(P& p) {
  std::vector<TensorView<V>> out;
  out.push_back(view_of<V>("token_embedding", p.token_embedding));
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string prefix = "layers." + std::to_string(i) + ".";
    out.push_back(view_of<V>(prefix + "attention_norm", l.attention_norm));
    out.push_back(view_of<V>(prefix + "attention.wq", l.wq));
    out.push_back(view_of<V>(prefix + "attention.wk", l.wk));
    out.push_back(view_of<V>(prefix + "attention.wv", l.wv));
    out.push_back(view_of<V>(prefix + "attention.wo", l.wo));
    out.push_back(view_of<V>(prefix + "ffn_norm", l.ffn_norm));
    out.push_back(view_of<V>(prefix + "ffn.w_gate", l.w_gate));
    out.push_back(view_of<V>(prefix + "ffn.w_up", l.w_up));
    out.push_back(view_of<V>(prefix + "ffn.w_down", l.w_down));
  }
  out.push_back(view_of<V>("final_norm", p.final_norm));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

}  // namespace

template <typename T>
std::vector<TensorView<T>> named_tensors(Parameters<T>& p) {
  return collect<T>(p);
}

template <typename T>
std::vector<TensorView<const T>> named_tensors(const Parameters<T>& p) {
  return collect<const T>(p);
}

// ---------------------------------------------------------------------------
// Kernels

namespace {

template <typename T>
void rms_norm(const Matrix<T>& x, const RowVector<T>& gain, ColVector<T>& inv_rms, Matrix<T>& out) {
  const T eps = static_cast<T>(kNormEpsilon);
  inv_rms = ((x.array().square().rowwise().sum() / static_cast<T>(x.cols())) + eps).rsqrt().matrix();
  out = (x.array().colwise() * inv_rms.array()).rowwise() * gain.array();
}

// Returns dL/dx and accumulates dL/dgain.
template <typename T>
Matrix<T> rms_norm_backward(const Matrix<T>& dy, const Matrix<T>& x, const ColVector<T>& inv_rms,
                            const RowVector<T>& gain, RowVector<T>& dgain) {
  dgain += (dy.array() * (x.array().colwise() * inv_rms.array())).colwise().sum().matrix();
  const Matrix<T> dxhat = dy.array().rowwise() * gain.array();
  const ColVector<T> dot = (dxhat.array() * x.array()).rowwise().sum().matrix();
  const ColVector<T> coef = (inv_rms.array().cube() * dot.array() / static_cast<T>(x.cols())).matrix();
  return (dxhat.array().colwise() * inv_rms.array() - x.array().colwise() * coef.array()).matrix();
}

template <typename T>
T sigmoid(T z) {
  return T(1) / (T(1) + std::exp(-z));
}

template <typename T>
void swiglu_forward(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& v, Matrix<T>& gate_pre,
                    Matrix<T>& up, Matrix<T>& act) {
  gate_pre.noalias() = x * w;
  up.noalias() = x * v;
  act = gate_pre.unaryExpr([](T z) { return z * sigmoid(z); }).cwiseProduct(up);
}

template <typename T>
Matrix<T> swiglu_backward_cached(const Matrix<T>& x, const Matrix<T>& gate_pre, const Matrix<T>& up,
                                 const Matrix<T>& act, const Matrix<T>& w, const Matrix<T>& v,
                                 const Matrix<T>& w2, const Matrix<T>& dy, Matrix<T>& dw, Matrix<T>& dv,
                                 Matrix<T>& dw2) {
  dw2.noalias() += act.transpose() * dy;
  Matrix<T> dact;
  dact.noalias() = dy * w2.transpose();
  Matrix<T> dgate(gate_pre.rows(), gate_pre.cols());
  Matrix<T> dup(gate_pre.rows(), gate_pre.cols());
  for (Eigen::Index i = 0; i < gate_pre.size(); ++i) {
    const T z = gate_pre.data()[i];
    const T s = sigmoid(z);
    const T g = dact.data()[i];
    dup.data()[i] = g * z * s;
    dgate.data()[i] = g * up.data()[i] * s * (T(1) + z * (T(1) - s));
  }
  dw.noalias() += x.transpose() * dgate;
  dv.noalias() += x.transpose() * dup;
  Matrix<T> dx;
  dx.noalias() = dgate * w.transpose();
  dx.noalias() += dup * v.transpose();
  return dx;
}

// Softmax over row i restricted to columns 0..=i + offset after adding the
// ALiBi bias; columns past the causal limit are set to exactly zero.
template <typename T>
void causal_alibi_softmax(Matrix<T>& scores, int offset, double slope, Matrix<T>* raw) {
  const Eigen::Index rows = scores.rows();
  const Eigen::Index cols = scores.cols();
  if (raw != nullptr) raw->resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index limit = i + offset;  // last visible key
    T* row = scores.row(i).data();
    T max_v = -std::numeric_limits<T>::infinity();
    for (Eigen::Index j = 0; j <= limit; ++j) {
      row[j] += static_cast<T>(-slope * static_cast<double>(limit - j));
      max_v = std::max(max_v, row[j]);
    }
    if (raw != nullptr) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        (*raw)(i, j) = j <= limit ? row[j] : -std::numeric_limits<T>::infinity();
      }
    }
    T sum = 0;
    for (Eigen::Index j = 0; j <= limit; ++j) {
      row[j] = std::exp(row[j] - max_v);
      sum += row[j];
    }
    const T inv = T(1) / sum;
    for (Eigen::Index j = 0; j <= limit; ++j) row[j] *= inv;
    for (Eigen::Index j = limit + 1; j < cols; ++j) row[j] = 0;
  }
}

void check_tokens(const ModelConfig& cfg, std::span<const TokenId> tokens) {
  for (TokenId t : tokens) {
    if (t < 0 || t >= cfg.vocab_size) {
      throw Error(ErrorCode::kUnknownId, "token id " + std::to_string(t) + " outside vocabulary");
    }
  }
}

}  // namespace

template <typename T>
RowVector<T> swiglu(const RowVector<T>& x, const Matrix<T>& w, const Matrix<T>& v, const Matrix<T>& w2) {
  Matrix<T> gate_pre, up, act;
  swiglu_forward<T>(Matrix<T>(x), w, v, gate_pre, up, act);
  return act * w2;
}

template <typename T>
SwigluGrads<T> swiglu_backward(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& v,
                               const Matrix<T>& w2, const Matrix<T>& dy) {
  Matrix<T> gate_pre, up, act;
  swiglu_forward<T>(x, w, v, gate_pre, up, act);
  SwigluGrads<T> g;
  g.dw = Matrix<T>::Zero(w.rows(), w.cols());
  g.dv = Matrix<T>::Zero(v.rows(), v.cols());
  g.dw2 = Matrix<T>::Zero(w2.rows(), w2.cols());
  g.dx = swiglu_backward_cached<T>(x, gate_pre, up, act, w, v, w2, dy, g.dw, g.dv, g.dw2);
  return g;
}

// ---------------------------------------------------------------------------
// Forward / backward

template <typename T>
void forward_batch(const Parameters<T>& p, const ModelConfig& cfg, std::span<const TokenId> tokens,
                   int batch, ForwardCache<T>& cache, bool record_scores) {
  if (batch < 1 || tokens.size() % static_cast<std::size_t>(batch) != 0) {
    throw Error(ErrorCode::kInvalidArgument, "token count is not a multiple of the batch size");
  }
  const int seq = static_cast<int>(tokens.size() / static_cast<std::size_t>(batch));
  if (seq > cfg.max_seq_len) {
    throw Error(ErrorCode::kSequenceTooLong,
                std::to_string(seq) + " > max_seq_len " + std::to_string(cfg.max_seq_len));
  }
  check_tokens(cfg, tokens);

  const int n = batch * seq;
  const int d = cfg.d_model;
  const int heads = cfg.n_heads;
  const int hd = cfg.head_dim();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));
  const auto slopes = alibi_slopes(heads);

  cache.batch = batch;
  cache.seq_len = seq;
  cache.tokens.assign(tokens.begin(), tokens.end());
  cache.layers.resize(p.layers.size());

  Matrix<T> x(n, d);
  for (int r = 0; r < n; ++r) x.row(r) = p.token_embedding.row(tokens[static_cast<std::size_t>(r)]);

  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& w = p.layers[l];
    auto& lc = cache.layers[l];
    lc.x_in = std::move(x);
    rms_norm<T>(lc.x_in, w.attention_norm, lc.inv_rms_attn, lc.h_attn);
    lc.q.noalias() = lc.h_attn * w.wq;
    lc.k.noalias() = lc.h_attn * w.wk;
    lc.v.noalias() = lc.h_attn * w.wv;
    lc.attn_out.resize(n, d);
    lc.probs.resize(static_cast<std::size_t>(batch * heads));
    lc.scores.clear();
    if (record_scores) lc.scores.resize(static_cast<std::size_t>(batch * heads));
    for (int b = 0; b < batch; ++b) {
      for (int h = 0; h < heads; ++h) {
        const auto idx = static_cast<std::size_t>(b * heads + h);
        Matrix<T>& probs = lc.probs[idx];
        probs.noalias() = lc.q.block(b * seq, h * hd, seq, hd) * lc.k.block(b * seq, h * hd, seq, hd).transpose();
        probs *= scale;
        causal_alibi_softmax<T>(probs, 0, slopes[static_cast<std::size_t>(h)],
                                record_scores ? &lc.scores[idx] : nullptr);
        lc.attn_out.block(b * seq, h * hd, seq, hd).noalias() = probs * lc.v.block(b * seq, h * hd, seq, hd);
      }
    }
    lc.x_mid = lc.x_in;
    lc.x_mid.noalias() += lc.attn_out * w.wo;
    rms_norm<T>(lc.x_mid, w.ffn_norm, lc.inv_rms_ffn, lc.h_ffn);
    swiglu_forward<T>(lc.h_ffn, w.w_gate, w.w_up, lc.gate_pre, lc.up, lc.act);
    x = lc.x_mid;
    x.noalias() += lc.act * w.w_down;
  }
  cache.x_final = std::move(x);
  rms_norm<T>(cache.x_final, p.final_norm, cache.inv_rms_final, cache.h_final);
  cache.logits.noalias() = cache.h_final * p.token_embedding.transpose();
}

template <typename T>
void backward(const Parameters<T>& p, const ModelConfig& cfg, const ForwardCache<T>& cache,
              const Matrix<T>& dlogits, Parameters<T>& grads) {
  const int batch = cache.batch;
  const int seq = cache.seq_len;
  const int heads = cfg.n_heads;
  const int hd = cfg.head_dim();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));

  grads.token_embedding.noalias() += dlogits.transpose() * cache.h_final;
  Matrix<T> dh;
  dh.noalias() = dlogits * p.token_embedding;
  Matrix<T> dx = rms_norm_backward<T>(dh, cache.x_final, cache.inv_rms_final, p.final_norm, grads.final_norm);

  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const auto& w = p.layers[li];
    auto& g = grads.layers[li];
    const auto& lc = cache.layers[li];

    const Matrix<T> dh_ffn = swiglu_backward_cached<T>(lc.h_ffn, lc.gate_pre, lc.up, lc.act, w.w_gate, w.w_up,
                                                       w.w_down, dx, g.w_gate, g.w_up, g.w_down);
    Matrix<T> dx_mid = dx + rms_norm_backward<T>(dh_ffn, lc.x_mid, lc.inv_rms_ffn, w.ffn_norm, g.ffn_norm);

    g.wo.noalias() += lc.attn_out.transpose() * dx_mid;
    Matrix<T> dattn;
    dattn.noalias() = dx_mid * w.wo.transpose();

    Matrix<T> dq(lc.q.rows(), lc.q.cols());
    Matrix<T> dk(lc.k.rows(), lc.k.cols());
    Matrix<T> dv(lc.v.rows(), lc.v.cols());
    Matrix<T> dprobs, dscores;
    for (int b = 0; b < batch; ++b) {
      for (int h = 0; h < heads; ++h) {
        const Matrix<T>& probs = lc.probs[static_cast<std::size_t>(b * heads + h)];
        const auto dout = dattn.block(b * seq, h * hd, seq, hd);
        dprobs.noalias() = dout * lc.v.block(b * seq, h * hd, seq, hd).transpose();
        dv.block(b * seq, h * hd, seq, hd).noalias() = probs.transpose() * dout;
        const ColVector<T> row_dot = (dprobs.array() * probs.array()).rowwise().sum().matrix();
        dscores = (probs.array() * (dprobs.array().colwise() - row_dot.array())).matrix() * scale;
        dq.block(b * seq, h * hd, seq, hd).noalias() = dscores * lc.k.block(b * seq, h * hd, seq, hd);
        dk.block(b * seq, h * hd, seq, hd).noalias() = dscores.transpose() * lc.q.block(b * seq, h * hd, seq, hd);
      }
    }
    g.wq.noalias() += lc.h_attn.transpose() * dq;
    g.wk.noalias() += lc.h_attn.transpose() * dk;
    g.wv.noalias() += lc.h_attn.transpose() * dv;
    Matrix<T> dh_attn;
    dh_attn.noalias() = dq * w.wq.transpose();
    dh_attn.noalias() += dk * w.wk.transpose();
    dh_attn.noalias() += dv * w.wv.transpose();
    dx = dx_mid + rms_norm_backward<T>(dh_attn, lc.x_in, lc.inv_rms_attn, w.attention_norm, g.attention_norm);
  }
  for (std::size_t r = 0; r < cache.tokens.size(); ++r) {
    grads.token_embedding.row(cache.tokens[r]) += dx.row(static_cast<Eigen::Index>(r));
  }
}

template <typename T>
Matrix<T> forward(const Parameters<T>& p, const ModelConfig& cfg, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw Error(ErrorCode::kEmptyInput, "forward needs at least one token");
  ForwardCache<T> cache;
  forward_batch(p, cfg, tokens, 1, cache);
  return std::move(cache.logits);
}

// ---------------------------------------------------------------------------
// Incremental inference

template <typename T>
InferenceSession<T>::InferenceSession(const Parameters<T>& p, const ModelConfig& cfg)
    : params_(p), cfg_(cfg), slopes_(alibi_slopes(cfg.n_heads)) {
  cfg_.validate();
  keys_.resize(p.layers.size());
  values_.resize(p.layers.size());
}

template <typename T>
RowVector<T> InferenceSession<T>::feed(std::span<const TokenId> tokens) {
  if (tokens.empty()) throw Error(ErrorCode::kEmptyInput, "feed needs at least one token");
  const int n = static_cast<int>(tokens.size());
  const int total = position_ + n;
  if (total > cfg_.max_seq_len) {
    throw Error(ErrorCode::kSequenceTooLong,
                std::to_string(total) + " > max_seq_len " + std::to_string(cfg_.max_seq_len));
  }
  check_tokens(cfg_, tokens);
  const int d = cfg_.d_model;
  const int hd = cfg_.head_dim();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));

  Matrix<T> x(n, d);
  for (int r = 0; r < n; ++r) x.row(r) = params_.token_embedding.row(tokens[static_cast<std::size_t>(r)]);

  ColVector<T> inv_rms;
  Matrix<T> h, q, k, v, attn(n, d), scores, gate_pre, up, act;
  for (std::size_t l = 0; l < params_.layers.size(); ++l) {
    const auto& w = params_.layers[l];
    auto& keys = keys_[l];
    auto& values = values_[l];
    if (keys.rows() < total) {
      const Eigen::Index cap = std::min<Eigen::Index>(cfg_.max_seq_len, std::max<Eigen::Index>(2 * keys.rows(), std::max(total, 64)));
      keys.conservativeResize(cap, d);
      values.conservativeResize(cap, d);
    }
    rms_norm<T>(x, w.attention_norm, inv_rms, h);
    q.noalias() = h * w.wq;
    keys.block(position_, 0, n, d).noalias() = h * w.wk;
    values.block(position_, 0, n, d).noalias() = h * w.wv;
    for (int head = 0; head < cfg_.n_heads; ++head) {
      scores.noalias() = q.block(0, head * hd, n, hd) * keys.block(0, head * hd, total, hd).transpose();
      scores *= scale;
      causal_alibi_softmax<T>(scores, position_, slopes_[static_cast<std::size_t>(head)], nullptr);
      attn.block(0, head * hd, n, hd).noalias() = scores * values.block(0, head * hd, total, hd);
    }
    x.noalias() += attn * w.wo;
    rms_norm<T>(x, w.ffn_norm, inv_rms, h);
    swiglu_forward<T>(h, w.w_gate, w.w_up, gate_pre, up, act);
    x.noalias() += act * w.w_down;
  }
  position_ = total;
  Matrix<T> last = x.row(n - 1);
  rms_norm<T>(last, params_.final_norm, inv_rms, h);
  return h * params_.token_embedding.transpose();
}

template <typename T>
std::vector<TokenId> generate(const Parameters<T>& p, const ModelConfig& cfg, std::span<const TokenId> prompt,
                              int max_new, const MaskFn& mask_fn) {
  if (prompt.empty()) throw Error(ErrorCode::kEmptyInput, "generate needs a nonempty prompt");
  InferenceSession<T> session(p, cfg);
  RowVector<T> logits = session.feed(prompt);
  std::vector<TokenId> out;
  for (int step = 0; step < max_new; ++step) {
    TokenId best = -1;
    T best_value = -std::numeric_limits<T>::infinity();
    auto consider = [&](TokenId id) {
      if (id < 0 || id >= cfg.vocab_size) {
        throw Error(ErrorCode::kUnknownId, "mask allows token " + std::to_string(id) + " outside vocabulary");
      }
      const T value = logits(id);
      if (best < 0 || value > best_value || (value == best_value && id < best)) {
        best = id;
        best_value = value;
      }
    };
    if (mask_fn) {
      const auto allowed = mask_fn(out);
      if (allowed.empty()) throw Error(ErrorCode::kEmptyMask, "mask allows no token at step " + std::to_string(step));
      for (TokenId id : allowed) consider(id);
    } else {
      for (TokenId id = 0; id < cfg.vocab_size; ++id) consider(id);
    }
    out.push_back(best);
    if (best == kEos || step + 1 == max_new) break;
    const TokenId next[] = {best};
    logits = session.feed(next);
  }
  return out;
}

#define TAIYAN_INSTANTIATE(T)                                                                                   \
  template struct Parameters<T>;                                                                                \
  template std::vector<TensorView<T>> named_tensors(Parameters<T>&);                                            \
  template std::vector<TensorView<const T>> named_tensors(const Parameters<T>&);                                \
  template RowVector<T> swiglu(const RowVector<T>&, const Matrix<T>&, const Matrix<T>&, const Matrix<T>&);      \
  template SwigluGrads<T> swiglu_backward(const Matrix<T>&, const Matrix<T>&, const Matrix<T>&,                 \
                                          const Matrix<T>&, const Matrix<T>&);                                  \
  template void forward_batch(const Parameters<T>&, const ModelConfig&, std::span<const TokenId>, int,          \
                              ForwardCache<T>&, bool);                                                          \
  template void backward(const Parameters<T>&, const ModelConfig&, const ForwardCache<T>&, const Matrix<T>&,    \
                         Parameters<T>&);                                                                       \
  template Matrix<T> forward(const Parameters<T>&, const ModelConfig&, std::span<const TokenId>);               \
  template class InferenceSession<T>;                                                                           \
  template std::vector<TokenId> generate(const Parameters<T>&, const ModelConfig&, std::span<const TokenId>,    \
                                         int, const MaskFn&);

TAIYAN_INSTANTIATE(float)
TAIYAN_INSTANTIATE(double)
#undef TAIYAN_INSTANTIATE

template Parameters<double> Parameters<float>::cast<double>() const;
template Parameters<float> Parameters<double>::cast<float>() const;
template Parameters<float> Parameters<float>::cast<float>() const;
template Parameters<double> Parameters<double>::cast<double>() const;

}  // namespace taiyan
