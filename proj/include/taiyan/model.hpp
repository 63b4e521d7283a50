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

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "taiyan/vocab.hpp"

namespace taiyan {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using ColVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

inline constexpr double kNormEpsilon = 1e-5;

struct ModelConfig {
  int n_layers = 4;
  int d_model = 128;
  int n_heads = 4;
  int d_ff = 344;
  int vocab_size = 0;
  int max_seq_len = 1024;

  int head_dim() const { return d_model / n_heads; }
  // Throws kInvalidArgument.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// round(8/3 * d_model), rounded up to a multiple of 8.
int default_d_ff(int d_model);

// 4 layers, d_model 128, 4 heads.
ModelConfig desk_preset(int vocab_size);

// 52 layers; d_model is the multiple of 64 whose parameter count lands
// closest to target_params (1.8B by default).
ModelConfig paper_scale_preset(int vocab_size, double target_params = 1.8e9);

std::int64_t parameter_count(const ModelConfig& cfg);

// slope_h = 2^(-8h/n_heads), h = 1..n_heads.
std::vector<double> alibi_slopes(int n_heads);

// Dense [n_heads x seq_len x seq_len] bias: -slope_h * (i - j) on and below
// the diagonal, -infinity above it.
struct AlibiBias {
  int n_heads = 0;
  int seq_len = 0;
  std::vector<double> values;

  double at(int head, int i, int j) const {
    return values[(static_cast<std::size_t>(head) * seq_len + i) * seq_len + j];
  }
};
AlibiBias alibi_bias(int n_heads, int seq_len);

template <typename T>
struct LayerParameters {
  RowVector<T> attention_norm;
  Matrix<T> wq, wk, wv, wo;  // [d_model x d_model]
  RowVector<T> ffn_norm;
  Matrix<T> w_gate;  // W  [d_model x d_ff]
  Matrix<T> w_up;    // V  [d_model x d_ff]
  Matrix<T> w_down;  // W2 [d_ff x d_model]
};

// The output projection is the transpose of token_embedding; there is no
// positional table.
template <typename T>
struct Parameters {
  Matrix<T> token_embedding;  // [vocab_size x d_model]
  std::vector<LayerParameters<T>> layers;
  RowVector<T> final_norm;

  static Parameters zeros(const ModelConfig& cfg);
  // Normal(0, 0.02); wo and w_down use 0.02 / sqrt(2 * n_layers). Gains are 1.
  static Parameters initialized(const ModelConfig& cfg, std::uint64_t seed);

  template <typename U>
  Parameters<U> cast() const;

  bool operator==(const Parameters& other) const;
};

template <typename T>
struct TensorView {
  std::string name;
  std::span<T> data;
  std::vector<std::int64_t> shape;
};

// Sorted by name.
template <typename T>
std::vector<TensorView<T>> named_tensors(Parameters<T>& p);
template <typename T>
std::vector<TensorView<const T>> named_tensors(const Parameters<T>& p);

// Row-vector convention: returns (silu(x W) * (x V)) W2.
template <typename T>
RowVector<T> swiglu(const RowVector<T>& x, const Matrix<T>& w, const Matrix<T>& v, const Matrix<T>& w2);

template <typename T>
struct SwigluGrads {
  Matrix<T> dx, dw, dv, dw2;
};

// Vector-Jacobian product of swiglu for a batch of rows x [n x d_model].
template <typename T>
SwigluGrads<T> swiglu_backward(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& v,
                               const Matrix<T>& w2, const Matrix<T>& dy);

template <typename T>
struct LayerCache {
  Matrix<T> x_in;
  ColVector<T> inv_rms_attn;
  Matrix<T> h_attn;
  Matrix<T> q, k, v;
  std::vector<Matrix<T>> probs;   // batch * n_heads, each [seq x seq]
  std::vector<Matrix<T>> scores;  // pre-softmax logits, only when recorded
  Matrix<T> attn_out;
  Matrix<T> x_mid;
  ColVector<T> inv_rms_ffn;
  Matrix<T> h_ffn;
  Matrix<T> gate_pre, up, act;
};

template <typename T>
struct ForwardCache {
  int batch = 0;
  int seq_len = 0;
  std::vector<TokenId> tokens;
  std::vector<LayerCache<T>> layers;
  Matrix<T> x_final;
  ColVector<T> inv_rms_final;
  Matrix<T> h_final;
  Matrix<T> logits;  // [batch * seq_len x vocab_size]
};

// tokens is row-major [batch x seq_len]. Throws kSequenceTooLong and
// kUnknownId.
template <typename T>
void forward_batch(const Parameters<T>& p, const ModelConfig& cfg, std::span<const TokenId> tokens,
                   int batch, ForwardCache<T>& cache, bool record_scores = false);

// Accumulates parameter gradients for the given dL/dlogits into grads.
template <typename T>
void backward(const Parameters<T>& p, const ModelConfig& cfg, const ForwardCache<T>& cache,
              const Matrix<T>& dlogits, Parameters<T>& grads);

// Logits [len x vocab_size] for a single sequence.
template <typename T>
Matrix<T> forward(const Parameters<T>& p, const ModelConfig& cfg, std::span<const TokenId> tokens);

// Incremental decoding with a key/value cache.
template <typename T>
class InferenceSession {
 public:
  InferenceSession(const Parameters<T>& p, const ModelConfig& cfg);

  // Appends tokens and returns logits of the last appended position.
  RowVector<T> feed(std::span<const TokenId> tokens);
  int position() const { return position_; }

 private:
  const Parameters<T>& params_;
  ModelConfig cfg_;
  std::vector<double> slopes_;
  std::vector<Matrix<T>> keys_;
  std::vector<Matrix<T>> values_;
  int position_ = 0;
};

// Called before each step with the tokens generated so far; returns the
// allowed next tokens.
using MaskFn = std::function<std::vector<TokenId>(std::span<const TokenId> generated)>;

// Greedy argmax, ties to the lowest id. The returned sequence includes the
// terminating EOS when one was produced. Throws kEmptyMask.
template <typename T>
std::vector<TokenId> generate(const Parameters<T>& p, const ModelConfig& cfg,
                              std::span<const TokenId> prompt, int max_new, const MaskFn& mask_fn = {});

}  // namespace taiyan
