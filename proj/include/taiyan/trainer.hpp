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

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "taiyan/model.hpp"
#include "taiyan/sft.hpp"

namespace taiyan {

inline constexpr int kDeriveSteps = -1;

struct TrainConfig {
  double max_lr = 2e-4;
  // kDeriveSteps derives the step count from repeat_factor passes over the data.
  int total_steps = 1000;
  int warmup_steps = 10;
  int batch_size = 8;
  int seq_len = 256;
  int repeat_factor = 1;
  std::uint64_t seed = 0;

  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_epsilon = 1e-8;
  double weight_decay = 0.1;
  double grad_clip = 1.0;

  // Throws kInvalidArgument.
  void validate(const ModelConfig& model) const;
};

// Warmup is 1% of total_steps.
TrainConfig pretrain_defaults(int total_steps);
TrainConfig sft_defaults(int total_steps);

// Linear warmup to max_lr, then cosine decay to exactly 0 at total_steps.
// Throws kStepOutOfRange for step > total_steps.
double cosine_lr(int step, const TrainConfig& cfg);

// loss_mask[t] gates the prediction of tokens[t + 1] from position t.
struct TrainingSequence {
  std::vector<TokenId> tokens;
  std::vector<std::uint8_t> loss_mask;
};

// Concatenates documents with EOS separators and cuts the stream into windows
// of seq_len + 1 tokens (consecutive windows share one boundary token). The
// tail window is padded; padded targets carry no loss.
std::vector<TrainingSequence> pack_documents(std::span<const std::vector<TokenId>> documents, int seq_len);

// prompt + target with loss only on the target. Nothing when it exceeds
// seq_len + 1 tokens.
std::optional<TrainingSequence> sft_sequence(const SerializedExample& example, int seq_len);

struct Batch {
  int batch_size = 0;
  int seq_len = 0;
  std::vector<TokenId> inputs;   // [batch_size x seq_len]
  std::vector<TokenId> targets;  // inputs shifted by one
  std::vector<std::uint8_t> loss_mask;
};

// Width is the longest member; shorter members are padded with PAD and masked.
Batch make_batch(std::span<const TrainingSequence* const> members);

// Mean of -log softmax(logits)[target] over masked rows. Writes dL/dlogits
// when requested. Throws kAllMasked.
template <typename T>
T cross_entropy_loss(const Matrix<T>& logits, std::span<const TokenId> targets,
                     std::span<const std::uint8_t> loss_mask, Matrix<T>* dlogits = nullptr);

template <typename T>
T loss_and_gradients(const Parameters<T>& p, const ModelConfig& cfg, const Batch& batch, Parameters<T>* grads);

// Decoupled weight decay on matrices; gains are not decayed.
class AdamW {
 public:
  AdamW(const ModelConfig& cfg, const TrainConfig& train);
  void step(Parameters<float>& params, const Parameters<float>& grads, double lr);

 private:
  TrainConfig cfg_;
  Parameters<float> m_;
  Parameters<float> v_;
  std::int64_t t_ = 0;
};

struct LossRecord {
  int step = 0;
  double lr = 0;
  double loss = 0;
};

std::string loss_log_csv(std::span<const LossRecord> log);

// Shuffled visiting order for the epoch stream; epoch k is keyed by (seed, k).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

int resolved_total_steps(const TrainConfig& cfg, std::size_t n_sequences);

// Single-threaded and deterministic for a given seed. Throws kNonFiniteLoss
// with the step index.
std::vector<LossRecord> train(Parameters<float>& params, const ModelConfig& model,
                              std::span<const TrainingSequence> data, const TrainConfig& cfg,
                              const std::function<void(const LossRecord&)>& on_step = {});

struct GradientCheckResult {
  double max_relative_error = 0;
  std::vector<std::pair<std::string, double>> per_tensor;
};

// Central differences with the given step against the analytic gradient of
// every parameter element.
GradientCheckResult gradient_check(const Parameters<double>& params, const ModelConfig& cfg, const Batch& batch,
                                   double step = 1e-5);

}  // namespace taiyan
