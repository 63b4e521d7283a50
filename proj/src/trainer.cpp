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

#include "taiyan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "taiyan/error.hpp"

namespace taiyan {

void TrainConfig::validate(const ModelConfig& model) const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); };
  if (!(max_lr > 0)) fail("max_lr must be positive");
  if (total_steps < 0) fail("total_steps must be nonnegative once resolved");
  if (warmup_steps < 0) fail("warmup_steps must be nonnegative");
  if (total_steps > 0 && warmup_steps >= total_steps) fail("warmup_steps must be < total_steps");
  if (batch_size < 1) fail("batch_size must be positive");
  if (seq_len < 1) fail("seq_len must be positive");
  if (seq_len > model.max_seq_len) fail("seq_len exceeds the model's max_seq_len");
  if (repeat_factor < 1) fail("repeat_factor must be positive");
}

TrainConfig pretrain_defaults(int total_steps) {
  TrainConfig cfg;
  cfg.max_lr = 2e-4;
  cfg.total_steps = total_steps;
  cfg.warmup_steps = total_steps / 100;
  return cfg;
}

TrainConfig sft_defaults(int total_steps) {
  TrainConfig cfg = pretrain_defaults(total_steps);
  cfg.max_lr = 5e-5;
  return cfg;
}

double cosine_lr(int step, const TrainConfig& cfg) {
  if (step < 0 || step > cfg.total_steps) {
    throw Error(ErrorCode::kStepOutOfRange,
                "step " + std::to_string(step) + " outside 0.." + std::to_string(cfg.total_steps));
  }
  if (step < cfg.warmup_steps) {
    return cfg.max_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  }
  if (step == cfg.total_steps) return 0.0;
  const double progress =
      static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  return cfg.max_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::vector<TrainingSequence> pack_documents(std::span<const std::vector<TokenId>> documents, int seq_len) {
  std::vector<TokenId> stream;
  for (const auto& doc : documents) {
    stream.insert(stream.end(), doc.begin(), doc.end());
    stream.push_back(kEos);
  }
  std::vector<TrainingSequence> out;
  const auto window = static_cast<std::size_t>(seq_len) + 1;
  for (std::size_t start = 0; start + 1 < stream.size(); start += window - 1) {
    TrainingSequence s;
    const std::size_t end = std::min(stream.size(), start + window);
    s.tokens.assign(stream.begin() + static_cast<std::ptrdiff_t>(start),
                    stream.begin() + static_cast<std::ptrdiff_t>(end));
    s.loss_mask.assign(s.tokens.size() - 1, 1);
    out.push_back(std::move(s));
  }
  return out;
}

std::optional<TrainingSequence> sft_sequence(const SerializedExample& example, int seq_len) {
  const std::size_t total = example.prompt.size() + example.target.size();
  if (total > static_cast<std::size_t>(seq_len) + 1) return std::nullopt;
  TrainingSequence s;
  s.tokens = example.prompt;
  s.tokens.insert(s.tokens.end(), example.target.begin(), example.target.end());
  s.loss_mask.assign(total - 1, 0);
  // Position t predicts token t+1; target tokens start at prompt.size().
  for (std::size_t t = example.prompt.size() - 1; t + 1 < total; ++t) s.loss_mask[t] = 1;
  return s;
}

Batch make_batch(std::span<const TrainingSequence* const> members) {
  Batch b;
  b.batch_size = static_cast<int>(members.size());
  for (const auto* m : members) b.seq_len = std::max(b.seq_len, static_cast<int>(m->loss_mask.size()));
  const auto width = static_cast<std::size_t>(b.seq_len);
  b.inputs.assign(members.size() * width, kPad);
  b.targets.assign(members.size() * width, kPad);
  b.loss_mask.assign(members.size() * width, 0);
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto& s = *members[i];
    for (std::size_t t = 0; t < s.loss_mask.size(); ++t) {
      b.inputs[i * width + t] = s.tokens[t];
      b.targets[i * width + t] = s.tokens[t + 1];
      b.loss_mask[i * width + t] = s.tokens[t + 1] == kPad ? 0 : s.loss_mask[t];
    }
  }
  return b;
}

template <typename T>
T cross_entropy_loss(const Matrix<T>& logits, std::span<const TokenId> targets, std::span<const std::uint8_t> loss_mask,
                     Matrix<T>* dlogits) {
  if (targets.size() != static_cast<std::size_t>(logits.rows()) || loss_mask.size() != targets.size()) {
    throw Error(ErrorCode::kLengthMismatch, "logits, targets and mask disagree in length");
  }
  const auto count = std::count_if(loss_mask.begin(), loss_mask.end(), [](auto m) { return m != 0; });
  if (count == 0) throw Error(ErrorCode::kAllMasked, "no position contributes to the loss");
  if (dlogits != nullptr) dlogits->setZero(logits.rows(), logits.cols());
  const T inv_count = T(1) / static_cast<T>(count);
  double total = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    if (loss_mask[static_cast<std::size_t>(r)] == 0) continue;
    const auto row = logits.row(r);
    const T max_v = row.maxCoeff();
    const T sum = (row.array() - max_v).exp().sum();
    const T log_z = max_v + std::log(sum);
    const TokenId target = targets[static_cast<std::size_t>(r)];
    total += static_cast<double>(log_z - row(target));
    if (dlogits != nullptr) {
      dlogits->row(r) = ((row.array() - log_z).exp() * inv_count).matrix();
      (*dlogits)(r, target) -= inv_count;
    }
  }
  return static_cast<T>(total / static_cast<double>(count));
}

template <typename T>
T loss_and_gradients(const Parameters<T>& p, const ModelConfig& cfg, const Batch& batch, Parameters<T>* grads) {
  ForwardCache<T> cache;
  forward_batch(p, cfg, batch.inputs, batch.batch_size, cache);
  if (grads == nullptr) return cross_entropy_loss<T>(cache.logits, batch.targets, batch.loss_mask);
  Matrix<T> dlogits;
  const T loss = cross_entropy_loss<T>(cache.logits, batch.targets, batch.loss_mask, &dlogits);
  backward(p, cfg, cache, dlogits, *grads);
  return loss;
}

AdamW::AdamW(const ModelConfig& cfg, const TrainConfig& train)
    : cfg_(train), m_(Parameters<float>::zeros(cfg)), v_(Parameters<float>::zeros(cfg)) {}

void AdamW::step(Parameters<float>& params, const Parameters<float>& grads, double lr) {
  ++t_;
  auto p = named_tensors(params);
  auto g = named_tensors(grads);
  auto m = named_tensors(m_);
  auto v = named_tensors(v_);

  double norm_sq = 0;
  for (const auto& t : g) {
    for (float x : t.data) norm_sq += static_cast<double>(x) * x;
  }
  const double norm = std::sqrt(norm_sq);
  const double clip = norm > cfg_.grad_clip && cfg_.grad_clip > 0 ? cfg_.grad_clip / norm : 1.0;

  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool decay = p[i].shape.size() >= 2;
    for (std::size_t k = 0; k < p[i].data.size(); ++k) {
      const double grad = static_cast<double>(g[i].data[k]) * clip;
      const double mk = b1 * m[i].data[k] + (1.0 - b1) * grad;
      const double vk = b2 * v[i].data[k] + (1.0 - b2) * grad * grad;
      m[i].data[k] = static_cast<float>(mk);
      v[i].data[k] = static_cast<float>(vk);
      double w = p[i].data[k];
      if (decay) w -= lr * cfg_.weight_decay * w;
      w -= lr * (mk / bias1) / (std::sqrt(vk / bias2) + cfg_.adam_epsilon);
      p[i].data[k] = static_cast<float>(w);
    }
  }
}

std::string loss_log_csv(std::span<const LossRecord> log) {
  std::string out = "step,lr,loss\n";
  char buf[96];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", r.step, r.lr, r.loss);
    out += buf;
  }
  return out;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

int resolved_total_steps(const TrainConfig& cfg, std::size_t n_sequences) {
  if (cfg.total_steps != kDeriveSteps) return cfg.total_steps;
  const std::size_t visits = n_sequences * static_cast<std::size_t>(cfg.repeat_factor);
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  return static_cast<int>((visits + bs - 1) / bs);
}

std::vector<LossRecord> train(Parameters<float>& params, const ModelConfig& model,
                              std::span<const TrainingSequence> data, const TrainConfig& cfg_in,
                              const std::function<void(const LossRecord&)>& on_step) {
  TrainConfig cfg = cfg_in;
  cfg.total_steps = resolved_total_steps(cfg_in, data.size());
  cfg.validate(model);
  std::vector<LossRecord> log;
  if (cfg.total_steps == 0) return log;
  if (data.empty()) throw Error(ErrorCode::kEmptyCorpus, "no training sequences");
  for (const auto& s : data) {
    if (s.loss_mask.size() > static_cast<std::size_t>(cfg.seq_len)) {
      throw Error(ErrorCode::kInvalidArgument, "training sequence longer than seq_len");
    }
  }

  AdamW optimizer(model, cfg);
  Parameters<float> grads = Parameters<float>::zeros(model);
  std::uint64_t epoch = 0;
  std::vector<std::size_t> order = epoch_order(data.size(), cfg.seed, epoch);
  std::size_t cursor = 0;
  std::vector<const TrainingSequence*> members;

  for (int step = 0; step < cfg.total_steps; ++step) {
    members.clear();
    while (members.size() < static_cast<std::size_t>(cfg.batch_size)) {
      if (cursor == order.size()) {
        order = epoch_order(data.size(), cfg.seed, ++epoch);
        cursor = 0;
      }
      members.push_back(&data[order[cursor++]]);
    }
    const Batch batch = make_batch(members);
    for (auto& t : named_tensors(grads)) std::fill(t.data.begin(), t.data.end(), 0.0f);
    double loss = 0;
    try {
      loss = loss_and_gradients<float>(params, model, batch, &grads);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kAllMasked) throw;
      continue;
    }
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::kNonFiniteLoss, "non-finite loss at step " + std::to_string(step));
    }
    const double lr = cosine_lr(step, cfg);
    optimizer.step(params, grads, lr);
    LossRecord rec{step, lr, loss};
    log.push_back(rec);
    if (on_step) on_step(rec);
  }
  return log;
}

GradientCheckResult gradient_check(const Parameters<double>& params, const ModelConfig& cfg, const Batch& batch,
                                   double step) {
  Parameters<double> grads = Parameters<double>::zeros(cfg);
  loss_and_gradients<double>(params, cfg, batch, &grads);

  Parameters<double> probe = params;
  auto probe_tensors = named_tensors(probe);
  const auto grad_tensors = named_tensors(std::as_const(grads));
  GradientCheckResult result;
  for (std::size_t i = 0; i < probe_tensors.size(); ++i) {
    double worst = 0;
    for (std::size_t k = 0; k < probe_tensors[i].data.size(); ++k) {
      double& w = probe_tensors[i].data[k];
      const double saved = w;
      w = saved + step;
      const double plus = loss_and_gradients<double>(probe, cfg, batch, nullptr);
      w = saved - step;
      const double minus = loss_and_gradients<double>(probe, cfg, batch, nullptr);
      w = saved;
      const double numeric = (plus - minus) / (2 * step);
      const double analytic = grad_tensors[i].data[k];
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
    }
    result.per_tensor.emplace_back(probe_tensors[i].name, worst);
    result.max_relative_error = std::max(result.max_relative_error, worst);
  }
  return result;
}

template float cross_entropy_loss(const Matrix<float>&, std::span<const TokenId>, std::span<const std::uint8_t>,
                                  Matrix<float>*);
template double cross_entropy_loss(const Matrix<double>&, std::span<const TokenId>, std::span<const std::uint8_t>,
                                   Matrix<double>*);
template float loss_and_gradients(const Parameters<float>&, const ModelConfig&, const Batch&, Parameters<float>*);
template double loss_and_gradients(const Parameters<double>&, const ModelConfig&, const Batch&, Parameters<double>*);

}  // namespace taiyan
