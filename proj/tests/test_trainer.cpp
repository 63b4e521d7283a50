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

#include <cmath>
#include <random>

#include "doctest.h"
#include "taiyan/error.hpp"
#include "taiyan/trainer.hpp"

using namespace taiyan;

namespace {

ModelConfig grad_config(int layers, int d, int heads, int vocab) {
  ModelConfig cfg;
  cfg.n_layers = layers;
  cfg.d_model = d;
  cfg.n_heads = heads;
  cfg.d_ff = default_d_ff(d);
  cfg.vocab_size = vocab;
  cfg.max_seq_len = 32;
  return cfg;
}

Batch random_batch(std::uint32_t seed, int batch, int len, int vocab) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<TokenId> dist(kNumSpecials, vocab - 1);
  std::vector<TrainingSequence> seqs(static_cast<std::size_t>(batch));
  for (auto& s : seqs) {
    for (int t = 0; t <= len; ++t) s.tokens.push_back(dist(rng));
    s.loss_mask.assign(static_cast<std::size_t>(len), 1);
    s.loss_mask[0] = 0;
  }
  std::vector<const TrainingSequence*> ptrs;
  for (const auto& s : seqs) ptrs.push_back(&s);
  return make_batch(ptrs);
}

}  // namespace

TEST_CASE("cosine schedule endpoints") {
  const auto cfg = pretrain_defaults(1000);
  CHECK(cfg.warmup_steps == 10);
  CHECK(cosine_lr(cfg.warmup_steps, cfg) == 2e-4);
  CHECK(cosine_lr(cfg.total_steps, cfg) == 0.0);
  CHECK(cosine_lr(0, cfg) == 0.0);
  const int mid = cfg.warmup_steps + (cfg.total_steps - cfg.warmup_steps) / 2;
  CHECK(std::abs(cosine_lr(mid, cfg) - 1e-4) <= 1e-12);
  CHECK_THROWS_AS(cosine_lr(cfg.total_steps + 1, cfg), Error);
  CHECK_THROWS_AS(cosine_lr(-1, cfg), Error);
  CHECK(sft_defaults(1000).max_lr == 5e-5);
}

TEST_CASE("cosine schedule is monotone after warmup and peaks at max") {
  const auto cfg = pretrain_defaults(1000);
  double prev = cosine_lr(cfg.warmup_steps, cfg);
  double peak = 0;
  for (int s = 0; s <= cfg.total_steps; ++s) {
    const double lr = cosine_lr(s, cfg);
    peak = std::max(peak, lr);
    CHECK(lr >= 0.0);
    if (s > cfg.warmup_steps) {
      CHECK(lr <= prev);
      prev = lr;
    }
  }
  CHECK(peak == cfg.max_lr);
}

TEST_CASE("cross entropy values") {
  const int v = 13;
  Matrix<double> logits = Matrix<double>::Constant(3, v, 0.7);
  const std::vector<TokenId> targets = {1, 5, 12};
  const std::vector<std::uint8_t> mask = {1, 1, 1};
  CHECK(cross_entropy_loss<double>(logits, targets, mask) == doctest::Approx(std::log(13.0)).epsilon(1e-14));

  Matrix<double> sharp = Matrix<double>::Zero(3, v);
  for (int r = 0; r < 3; ++r) sharp(r, targets[static_cast<std::size_t>(r)]) = 20.0;
  CHECK(cross_entropy_loss<double>(sharp, targets, mask) < 1e-8 * v);

  const std::vector<std::uint8_t> none = {0, 0, 0};
  try {
    cross_entropy_loss<double>(logits, targets, none);
    FAIL("expected AllMasked");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kAllMasked);
  }
}

TEST_CASE("masked positions never influence the loss") {
  std::mt19937 rng(4);
  std::normal_distribution<double> dist;
  Matrix<double> logits(6, 9);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = dist(rng);
  const std::vector<TokenId> targets = {1, 2, 3, 4, 5, 6};
  const std::vector<std::uint8_t> mask = {0, 0, 0, 1, 1, 1};
  const double base = cross_entropy_loss<double>(logits, targets, mask);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix<double> changed = logits;
    changed.topRows(3).setRandom();
    changed.topRows(3) *= 50.0;
    CHECK(cross_entropy_loss<double>(changed, targets, mask) == base);
  }
}

TEST_CASE("sft sequence masks the prompt and the batch shifts targets") {
  SerializedExample ex;
  ex.prompt = {kBos, 7, 8, kSep};
  ex.target = {9, 10, kEos};
  const auto seq = sft_sequence(ex, 16);
  REQUIRE(seq.has_value());
  CHECK(seq->tokens == std::vector<TokenId>{kBos, 7, 8, kSep, 9, 10, kEos});
  // Position 3 (SEP) predicts the first target token.
  CHECK(seq->loss_mask == std::vector<std::uint8_t>{0, 0, 0, 1, 1, 1});
  CHECK_FALSE(sft_sequence(ex, 5).has_value());

  const TrainingSequence* members[] = {&*seq};
  const auto batch = make_batch(members);
  CHECK(batch.seq_len == 6);
  for (int t = 0; t + 1 < 6; ++t) CHECK(batch.targets[static_cast<std::size_t>(t)] == batch.inputs[static_cast<std::size_t>(t + 1)]);
}

TEST_CASE("packing separates documents with EOS and pads the tail") {
  const std::vector<std::vector<TokenId>> docs = {{5, 6, 7}, {8, 9}};
  const auto packed = pack_documents(docs, 4);
  REQUIRE(packed.size() == 2);
  CHECK(packed[0].tokens == std::vector<TokenId>{5, 6, 7, kEos, 8});
  CHECK(packed[1].tokens == std::vector<TokenId>{8, 9, kEos});
  const TrainingSequence* members[] = {&packed[0], &packed[1]};
  const auto batch = make_batch(members);
  CHECK(batch.seq_len == 4);
  CHECK(batch.loss_mask == std::vector<std::uint8_t>{1, 1, 1, 1, 1, 1, 0, 0});
}

TEST_CASE("gradient check on one layer, d_model 4, seed 0") {
  const auto cfg = grad_config(1, 4, 2, 12);
  const auto params = Parameters<double>::initialized(cfg, 0);
  const auto batch = random_batch(1, 2, 6, cfg.vocab_size);
  const auto result = gradient_check(params, cfg, batch);
  for (const auto& [name, err] : result.per_tensor) {
    INFO(name);
    CHECK(err < 1e-3);
  }
  CHECK(result.max_relative_error < 1e-3);
}

TEST_CASE("gradient check on two layers, d_model 16") {
  const auto cfg = grad_config(2, 16, 4, 20);
  auto params = Parameters<double>::initialized(cfg, 3);
  // Larger weights make the check sensitive to every term.
  for (auto& t : named_tensors(params)) {
    if (t.shape.size() == 2) {
      for (auto& x : t.data) x *= 10.0;
    }
  }
  const auto batch = random_batch(2, 2, 7, cfg.vocab_size);
  const auto result = gradient_check(params, cfg, batch);
  for (const auto& [name, err] : result.per_tensor) {
    INFO(name);
    CHECK(err < 1e-3);
  }
}

TEST_CASE("gradient check on a zero-initialized model") {
  const auto cfg = grad_config(1, 4, 2, 12);
  auto params = Parameters<double>::zeros(cfg);
  const auto batch = random_batch(5, 2, 5, cfg.vocab_size);
  CHECK(std::isfinite(loss_and_gradients<double>(params, cfg, batch, nullptr)));
  CHECK(gradient_check(params, cfg, batch).max_relative_error < 1e-3);
}

TEST_CASE("training: zero steps, determinism and learning") {
  const auto cfg = grad_config(1, 16, 2, 12);
  std::vector<std::vector<TokenId>> docs;
  for (int d = 0; d < 40; ++d) docs.push_back({5, 6, 7, 8, 9, 10, 11});
  const auto data = pack_documents(docs, 15);

  TrainConfig tc;
  tc.total_steps = 0;
  tc.seq_len = 15;
  auto params = Parameters<float>::initialized(cfg, 1);
  const auto before = params;
  CHECK(train(params, cfg, data, tc).empty());
  CHECK(params == before);

  tc.total_steps = 200;
  tc.warmup_steps = 5;
  tc.max_lr = 3e-3;
  tc.batch_size = 4;
  auto a = Parameters<float>::initialized(cfg, 1);
  auto b = Parameters<float>::initialized(cfg, 1);
  const auto log_a = train(a, cfg, data, tc);
  const auto log_b = train(b, cfg, data, tc);
  CHECK(loss_log_csv(log_a) == loss_log_csv(log_b));
  CHECK(a == b);
  REQUIRE(log_a.size() == 200);
  CHECK(log_a.back().loss < 0.25 * log_a.front().loss);
  CHECK(log_a.front().step == 0);
  CHECK(log_a.front().lr == 0.0);
}

TEST_CASE("derived step count and epoch order") {
  TrainConfig tc;
  tc.total_steps = kDeriveSteps;
  tc.batch_size = 4;
  tc.repeat_factor = 3;
  CHECK(resolved_total_steps(tc, 10) == 8);
  const auto e0 = epoch_order(50, 7, 0);
  CHECK(e0 == epoch_order(50, 7, 0));
  CHECK(e0 != epoch_order(50, 7, 1));
  CHECK(e0 != epoch_order(50, 8, 0));
  auto sorted = e0;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
}

TEST_CASE("loss log format") {
  const std::vector<LossRecord> log = {{0, 0.0, 2.5}, {1, 1e-4, 2.25}};
  CHECK(loss_log_csv(log) == "step,lr,loss\n0,0,2.5\n1,0.0001,2.25\n");
}
