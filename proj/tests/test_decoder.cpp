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

#include <random>

#include "doctest.h"
#include "taiyan/decoder.hpp"
#include "taiyan/error.hpp"
#include "taiyan/sft.hpp"

using namespace taiyan;

namespace {

Vocabulary table_vocab() {
  const std::vector<Text> corpus = {U"州城西南隅，有黃鶴樓者。甲乙丙丁" + template_codepoints()};
  return build_vocab(corpus, 1);
}

ModelConfig tiny(int vocab) {
  ModelConfig cfg;
  cfg.n_layers = 1;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.d_ff = 24;
  cfg.vocab_size = vocab;
  cfg.max_seq_len = 512;
  return cfg;
}

bool grammar_ok(TextView out) {
  if (out.empty() || is_mark(out.front()) || !is_mark(out.back())) return false;
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (is_mark(out[i]) && is_mark(out[i - 1])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("allowed tokens by state") {
  const auto vocab = table_vocab();
  DecodeState s{U"州城西南隅有黃鶴樓者"};
  CHECK(allowed_tokens(s, vocab) == std::vector<TokenId>{vocab.id_of(U'州')});

  Text out;
  for (char32_t c : Text(U"州城西南隅")) apply_token(s, vocab, vocab.id_of(c), out);
  auto mid = allowed_tokens(s, vocab);
  CHECK(mid.size() == 8);
  CHECK(mid.front() == vocab.id_of(U'有'));

  apply_token(s, vocab, vocab.id_of(U'，'), out);
  CHECK(allowed_tokens(s, vocab) == std::vector<TokenId>{vocab.id_of(U'有')});
  CHECK_THROWS_AS(apply_token(s, vocab, vocab.id_of(U'。'), out), Error);

  for (char32_t c : Text(U"有黃鶴樓者")) apply_token(s, vocab, vocab.id_of(c), out);
  CHECK(allowed_tokens(s, vocab).size() == 7);
  apply_token(s, vocab, vocab.id_of(U'。'), out);
  CHECK(allowed_tokens(s, vocab) == std::vector<TokenId>{kEos});
  apply_token(s, vocab, kEos, out);
  CHECK(s.finished);
  CHECK(s.cursor == s.source.size());
  CHECK(out == U"州城西南隅，有黃鶴樓者。");
}

TEST_CASE("out-of-vocabulary characters pass through verbatim") {
  const auto vocab = table_vocab();
  DecodeState s{U"甲龘"};
  Text out;
  apply_token(s, vocab, vocab.id_of(U'甲'), out);
  CHECK(allowed_tokens(s, vocab).front() == kUnk);
  apply_token(s, vocab, kUnk, out);
  CHECK(out == U"甲龘");
}

TEST_CASE("reachable states never have an empty mask") {
  const auto vocab = table_vocab();
  std::mt19937 rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    Text src;
    const std::size_t n = 1 + rng() % 20;
    for (std::size_t i = 0; i < n; ++i) src.push_back(U"甲乙丙丁龘"[rng() % 5]);
    DecodeState s{src};
    Text out;
    std::size_t steps = 0;
    while (!s.finished) {
      const auto allowed = allowed_tokens(s, vocab);
      REQUIRE_FALSE(allowed.empty());
      apply_token(s, vocab, allowed[rng() % allowed.size()], out);
      ++steps;
    }
    CHECK(steps <= 2 * n + 1);
    CHECK(strip_marks(out) == src);
    CHECK(grammar_ok(out));
  }
}

TEST_CASE("punctuate reproduces the source under a random model") {
  const auto vocab = table_vocab();
  const auto cfg = tiny(static_cast<int>(vocab.size()));
  const auto params = Parameters<float>::initialized(cfg, 21);
  std::mt19937 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    Text src;
    const std::size_t n = 1 + rng() % 60;
    for (std::size_t i = 0; i < n; ++i) src.push_back(static_cast<char32_t>(0x4E00 + rng() % 200));
    const Text out = punctuate(params, cfg, vocab, src);
    CHECK(strip_marks(out) == src);
    CHECK(grammar_ok(out));
  }
  try {
    punctuate(params, cfg, vocab, U"");
    FAIL("expected EmptyInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyInput);
  }
  CHECK_THROWS_AS(punctuate(params, cfg, vocab, U"甲，乙"), Error);
}

TEST_CASE("post-edit flags") {
  CHECK(post_edit_flags(U"甲，乙。", U"甲，乙。").empty());

  auto flags = post_edit_flags(U"甲，乙。", U"甲。乙。");
  REQUIRE(flags.size() == 1);
  CHECK(flags[0].boundary == 1);
  CHECK(flags[0].kind == "type mismatch ，/。");

  flags = post_edit_flags(U"甲乙。", U"甲，乙。");
  REQUIRE(flags.size() == 1);
  CHECK(flags[0].kind == "insertion ，");
  CHECK(flags[0].left_context == U"甲");
  CHECK(flags[0].right_context == U"乙");

  flags = post_edit_flags(U"一二三四五六七八九十，甲乙丙丁戊己庚。", U"一二三四五六七八九十甲乙丙丁戊己庚。");
  REQUIRE(flags.size() == 1);
  CHECK(flags[0].kind == "deletion ，");
  CHECK(flags[0].left_context == U"六七八九十");
  CHECK(flags[0].right_context == U"甲乙丙丁戊");

  try {
    post_edit_flags(U"甲乙。", U"甲丙。");
    FAIL("expected AlignmentMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kAlignmentMismatch);
  }
}
