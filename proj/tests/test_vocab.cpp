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
#include "taiyan/error.hpp"
#include "taiyan/vocab.hpp"

using namespace taiyan;

TEST_CASE("build_vocab sizes and ordering") {
  const std::vector<Text> corpus = {U"甲甲乙"};
  const auto v = build_vocab(corpus, 1);
  CHECK(v.size() == 14);
  CHECK(v.id_of(U'甲') < v.id_of(U'乙'));
  CHECK(v.id_of(U'甲') >= kNumSpecials);
  for (char32_t m : kMarkSet) CHECK(v.contains(m));

  const std::vector<Text> single = {U"甲"};
  const auto w = build_vocab(single, 2);
  CHECK(w.size() == 12);
  CHECK_FALSE(w.contains(U'甲'));

  const auto req = build_vocab(single, 2, U"乙\n");
  CHECK(req.contains(U'乙'));
  CHECK(req.contains(U'\n'));

  try {
    build_vocab(std::span<const Text>{}, 1);
    FAIL("expected EmptyCorpus");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyCorpus);
  }
  const std::vector<Text> blank = {U""};
  CHECK_THROWS_AS(build_vocab(blank, 1), Error);
}

TEST_CASE("ties break by codepoint") {
  const std::vector<Text> corpus = {U"乙甲"};
  const auto v = build_vocab(corpus, 1);
  CHECK(U'乙' < U'甲');
  CHECK(v.id_of(U'乙') < v.id_of(U'甲'));
}

TEST_CASE("encode and decode") {
  const std::vector<Text> corpus = {U"州城西南隅甲乙"};
  const auto v = build_vocab(corpus, 1);
  CHECK(v.encode(U"").empty());
  CHECK(v.encode(U"甲乙") == std::vector<TokenId>{v.id_of(U'甲'), v.id_of(U'乙')});
  CHECK(v.encode(U"甲◊") == std::vector<TokenId>{v.id_of(U'甲'), 3});
  const std::vector<TokenId> with_eos = {v.id_of(U'甲'), kEos};
  CHECK(v.decode(with_eos) == U"甲");
  CHECK(v.decode(v.encode(U"州城西南隅")) == U"州城西南隅");
  const std::vector<TokenId> bad = {static_cast<TokenId>(v.size() + 5)};
  try {
    v.decode(bad);
    FAIL("expected UnknownId");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownId);
  }
  CHECK_THROWS_AS(v.codepoint_of(kSep), Error);
}

TEST_CASE("random in-vocabulary round trip") {
  const std::vector<Text> corpus = {U"天地玄黃宇宙洪荒日月盈昃辰宿列張"};
  const auto v = build_vocab(corpus, 1);
  std::mt19937 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    Text t;
    const std::size_t n = rng() % 40;
    for (std::size_t i = 0; i < n; ++i) t.push_back(corpus[0][rng() % corpus[0].size()]);
    CHECK(v.decode(v.encode(t)) == t);
  }
}

TEST_CASE("serialization is deterministic and round trips") {
  const std::vector<Text> corpus = {U"天地\n玄黃\\，", U"宇宙"};
  const auto a = build_vocab(corpus, 1, U"\r");
  const auto b = build_vocab(corpus, 1, U"\r");
  CHECK(a.serialize() == b.serialize());
  const std::string s = a.serialize();
  CHECK(s.rfind("<pad>\n<bos>\n<eos>\n<unk>\n<sep>\n", 0) == 0);
  const auto back = Vocabulary::parse(s);
  CHECK(back == a);
  CHECK(back.id_of(U'\n') == a.id_of(U'\n'));
  CHECK(back.id_of(U'\\') == a.id_of(U'\\'));
  CHECK_THROWS_AS(Vocabulary::parse("<pad>\n<bos>\n"), Error);
}
