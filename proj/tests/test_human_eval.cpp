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
#include "taiyan/human_eval.hpp"
#include "taiyan/io.hpp"

using namespace taiyan;

namespace {

RatingMatrix matrix(std::initializer_list<RatingRecord> records, RatingScale scale = RatingScale::kFivePoint) {
  const std::vector<RatingRecord> r(records);
  return RatingMatrix::from_records(r, scale);
}

RatingMatrix fixture() {
  return parse_ratings_csv(io::read_file(TAIYAN_FIXTURES "/ratings.csv"), RatingScale::kFivePoint);
}

}  // namespace

TEST_CASE("mean scores") {
  auto m = matrix({{"i", "A", "e1", 5}, {"i", "B", "e1", 5}, {"j", "A", "e1", 5}, {"j", "B", "e1", 5}});
  for (const auto& [s, v] : mean_scores(m)) CHECK(v == 5.0);
  m = matrix({{"i", "A", "e1", 4}, {"i", "A", "e2", 5}});
  CHECK(mean_scores(m).at("A") == 4.5);
}

TEST_CASE("win rate") {
  auto m = matrix({{"i", "A", "e", 5}, {"i", "B", "e", 3}, {"j", "A", "e", 4}, {"j", "B", "e", 2}});
  CHECK(win_rate(m).at("A") == 1.0);
  CHECK(win_rate(m).at("B") == 0.0);
  m = matrix({{"i", "A", "e", 4}, {"i", "B", "e", 4}});
  CHECK(win_rate(m).at("A") == 1.0);
  CHECK(win_rate(m).at("B") == 1.0);
  m = matrix({{"1", "A", "e", 5}, {"2", "A", "e", 3}, {"3", "A", "e", 4},
              {"1", "B", "e", 5}, {"2", "B", "e", 4}, {"3", "B", "e", 2}});
  CHECK(win_rate(m).at("A") == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(win_rate(m).at("B") == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("spearman") {
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> rev = {4, 3, 2, 1};
  const std::vector<double> y = {1, 3, 2, 4};
  CHECK(spearman(x, x) == 1.0);
  CHECK(spearman(x, rev) == -1.0);
  CHECK(spearman(x, y) == doctest::Approx(0.8).epsilon(1e-15));
  const std::vector<double> flat = {2, 2, 2, 2};
  try {
    spearman(x, flat);
    FAIL("expected DegenerateInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateInput);
  }
  const std::vector<double> one = {1};
  CHECK_THROWS_AS(spearman(one, one), Error);
  CHECK_THROWS_AS(spearman(x, one), Error);
}

TEST_CASE("rank statistics are invariant under increasing transforms") {
  std::mt19937 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(8), b(8);
    for (auto& v : a) v = static_cast<double>(rng() % 5);
    for (auto& v : b) v = static_cast<double>(rng() % 5);
    a[0] = 0;
    a[1] = 4;
    b[0] = 1;
    b[1] = 3;
    std::vector<double> ta = a, tb = b;
    for (auto& v : ta) v = std::exp(v) + 3;
    for (auto& v : tb) v = v * v * v;
    CHECK(spearman(ta, tb) == doctest::Approx(spearman(a, b)).epsilon(1e-12));

    std::vector<RatingRecord> recs, trecs;
    for (int i = 0; i < 4; ++i) {
      for (int s = 0; s < 2; ++s) {
        const double v = a[static_cast<std::size_t>(i * 2 + s)] + 1;
        recs.push_back({std::to_string(i), s == 0 ? "A" : "B", "e", v});
        trecs.push_back({std::to_string(i), s == 0 ? "A" : "B", "e", std::min(5.0, v)});
      }
    }
    const auto m = RatingMatrix::from_records(recs, RatingScale::kFivePoint);
    std::size_t wins = 0;
    for (const auto& [s, w] : win_rate(m)) wins += static_cast<std::size_t>(std::lround(w * 4));
    CHECK(wins >= 4);
  }
}

TEST_CASE("inter-rater consistency") {
  auto m = matrix({{"i", "A", "e1", 1}, {"i", "B", "e1", 2}, {"j", "A", "e1", 3}, {"j", "B", "e1", 4},
                   {"i", "A", "e2", 1}, {"i", "B", "e2", 2}, {"j", "A", "e2", 3}, {"j", "B", "e2", 4},
                   {"i", "A", "e3", 1}, {"i", "B", "e3", 2}, {"j", "A", "e3", 3}, {"j", "B", "e3", 4}});
  const auto same = inter_rater_consistency(m);
  CHECK(same.value == 1.0);
  CHECK(same.pairs_used == 3);
  m = matrix({{"i", "A", "e1", 1}, {"i", "B", "e1", 2}, {"j", "A", "e1", 3}, {"j", "B", "e1", 4},
              {"i", "A", "e2", 4}, {"i", "B", "e2", 3}, {"j", "A", "e2", 2}, {"j", "B", "e2", 1}});
  CHECK(inter_rater_consistency(m).value == -1.0);
  m = matrix({{"i", "A", "e1", 1}, {"i", "B", "e1", 2}, {"i", "A", "e2", 3}, {"i", "B", "e2", 3},
              {"i", "A", "e3", 1}, {"i", "B", "e3", 5}});
  const auto skipped = inter_rater_consistency(m);
  CHECK(skipped.pairs_used == 1);
  CHECK(skipped.skipped_pairs.size() == 2);
  CHECK(skipped.value == 1.0);
}

TEST_CASE("fixture matrix documented values") {
  const auto m = fixture();
  const auto means = mean_scores(m);
  CHECK(means.at("human") == 4.0);
  CHECK(means.at("mt") == 1.5);
  CHECK(means.at("taiyan") == doctest::Approx(13.0 / 3.0).epsilon(1e-15));
  const auto wins = win_rate(m);
  CHECK(wins.at("human") == 0.5);
  CHECK(wins.at("mt") == 0.0);
  CHECK(wins.at("taiyan") == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(inter_rater_consistency(m).value == doctest::Approx(0.6782865141526159).epsilon(1e-12));
}

TEST_CASE("matrix schema checks") {
  CHECK_THROWS_AS(matrix({{"i", "A", "e1", 6}}), Error);
  CHECK_THROWS_AS(matrix({{"i", "A", "e1", 0.7}}, RatingScale::kExplanation), Error);
  CHECK_THROWS_AS(matrix({{"i", "A", "e1", 3}, {"i", "A", "e1", 4}}), Error);
  CHECK_THROWS_AS(matrix({{"i", "A", "e1", 3}, {"j", "B", "e1", 4}}), Error);
  CHECK_THROWS_AS(parse_ratings_csv("item,system,score\ni,A,3\n", RatingScale::kFivePoint), Error);
  const auto acc = explanation_accuracy(matrix(
      {{"i", "A", "e", 1}, {"j", "A", "e", 0.5}, {"k", "A", "e", 0}, {"l", "A", "e", 1}}, RatingScale::kExplanation));
  CHECK(acc.at("A").accuracy == 0.75);
  CHECK(acc.at("A").strict_accuracy == 0.5);
}

TEST_CASE("bundles are seeded, hide provenance and round trip") {
  const std::vector<std::string> systems = {"human", "mt", "taiyan"};
  std::vector<AnswerItem> items;
  for (int i = 0; i < 20; ++i) {
    AnswerItem item{"q" + std::to_string(i), {}};
    for (const auto& s : systems) item.answers[s] = s + " answer " + std::to_string(i);
    items.push_back(item);
  }
  const auto a = make_bundles(items, systems, 42);
  const auto b = make_bundles(items, systems, 42);
  CHECK(bundles_to_jsonl(a.bundles) == bundles_to_jsonl(b.bundles));
  CHECK(key_to_csv(a.key) == key_to_csv(b.key));
  CHECK(key_to_csv(make_bundles(items, systems, 43).key) != key_to_csv(a.key));
  CHECK(bundles_to_jsonl(a.bundles).find("\"system\"") == std::string::npos);

  const auto restored = unshuffle(bundles_from_jsonl(bundles_to_jsonl(a.bundles)), key_from_csv(key_to_csv(a.key)));
  REQUIRE(restored.size() == items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    CHECK(restored[i].item == items[i].item);
    CHECK(restored[i].answers == items[i].answers);
  }

  items[3].answers.erase("mt");
  try {
    make_bundles(items, systems, 1);
    FAIL("expected MissingAnswer");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingAnswer);
    CHECK(std::string(e.what()).find("q3") != std::string::npos);
  }
}
