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
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace taiyan {

// {0, 0.5, 1} for word explanations, integers 1..5 for translations.
enum class RatingScale { kExplanation, kFivePoint };

struct RatingRecord {
  std::string item;
  std::string system;
  std::string evaluator;
  double score = 0;
};

// Dense items x systems x evaluators scores. Index sets keep first-seen order.
class RatingMatrix {
 public:
  // Throws kSchema on duplicate cells, incomplete coverage, or scores off
  // the scale.
  static RatingMatrix from_records(std::span<const RatingRecord> records, RatingScale scale);

  const std::vector<std::string>& items() const { return items_; }
  const std::vector<std::string>& systems() const { return systems_; }
  const std::vector<std::string>& evaluators() const { return evaluators_; }
  RatingScale scale() const { return scale_; }

  double score(std::size_t item, std::size_t system, std::size_t evaluator) const {
    return scores_[(item * systems_.size() + system) * evaluators_.size() + evaluator];
  }

 private:
  std::vector<std::string> items_;
  std::vector<std::string> systems_;
  std::vector<std::string> evaluators_;
  std::vector<double> scores_;
  RatingScale scale_ = RatingScale::kFivePoint;
};

// CSV with header item,system,evaluator,score.
RatingMatrix parse_ratings_csv(std::string_view contents, RatingScale scale);

std::map<std::string, double> mean_scores(const RatingMatrix& m);

// Share of (item, evaluator) pairs where the system holds rank 1; systems tied
// at the top all hold rank 1.
std::map<std::string, double> win_rate(const RatingMatrix& m);

struct ExplanationAccuracy {
  double accuracy = 0;         // score >= 0.5
  double strict_accuracy = 0;  // score == 1
};

// Throws kInvalidArgument unless the matrix uses the explanation scale.
std::map<std::string, ExplanationAccuracy> explanation_accuracy(const RatingMatrix& m);

// Pearson correlation of average-tie ranks. Throws kLengthMismatch and
// kDegenerateInput (fewer than 2 points or a constant side).
double spearman(std::span<const double> x, std::span<const double> y);

struct Consistency {
  double value = 0;
  std::size_t pairs_used = 0;
  std::vector<std::pair<std::string, std::string>> skipped_pairs;
};

// Mean Spearman over evaluator pairs on flattened item x system vectors.
// Throws kDegenerateInput when fewer than 2 evaluators or no usable pair.
Consistency inter_rater_consistency(const RatingMatrix& m);

struct AnswerItem {
  std::string item;
  std::map<std::string, std::string> answers;  // system -> answer
};

struct Bundle {
  std::string item;
  std::vector<std::string> answers;  // slot order, provenance hidden
};

struct KeyEntry {
  std::string item;
  std::size_t slot = 0;
  std::string system;
};

struct BundleSet {
  std::vector<Bundle> bundles;
  std::vector<KeyEntry> key;
};

// Per-item permutation drawn from seed in item order. Throws kMissingAnswer
// naming the item when a system has no answer.
BundleSet make_bundles(std::span<const AnswerItem> items, std::span<const std::string> systems, std::uint64_t seed);

// Inverse of make_bundles. Throws kSchema when bundles and key disagree.
std::vector<AnswerItem> unshuffle(std::span<const Bundle> bundles, std::span<const KeyEntry> key);

std::string bundles_to_jsonl(std::span<const Bundle> bundles);
std::vector<Bundle> bundles_from_jsonl(std::string_view contents);
std::string key_to_csv(std::span<const KeyEntry> key);
std::vector<KeyEntry> key_from_csv(std::string_view contents);
// Lines of {"item": ..., "answers": {system: text}}.
std::vector<AnswerItem> answers_from_jsonl(std::string_view contents);

}  // namespace taiyan
