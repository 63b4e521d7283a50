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

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "taiyan/text.hpp"

namespace taiyan {

// Precision / recall / F1 from raw counts. A zero denominator yields 0.
struct PRF {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  double precision() const;
  double recall() const;
  double f1() const;
  // No positives on either side; every score is 0 by convention.
  bool degenerate() const { return tp + fp + fn == 0; }

  PRF& operator+=(const PRF& other);
  bool operator==(const PRF&) const = default;
};

// True iff the two texts differ once marks are removed.
bool text_error(TextView original, TextView predicted);

struct SegPunct {
  PRF segmentation;
  PRF punctuation;
};

// Boundary matching: segmentation ignores mark type, punctuation requires the
// same mark. Throws kTextMismatch when text_error(gold, pred).
SegPunct seg_punct_f1(TextView gold, TextView pred);

struct SegPunctReport {
  std::size_t samples = 0;
  std::size_t text_errors = 0;
  SegPunct micro;           // counts summed over samples without text errors
  double seg_macro_f1 = 0;  // mean per-sample F1 over the same samples
  double punct_macro_f1 = 0;

  double text_error_rate() const { return samples == 0 ? 0.0 : static_cast<double>(text_errors) / samples; }
};

// F1 is computed only over samples whose text was reproduced exactly.
// Throws kLengthMismatch.
SegPunctReport seg_punct_corpus(std::span<const Text> gold, std::span<const Text> pred);

struct AllusionGold {
  Text text;
  bool has_allusion = false;
  std::set<std::string> allusion_ids;
};

struct AllusionPrediction {
  bool has_allusion = false;
  std::set<std::string> allusion_ids;
};

struct AllusionScores {
  double detection_accuracy = 0;
  PRF identification;  // micro over (sample, label) pairs
};

// Throws kLengthMismatch, kInvalidArgument when a gold record is inconsistent.
AllusionScores allusion_scores(std::span<const AllusionGold> golds, std::span<const AllusionPrediction> preds);

// Corpus-level character BLEU-4 on a 0-100 scale. With smoothing, orders >= 2
// use add-one counts.
double bleu(std::span<const Text> refs, std::span<const Text> hyps, bool smooth = false);

// Character n-gram F-score, n = 1..6, beta = 2, on a 0-100 scale. Orders with
// no n-grams on either side are skipped.
double chrf(std::span<const Text> refs, std::span<const Text> hyps);

double jaro(TextView a, TextView b);
// Prefix weight 0.1, prefix capped at 4 characters.
double jaro_winkler(TextView a, TextView b);

}  // namespace taiyan
