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

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "taiyan/text.hpp"

namespace taiyan {

inline constexpr std::size_t kNumPeriods = 8;
inline constexpr std::array<std::string_view, kNumPeriods> kPeriods = {
    "Pre-Qin", "Han", "Wei-Jin-NS", "Tang", "Song", "Yuan", "Ming", "Qing"};

// Documents bucketed by period, in canonical period order.
struct PeriodCorpus {
  std::array<std::vector<Text>, kNumPeriods> documents;

  // One subdirectory per period (canonical names); every .txt file inside is
  // one document, read in file-name order, trailing line breaks dropped.
  // Missing period directories are empty. Unknown subdirectories throw kSchema.
  static PeriodCorpus load(const std::filesystem::path& root);
};

struct ConcordanceHit {
  std::size_t period = 0;
  Text snippet;
};

// Non-overlapping occurrences, left to right, with up to `window` chars of
// context on each side. Throws kInvalidArgument for an empty keyword.
std::vector<ConcordanceHit> concordance(const PeriodCorpus& corpus, TextView keyword, std::size_t window);

struct GlossedHit {
  Text gloss;
  std::size_t period = 0;
  Text snippet;
};

struct SenseCluster {
  Text representative;  // gloss of the first member
  std::vector<GlossedHit> members;
  std::array<std::size_t, kNumPeriods> count_by_period{};

  std::size_t total() const { return members.size(); }
};

inline constexpr double kDefaultTheta = 0.85;

// Greedy first-fit: each gloss joins the first cluster whose representative
// scores jaro_winkler >= theta, else starts a new one. Sorted by size
// (descending), ties by first appearance. Throws kInvalidArgument unless
// 0 < theta <= 1.
std::vector<SenseCluster> cluster_glosses(std::span<const GlossedHit> glosses, double theta);

struct SenseTrajectory {
  std::vector<Text> representatives;
  // frequency[c][p]: share of period p's occurrences that fall in cluster c.
  std::vector<std::array<double, kNumPeriods>> frequency;
  std::array<std::size_t, kNumPeriods> occurrences{};
  // False where a period has no occurrences; its frequencies are 0.
  std::array<bool, kNumPeriods> covered{};
};

SenseTrajectory sense_trajectory(std::span<const SenseCluster> clusters, std::size_t top_k);

// period,cluster_representative,frequency
std::string trajectory_csv(const SenseTrajectory& t);
// Line chart, one polyline per cluster over the canonical periods.
std::string trajectory_svg(const SenseTrajectory& t, std::string_view title);

// Writes PREFIX.csv and PREFIX.svg. Throws kInvalidArgument for an empty
// trajectory, kIo on write failures.
void emit_chart(const SenseTrajectory& t, const std::filesystem::path& prefix, std::string_view title = {});

}  // namespace taiyan
