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

#include "taiyan/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "taiyan/error.hpp"

namespace taiyan {

double PRF::precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }

double PRF::recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }

double PRF::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

PRF& PRF::operator+=(const PRF& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  return *this;
}

bool text_error(TextView original, TextView predicted) { return strip_marks(original) != strip_marks(predicted); }

SegPunct seg_punct_f1(TextView gold, TextView pred) {
  if (text_error(gold, pred)) throw Error(ErrorCode::kTextMismatch, "prediction does not reproduce the text");
  const auto g = align(gold);
  const auto p = align(pred);
  SegPunct out;
  // Both maps are sorted by boundary; merge them.
  auto gi = g.boundary_marks.begin();
  auto pi = p.boundary_marks.begin();
  while (gi != g.boundary_marks.end() || pi != p.boundary_marks.end()) {
    if (pi == p.boundary_marks.end() || (gi != g.boundary_marks.end() && gi->first < pi->first)) {
      ++out.segmentation.fn;
      ++out.punctuation.fn;
      ++gi;
    } else if (gi == g.boundary_marks.end() || pi->first < gi->first) {
      ++out.segmentation.fp;
      ++out.punctuation.fp;
      ++pi;
    } else {
      ++out.segmentation.tp;
      if (gi->second == pi->second) {
        ++out.punctuation.tp;
      } else {
        ++out.punctuation.fp;
        ++out.punctuation.fn;
      }
      ++gi;
      ++pi;
    }
  }
  return out;
}

SegPunctReport seg_punct_corpus(std::span<const Text> gold, std::span<const Text> pred) {
  if (gold.size() != pred.size()) throw Error(ErrorCode::kLengthMismatch, "gold and prediction counts differ");
  SegPunctReport r;
  r.samples = gold.size();
  double seg_sum = 0;
  double punct_sum = 0;
  std::size_t scored = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (text_error(gold[i], pred[i])) {
      ++r.text_errors;
      continue;
    }
    const auto s = seg_punct_f1(gold[i], pred[i]);
    r.micro.segmentation += s.segmentation;
    r.micro.punctuation += s.punctuation;
    seg_sum += s.segmentation.f1();
    punct_sum += s.punctuation.f1();
    ++scored;
  }
  if (scored > 0) {
    r.seg_macro_f1 = seg_sum / static_cast<double>(scored);
    r.punct_macro_f1 = punct_sum / static_cast<double>(scored);
  }
  return r;
}

AllusionScores allusion_scores(std::span<const AllusionGold> golds, std::span<const AllusionPrediction> preds) {
  if (golds.size() != preds.size()) throw Error(ErrorCode::kLengthMismatch, "gold and prediction counts differ");
  AllusionScores s;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto& g = golds[i];
    if (g.has_allusion != !g.allusion_ids.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "gold record " + std::to_string(i) + ": has_allusion disagrees with its labels");
    }
    if (g.has_allusion == preds[i].has_allusion) ++correct;
    for (const auto& label : preds[i].allusion_ids) {
      if (g.allusion_ids.contains(label)) {
        ++s.identification.tp;
      } else {
        ++s.identification.fp;
      }
    }
    for (const auto& label : g.allusion_ids) {
      if (!preds[i].allusion_ids.contains(label)) ++s.identification.fn;
    }
  }
  s.detection_accuracy = golds.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(golds.size());
  return s;
}

namespace {

std::map<Text, std::size_t> ngram_counts(TextView text, std::size_t n) {
  std::map<Text, std::size_t> counts;
  if (text.size() < n) return counts;
  for (std::size_t i = 0; i + n <= text.size(); ++i) ++counts[Text(text.substr(i, n))];
  return counts;
}

// Clipped matches between two n-gram multisets.
std::size_t overlap(const std::map<Text, std::size_t>& hyp, const std::map<Text, std::size_t>& ref) {
  std::size_t matches = 0;
  for (const auto& [gram, count] : hyp) {
    const auto it = ref.find(gram);
    if (it != ref.end()) matches += std::min(count, it->second);
  }
  return matches;
}

void check_lengths(std::size_t refs, std::size_t hyps) {
  if (refs != hyps) throw Error(ErrorCode::kLengthMismatch, "reference and hypothesis counts differ");
}

}  // namespace

double bleu(std::span<const Text> refs, std::span<const Text> hyps, bool smooth) {
  check_lengths(refs.size(), hyps.size());
  constexpr std::size_t kMaxOrder = 4;
  std::array<std::size_t, kMaxOrder> matches{};
  std::array<std::size_t, kMaxOrder> totals{};
  std::size_t ref_len = 0;
  std::size_t hyp_len = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    ref_len += refs[i].size();
    hyp_len += hyps[i].size();
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      const auto h = ngram_counts(hyps[i], n);
      matches[n - 1] += overlap(h, ngram_counts(refs[i], n));
      totals[n - 1] += hyps[i].size() >= n ? hyps[i].size() - n + 1 : 0;
    }
  }
  if (hyp_len == 0) return 0.0;
  double log_sum = 0;
  for (std::size_t n = 0; n < kMaxOrder; ++n) {
    double num = static_cast<double>(matches[n]);
    double den = static_cast<double>(totals[n]);
    if (smooth && n > 0) {
      num += 1;
      den += 1;
    }
    if (num == 0 || den == 0) return 0.0;
    log_sum += std::log(num / den) / kMaxOrder;
  }
  const double bp = hyp_len < ref_len ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len)) : 1.0;
  return 100.0 * bp * std::exp(log_sum);
}

double chrf(std::span<const Text> refs, std::span<const Text> hyps) {
  check_lengths(refs.size(), hyps.size());
  constexpr std::size_t kMaxOrder = 6;
  constexpr double kBeta = 2.0;
  std::array<std::size_t, kMaxOrder> matches{};
  std::array<std::size_t, kMaxOrder> hyp_totals{};
  std::array<std::size_t, kMaxOrder> ref_totals{};
  for (std::size_t i = 0; i < refs.size(); ++i) {
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      matches[n - 1] += overlap(ngram_counts(hyps[i], n), ngram_counts(refs[i], n));
      hyp_totals[n - 1] += hyps[i].size() >= n ? hyps[i].size() - n + 1 : 0;
      ref_totals[n - 1] += refs[i].size() >= n ? refs[i].size() - n + 1 : 0;
    }
  }
  double p_sum = 0;
  double r_sum = 0;
  std::size_t orders = 0;
  for (std::size_t n = 0; n < kMaxOrder; ++n) {
    if (hyp_totals[n] == 0 && ref_totals[n] == 0) continue;
    ++orders;
    if (hyp_totals[n] > 0) p_sum += static_cast<double>(matches[n]) / static_cast<double>(hyp_totals[n]);
    if (ref_totals[n] > 0) r_sum += static_cast<double>(matches[n]) / static_cast<double>(ref_totals[n]);
  }
  if (orders == 0) return 0.0;
  const double p = p_sum / static_cast<double>(orders);
  const double r = r_sum / static_cast<double>(orders);
  const double b2 = kBeta * kBeta;
  if (p == 0 && r == 0) return 0.0;
  return 100.0 * (1 + b2) * p * r / (b2 * p + r);
}

double jaro(TextView a, TextView b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  const std::size_t longer = std::max(a.size(), b.size());
  const std::size_t window = longer / 2 >= 1 ? longer / 2 - 1 : 0;
  std::vector<bool> a_matched(a.size(), false);
  std::vector<bool> b_matched(b.size(), false);
  std::size_t matches = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::size_t lo = i >= window ? i - window : 0;
    const std::size_t hi = std::min(b.size() - 1, i + window);
    for (std::size_t j = lo; j <= hi; ++j) {
      if (!b_matched[j] && a[i] == b[j]) {
        a_matched[i] = b_matched[j] = true;
        ++matches;
        break;
      }
    }
  }
  if (matches == 0) return 0.0;
  std::size_t out_of_order = 0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a_matched[i]) continue;
    while (!b_matched[j]) ++j;
    if (a[i] != b[j]) ++out_of_order;
    ++j;
  }
  const double m = static_cast<double>(matches);
  const double t = static_cast<double>(out_of_order) / 2.0;
  return (m / static_cast<double>(a.size()) + m / static_cast<double>(b.size()) + (m - t) / m) / 3.0;
}

double jaro_winkler(TextView a, TextView b) {
  const double sim = jaro(a, b);
  std::size_t prefix = 0;
  const std::size_t cap = std::min<std::size_t>({4, a.size(), b.size()});
  while (prefix < cap && a[prefix] == b[prefix]) ++prefix;
  return sim + 0.1 * static_cast<double>(prefix) * (1.0 - sim);
}

}  // namespace taiyan
