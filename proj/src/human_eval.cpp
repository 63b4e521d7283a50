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

#include "taiyan/human_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "taiyan/error.hpp"
#include "taiyan/io.hpp"

namespace taiyan {

namespace {

std::size_t index_of(std::vector<std::string>& names, std::unordered_map<std::string, std::size_t>& lookup,
                     const std::string& name) {
  const auto [it, inserted] = lookup.emplace(name, names.size());
  if (inserted) names.push_back(name);
  return it->second;
}

bool on_scale(double v, RatingScale scale) {
  if (scale == RatingScale::kExplanation) return v == 0.0 || v == 0.5 || v == 1.0;
  return v >= 1.0 && v <= 5.0 && v == std::floor(v);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

RatingMatrix RatingMatrix::from_records(std::span<const RatingRecord> records, RatingScale scale) {
  RatingMatrix m;
  m.scale_ = scale;
  std::unordered_map<std::string, std::size_t> items, systems, evaluators;
  struct Cell {
    std::size_t i, s, e;
    double v;
  };
  std::vector<Cell> cells;
  for (const auto& r : records) {
    if (!on_scale(r.score, scale)) {
      throw Error(ErrorCode::kSchema, "score " + std::to_string(r.score) + " off scale for item " + r.item);
    }
    cells.push_back({index_of(m.items_, items, r.item), index_of(m.systems_, systems, r.system),
                     index_of(m.evaluators_, evaluators, r.evaluator), r.score});
  }
  const std::size_t n = m.items_.size() * m.systems_.size() * m.evaluators_.size();
  m.scores_.assign(n, std::numeric_limits<double>::quiet_NaN());
  for (const auto& c : cells) {
    double& slot = m.scores_[(c.i * m.systems_.size() + c.s) * m.evaluators_.size() + c.e];
    if (!std::isnan(slot)) {
      throw Error(ErrorCode::kSchema, "duplicate rating for item " + m.items_[c.i] + ", system " +
                                          m.systems_[c.s] + ", evaluator " + m.evaluators_[c.e]);
    }
    slot = c.v;
  }
  if (cells.size() != n || n == 0) {
    throw Error(ErrorCode::kSchema, "rating matrix incomplete: " + std::to_string(cells.size()) + " of " +
                                        std::to_string(n) + " cells present");
  }
  return m;
}

RatingMatrix parse_ratings_csv(std::string_view contents, RatingScale scale) {
  const auto rows = io::parse_csv(contents);
  if (rows.empty() || rows[0] != std::vector<std::string>{"item", "system", "evaluator", "score"}) {
    throw Error(ErrorCode::kSchema, "ratings CSV needs header item,system,evaluator,score");
  }
  std::vector<RatingRecord> records;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 4) throw Error(ErrorCode::kSchema, "ratings row " + std::to_string(i + 1) + " needs 4 fields");
    double score = 0;
    try {
      std::size_t used = 0;
      score = std::stod(row[3], &used);
      if (used != row[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(ErrorCode::kSchema, "ratings row " + std::to_string(i + 1) + " has a non-numeric score");
    }
    records.push_back({row[0], row[1], row[2], score});
  }
  return RatingMatrix::from_records(records, scale);
}

std::map<std::string, double> mean_scores(const RatingMatrix& m) {
  std::map<std::string, double> out;
  const std::size_t ni = m.items().size();
  const std::size_t ne = m.evaluators().size();
  for (std::size_t s = 0; s < m.systems().size(); ++s) {
    double sum = 0;
    for (std::size_t i = 0; i < ni; ++i) {
      for (std::size_t e = 0; e < ne; ++e) sum += m.score(i, s, e);
    }
    out[m.systems()[s]] = sum / static_cast<double>(ni * ne);
  }
  return out;
}

std::map<std::string, double> win_rate(const RatingMatrix& m) {
  const std::size_t ni = m.items().size();
  const std::size_t ns = m.systems().size();
  const std::size_t ne = m.evaluators().size();
  std::vector<std::size_t> wins(ns, 0);
  for (std::size_t i = 0; i < ni; ++i) {
    for (std::size_t e = 0; e < ne; ++e) {
      double top = m.score(i, 0, e);
      for (std::size_t s = 1; s < ns; ++s) top = std::max(top, m.score(i, s, e));
      for (std::size_t s = 0; s < ns; ++s) {
        if (m.score(i, s, e) == top) ++wins[s];
      }
    }
  }
  std::map<std::string, double> out;
  for (std::size_t s = 0; s < ns; ++s) {
    out[m.systems()[s]] = static_cast<double>(wins[s]) / static_cast<double>(ni * ne);
  }
  return out;
}

std::map<std::string, ExplanationAccuracy> explanation_accuracy(const RatingMatrix& m) {
  if (m.scale() != RatingScale::kExplanation) {
    throw Error(ErrorCode::kInvalidArgument, "accuracy needs the 0/0.5/1 explanation scale");
  }
  std::map<std::string, ExplanationAccuracy> out;
  const std::size_t ni = m.items().size();
  const std::size_t ne = m.evaluators().size();
  for (std::size_t s = 0; s < m.systems().size(); ++s) {
    std::size_t lenient = 0;
    std::size_t strict = 0;
    for (std::size_t i = 0; i < ni; ++i) {
      for (std::size_t e = 0; e < ne; ++e) {
        const double v = m.score(i, s, e);
        if (v >= 0.5) ++lenient;
        if (v == 1.0) ++strict;
      }
    }
    const double n = static_cast<double>(ni * ne);
    out[m.systems()[s]] = {static_cast<double>(lenient) / n, static_cast<double>(strict) / n};
  }
  return out;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::kLengthMismatch, "spearman inputs differ in length");
  if (x.size() < 2) throw Error(ErrorCode::kDegenerateInput, "spearman needs at least two points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) throw Error(ErrorCode::kDegenerateInput, "spearman input is constant");
  return sxy / std::sqrt(sxx * syy);
}

Consistency inter_rater_consistency(const RatingMatrix& m) {
  const std::size_t ne = m.evaluators().size();
  if (ne < 2) throw Error(ErrorCode::kDegenerateInput, "consistency needs at least two evaluators");
  std::vector<std::vector<double>> flat(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    for (std::size_t i = 0; i < m.items().size(); ++i) {
      for (std::size_t s = 0; s < m.systems().size(); ++s) flat[e].push_back(m.score(i, s, e));
    }
  }
  Consistency c;
  double sum = 0;
  for (std::size_t a = 0; a < ne; ++a) {
    for (std::size_t b = a + 1; b < ne; ++b) {
      try {
        sum += spearman(flat[a], flat[b]);
        ++c.pairs_used;
      } catch (const Error& err) {
        if (err.code() != ErrorCode::kDegenerateInput) throw;
        c.skipped_pairs.emplace_back(m.evaluators()[a], m.evaluators()[b]);
      }
    }
  }
  if (c.pairs_used == 0) throw Error(ErrorCode::kDegenerateInput, "no evaluator pair has varying scores");
  c.value = sum / static_cast<double>(c.pairs_used);
  return c;
}

BundleSet make_bundles(std::span<const AnswerItem> items, std::span<const std::string> systems, std::uint64_t seed) {
  BundleSet out;
  std::mt19937_64 rng(seed);
  for (const auto& item : items) {
    std::vector<std::size_t> perm(systems.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (const auto& system : systems) {
      if (!item.answers.contains(system)) {
        throw Error(ErrorCode::kMissingAnswer, "item " + item.item + " has no answer from " + system);
      }
    }
    std::shuffle(perm.begin(), perm.end(), rng);
    Bundle bundle{item.item, {}};
    for (std::size_t slot = 0; slot < perm.size(); ++slot) {
      const std::string& system = systems[perm[slot]];
      bundle.answers.push_back(item.answers.at(system));
      out.key.push_back({item.item, slot, system});
    }
    out.bundles.push_back(std::move(bundle));
  }
  return out;
}

std::vector<AnswerItem> unshuffle(std::span<const Bundle> bundles, std::span<const KeyEntry> key) {
  std::map<std::pair<std::string, std::size_t>, std::string> lookup;
  for (const auto& k : key) lookup[{k.item, k.slot}] = k.system;
  std::vector<AnswerItem> out;
  for (const auto& b : bundles) {
    AnswerItem item{b.item, {}};
    for (std::size_t slot = 0; slot < b.answers.size(); ++slot) {
      const auto it = lookup.find({b.item, slot});
      if (it == lookup.end()) {
        throw Error(ErrorCode::kSchema, "key has no entry for item " + b.item + " slot " + std::to_string(slot));
      }
      item.answers[it->second] = b.answers[slot];
    }
    out.push_back(std::move(item));
  }
  return out;
}

std::string bundles_to_jsonl(std::span<const Bundle> bundles) {
  std::string out;
  for (const auto& b : bundles) {
    nlohmann::json j = {{"item", b.item}, {"answers", b.answers}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<Bundle> bundles_from_jsonl(std::string_view contents) {
  std::vector<Bundle> out;
  for (const auto& line : io::split_lines(contents)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("item").get<std::string>(), j.at("answers").get<std::vector<std::string>>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchema, std::string("bad bundle record: ") + e.what());
    }
  }
  return out;
}

std::string key_to_csv(std::span<const KeyEntry> key) {
  std::string out = "item,slot,system\n";
  for (const auto& k : key) {
    out += io::csv_field(k.item) + "," + std::to_string(k.slot) + "," + io::csv_field(k.system) + "\n";
  }
  return out;
}

std::vector<KeyEntry> key_from_csv(std::string_view contents) {
  const auto rows = io::parse_csv(contents);
  if (rows.empty() || rows[0] != std::vector<std::string>{"item", "slot", "system"}) {
    throw Error(ErrorCode::kSchema, "key CSV needs header item,slot,system");
  }
  std::vector<KeyEntry> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3) throw Error(ErrorCode::kSchema, "key row " + std::to_string(i + 1) + " needs 3 fields");
    try {
      out.push_back({rows[i][0], static_cast<std::size_t>(std::stoul(rows[i][1])), rows[i][2]});
    } catch (const std::exception&) {
      throw Error(ErrorCode::kSchema, "key row " + std::to_string(i + 1) + " has a bad slot");
    }
  }
  return out;
}

std::vector<AnswerItem> answers_from_jsonl(std::string_view contents) {
  std::vector<AnswerItem> out;
  std::size_t line_no = 0;
  for (const auto& line : io::split_lines(contents)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      AnswerItem item{j.at("item").get<std::string>(), j.at("answers").get<std::map<std::string, std::string>>()};
      out.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchema, "answers line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace taiyan
