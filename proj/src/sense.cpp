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

#include "taiyan/sense.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "taiyan/error.hpp"
#include "taiyan/io.hpp"
#include "taiyan/metrics.hpp"

namespace taiyan {

PeriodCorpus PeriodCorpus::load(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw Error(ErrorCode::kIo, "corpus directory not found: " + root.string());
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const auto name = entry.path().filename().string();
    if (std::find(kPeriods.begin(), kPeriods.end(), name) == kPeriods.end()) {
      throw Error(ErrorCode::kSchema, "unknown period directory " + name);
    }
  }
  PeriodCorpus corpus;
  for (std::size_t p = 0; p < kNumPeriods; ++p) {
    const fs::path dir = root / std::string(kPeriods[p]);
    if (!fs::is_directory(dir)) continue;
    std::set<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") files.insert(entry.path());
    }
    for (const auto& f : files) {
      Text doc = from_utf8(io::read_file(f));
      while (!doc.empty() && (doc.back() == U'\n' || doc.back() == U'\r')) doc.pop_back();
      corpus.documents[p].push_back(std::move(doc));
    }
  }
  return corpus;
}

std::vector<ConcordanceHit> concordance(const PeriodCorpus& corpus, TextView keyword, std::size_t window) {
  if (keyword.empty()) throw Error(ErrorCode::kInvalidArgument, "keyword must be nonempty");
  std::vector<ConcordanceHit> hits;
  for (std::size_t p = 0; p < kNumPeriods; ++p) {
    for (const Text& doc : corpus.documents[p]) {
      std::size_t pos = doc.find(keyword);
      while (pos != Text::npos) {
        const std::size_t lo = pos >= window ? pos - window : 0;
        const std::size_t hi = std::min(doc.size(), pos + keyword.size() + window);
        hits.push_back({p, doc.substr(lo, hi - lo)});
        pos = doc.find(keyword, pos + keyword.size());
      }
    }
  }
  return hits;
}

std::vector<SenseCluster> cluster_glosses(std::span<const GlossedHit> glosses, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "theta must lie in (0, 1]");
  std::vector<SenseCluster> clusters;
  for (const auto& g : glosses) {
    if (g.period >= kNumPeriods) throw Error(ErrorCode::kInvalidArgument, "gloss has an unknown period");
    auto it = std::find_if(clusters.begin(), clusters.end(),
                           [&](const SenseCluster& c) { return jaro_winkler(c.representative, g.gloss) >= theta; });
    if (it == clusters.end()) {
      clusters.push_back({g.gloss, {}, {}});
      it = std::prev(clusters.end());
    }
    it->members.push_back(g);
    ++it->count_by_period[g.period];
  }
  std::stable_sort(clusters.begin(), clusters.end(),
                   [](const SenseCluster& a, const SenseCluster& b) { return a.total() > b.total(); });
  return clusters;
}

SenseTrajectory sense_trajectory(std::span<const SenseCluster> clusters, std::size_t top_k) {
  if (top_k == 0) throw Error(ErrorCode::kInvalidArgument, "top_k must be positive");
  SenseTrajectory t;
  for (const auto& c : clusters) {
    for (std::size_t p = 0; p < kNumPeriods; ++p) t.occurrences[p] += c.count_by_period[p];
  }
  for (std::size_t p = 0; p < kNumPeriods; ++p) t.covered[p] = t.occurrences[p] > 0;
  const std::size_t k = std::min(top_k, clusters.size());
  for (std::size_t c = 0; c < k; ++c) {
    t.representatives.push_back(clusters[c].representative);
    std::array<double, kNumPeriods> freq{};
    for (std::size_t p = 0; p < kNumPeriods; ++p) {
      if (t.covered[p]) {
        freq[p] = static_cast<double>(clusters[c].count_by_period[p]) / static_cast<double>(t.occurrences[p]);
      }
    }
    t.frequency.push_back(freq);
  }
  return t;
}

std::string trajectory_csv(const SenseTrajectory& t) {
  std::string out = "period,cluster_representative,frequency\n";
  char buf[32];
  for (std::size_t p = 0; p < kNumPeriods; ++p) {
    for (std::size_t c = 0; c < t.representatives.size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.6f", t.frequency[c][p]);
      out += std::string(kPeriods[p]) + "," + io::csv_field(to_utf8(t.representatives[c])) + "," + buf + "\n";
    }
  }
  return out;
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string trajectory_svg(const SenseTrajectory& t, std::string_view title) {
  constexpr double kWidth = 720, kHeight = 420;
  constexpr double kLeft = 60, kRight = 180, kTop = 40, kBottom = 60;
  constexpr std::array<std::string_view, 6> kColors = {"#1f77b4", "#d62728", "#2ca02c",
                                                       "#ff7f0e", "#9467bd", "#8c564b"};
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto x_of = [&](std::size_t p) { return kLeft + plot_w * static_cast<double>(p) / (kNumPeriods - 1); };
  auto y_of = [&](double f) { return kTop + plot_h * (1.0 - f); };
  char buf[160];

  std::string svg;
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                kWidth, kHeight, kWidth, kHeight);
  svg += buf;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) {
    std::snprintf(buf, sizeof(buf), "<text x=\"%.2f\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">", kLeft + plot_w / 2);
    svg += buf + xml_escape(title) + "</text>\n";
  }
  std::snprintf(buf, sizeof(buf), "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n", kLeft,
                y_of(0), kLeft + plot_w, y_of(0));
  svg += buf;
  std::snprintf(buf, sizeof(buf), "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n", kLeft,
                y_of(0), kLeft, y_of(1));
  svg += buf;
  for (int tick = 0; tick <= 4; ++tick) {
    const double f = tick / 4.0;
    std::snprintf(buf, sizeof(buf), "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" text-anchor=\"end\">%.2f</text>\n",
                  kLeft - 6, y_of(f) + 4, f);
    svg += buf;
  }
  for (std::size_t p = 0; p < kNumPeriods; ++p) {
    std::snprintf(buf, sizeof(buf), "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" text-anchor=\"middle\">", x_of(p),
                  y_of(0) + 20);
    svg += buf + std::string(kPeriods[p]) + (t.covered[p] ? "" : "*") + "</text>\n";
  }
  for (std::size_t c = 0; c < t.representatives.size(); ++c) {
    const auto color = kColors[c % kColors.size()];
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"";
    for (std::size_t p = 0; p < kNumPeriods; ++p) {
      std::snprintf(buf, sizeof(buf), "%s%.2f,%.2f", p == 0 ? "" : " ", x_of(p), y_of(t.frequency[c][p]));
      svg += buf;
    }
    svg += "\"/>\n";
    const double ly = kTop + 18.0 * static_cast<double>(c);
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\" stroke-width=\"2\"/>\n",
                  kWidth - kRight + 16, ly, kWidth - kRight + 36, ly, std::string(color).c_str());
    svg += buf;
    std::snprintf(buf, sizeof(buf), "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\">", kWidth - kRight + 42, ly + 4);
    svg += buf + xml_escape(to_utf8(t.representatives[c])) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void emit_chart(const SenseTrajectory& t, const std::filesystem::path& prefix, std::string_view title) {
  if (t.representatives.empty()) throw Error(ErrorCode::kInvalidArgument, "trajectory has no clusters");
  io::write_file(prefix.string() + ".csv", trajectory_csv(t));
  io::write_file(prefix.string() + ".svg", trajectory_svg(t, title));
}

}  // namespace taiyan
