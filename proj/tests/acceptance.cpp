// Copyright 2026 The Taiyan Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails. `--only 2,5` runs a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "taiyan/checkpoint.hpp"
#include "taiyan/decoder.hpp"
#include "taiyan/human_eval.hpp"
#include "taiyan/io.hpp"
#include "taiyan/metrics.hpp"
#include "taiyan/sft.hpp"
#include "taiyan/trainer.hpp"

using namespace taiyan;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- synthetic punctuation corpus ------------------------------------------

// The rule: "，" after every 4th character, "。" after every 12th.
const Text kAlphabet = U"天地玄黃宇宙洪荒日月盈昃辰宿列張寒來暑往秋收冬藏";

Text rule_document(std::mt19937_64& rng) {
  const int sentences = 1 + static_cast<int>(rng() % 3);
  Text doc;
  for (int i = 0; i < sentences * 12; ++i) {
    doc.push_back(kAlphabet[rng() % kAlphabet.size()]);
    if ((i + 1) % 12 == 0) {
      doc.push_back(U'。');
    } else if ((i + 1) % 4 == 0) {
      doc.push_back(U'，');
    }
  }
  return doc;
}

struct TrainedModel {
  Vocabulary vocab;
  ModelConfig config;
  Parameters<float> params;
};

std::optional<TrainedModel> g_trained;

constexpr int kTrainSteps = 1200;
constexpr int kTrainDocs = 6000;
constexpr int kHeldOut = 200;

Outcome criterion_training() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::vector<Text> docs;
  for (int i = 0; i < kTrainDocs; ++i) docs.push_back(rule_document(rng));
  std::vector<Text> vocab_corpus = docs;
  vocab_corpus.push_back(template_codepoints());
  Vocabulary vocab = build_vocab(vocab_corpus, 1, template_codepoints());

  const ModelConfig cfg = desk_preset(static_cast<int>(vocab.size()));
  TrainConfig tc;
  tc.max_lr = 2e-3;
  tc.total_steps = kTrainSteps;
  tc.warmup_steps = kTrainSteps / 100;
  tc.batch_size = 16;
  tc.seq_len = 96;
  tc.seed = 0;

  const auto pairs = make_punctuation_pairs(docs);
  std::vector<TrainingSequence> data;
  for (const auto& e : pairs.examples) {
    if (auto s = sft_sequence(serialize_for_training(e, vocab), tc.seq_len)) data.push_back(std::move(*s));
  }
  auto params = Parameters<float>::initialized(cfg, 0);
  const auto log = train(params, cfg, data, tc);
  const double train_seconds = seconds_since(t0);

  std::mt19937_64 held_rng(77);
  std::vector<Text> gold, pred;
  for (int i = 0; i < kHeldOut; ++i) {
    gold.push_back(rule_document(held_rng));
    pred.push_back(punctuate(params, cfg, vocab, strip_marks(gold.back())));
  }
  const auto report = seg_punct_corpus(gold, pred);
  const double punct = report.micro.punctuation.f1();
  const double seg = report.micro.segmentation.f1();
  const double elapsed = seconds_since(t0);

  double early = 0, late = 0;
  for (int s = 0; s < 20; ++s) {
    early += log[static_cast<std::size_t>(40 + s)].loss / 20;
    late += log[log.size() - 20 + static_cast<std::size_t>(s)].loss / 20;
  }
  g_trained = TrainedModel{std::move(vocab), cfg, std::move(params)};
  const bool pass = punct >= 0.95 && seg >= punct && report.text_errors == 0 && elapsed < 900.0 &&
                    kTrainSteps <= 2000 && late < early;
  return {pass, format("%d steps, %zu examples, loss %.4f -> %.4f; held-out %d: punct F1 %.4f, seg F1 %.4f, "
                       "text errors %zu; train %.0fs, total %.0fs (limit 900s)",
                       kTrainSteps, data.size(), early, late, kHeldOut, punct, seg, report.text_errors, train_seconds,
                       elapsed)};
}

// ---- reconstruction fuzz ---------------------------------------------------

bool grammar_ok(TextView out) {
  if (out.empty() || is_mark(out.front()) || !is_mark(out.back())) return false;
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (is_mark(out[i]) && is_mark(out[i - 1])) return false;
  }
  return true;
}

Outcome criterion_reconstruction() {
  const auto t0 = std::chrono::steady_clock::now();
  if (!g_trained) criterion_training();
  const auto t_fuzz = std::chrono::steady_clock::now();

  // Random-init desk model over the first 500 unified ideographs.
  std::vector<Text> chars(1);
  for (char32_t c = 0x4E00; c < 0x4E00 + 500; ++c) chars[0].push_back(c);
  chars[0] += template_codepoints();
  const Vocabulary random_vocab = build_vocab(chars, 1);
  const ModelConfig random_cfg = desk_preset(static_cast<int>(random_vocab.size()));
  const auto random_params = Parameters<float>::initialized(random_cfg, 1);

  std::mt19937_64 rng(31337);
  std::size_t reconstructed = 0, grammatical = 0, total = 0;
  for (int model = 0; model < 2; ++model) {
    for (int i = 0; i < 1000; ++i) {
      const std::size_t len = 1 + rng() % 200;
      Text src;
      for (std::size_t k = 0; k < len; ++k) {
        // Half the characters come from the training alphabet, half from the
        // whole CJK block, so both in- and out-of-vocabulary paths run.
        src.push_back(rng() % 2 == 0 ? kAlphabet[rng() % kAlphabet.size()]
                                     : static_cast<char32_t>(0x4E00 + rng() % (0x9FFF - 0x4E00 + 1)));
      }
      const Text out = model == 0 ? punctuate(random_params, random_cfg, random_vocab, src)
                                  : punctuate(g_trained->params, g_trained->config, g_trained->vocab, src);
      ++total;
      if (strip_marks(out) == src) ++reconstructed;
      if (grammar_ok(out)) ++grammatical;
    }
  }
  const double fuzz_seconds = seconds_since(t_fuzz);
  const bool pass = reconstructed == total && grammatical == total && fuzz_seconds < 120.0;
  return {pass, format("random-init + trained desk models, %zu strings each: reconstruction %zu/%zu, grammar %zu/%zu; "
                       "fuzz %.1fs (limit 120s), incl. model setup %.1fs",
                       total / 2, reconstructed, total, grammatical, total, fuzz_seconds, seconds_since(t0))};
}

// ---- gradient check --------------------------------------------------------

Outcome criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig cfg;
  cfg.n_layers = 1;
  cfg.d_model = 4;
  cfg.n_heads = 2;
  cfg.d_ff = default_d_ff(4);
  cfg.vocab_size = 12;
  cfg.max_seq_len = 16;
  const auto params = Parameters<double>::initialized(cfg, 0);
  std::mt19937 rng(0);
  std::vector<TrainingSequence> seqs(3);
  for (auto& s : seqs) {
    for (int t = 0; t < 9; ++t) s.tokens.push_back(static_cast<TokenId>(kNumSpecials + rng() % 7));
    s.loss_mask.assign(8, 1);
  }
  const TrainingSequence* members[] = {&seqs[0], &seqs[1], &seqs[2]};
  const auto result = gradient_check(params, cfg, make_batch(members));
  std::string worst_name;
  double worst = -1;
  bool all = true;
  for (const auto& [name, err] : result.per_tensor) {
    all = all && err < 1e-3;
    if (err > worst) {
      worst = err;
      worst_name = name;
    }
  }
  const double elapsed = seconds_since(t0);
  return {all && elapsed < 60.0, format("%zu tensors, max relative error %.3e (%s), limit 1e-3; %.2fs (limit 60s)",
                                        result.per_tensor.size(), worst, worst_name.c_str(), elapsed)};
}

// ---- schedule --------------------------------------------------------------

Outcome criterion_schedule() {
  const TrainConfig cfg = pretrain_defaults(100000);
  const double at_warmup = cosine_lr(cfg.warmup_steps, cfg);
  const double at_total = cosine_lr(cfg.total_steps, cfg);
  const int mid = cfg.warmup_steps + (cfg.total_steps - cfg.warmup_steps) / 2;
  const double at_mid = cosine_lr(mid, cfg);
  bool monotone = true;
  double prev = at_warmup;
  for (int i = 1; i <= 1000; ++i) {
    const int step = cfg.warmup_steps + static_cast<int>(static_cast<long long>(cfg.total_steps - cfg.warmup_steps) * i / 1000);
    const double lr = cosine_lr(step, cfg);
    monotone = monotone && lr <= prev;
    prev = lr;
  }
  const bool pass = at_warmup == 2e-4 && at_total == 0.0 && std::abs(at_mid - 1e-4) <= 1e-12 && monotone;
  return {pass, format("lr(warmup)=%.17g, lr(total)=%.17g, lr(mid)-1e-4=%.3e, non-increasing over 1000 samples: %s",
                       at_warmup, at_total, at_mid - 1e-4, monotone ? "yes" : "no")};
}

// ---- ALiBi -----------------------------------------------------------------

Outcome criterion_alibi() {
  const auto slopes = alibi_slopes(8);
  bool exact = slopes.size() == 8;
  for (int h = 0; h < 8 && exact; ++h) exact = slopes[static_cast<std::size_t>(h)] == std::ldexp(1.0, -(h + 1));

  const ModelConfig cfg = desk_preset(40);
  const auto params = Parameters<double>::initialized(cfg, 5);
  std::mt19937 rng(8);
  std::vector<TokenId> window(24);
  for (auto& t : window) t = static_cast<TokenId>(kNumSpecials + rng() % 35);
  ForwardCache<double> base;
  forward_batch<double>(params, cfg, window, 1, base, true);
  double worst = 0;
  for (int shift : {1, 7, 31}) {
    std::vector<TokenId> shifted(static_cast<std::size_t>(shift), kPad);
    shifted.insert(shifted.end(), window.begin(), window.end());
    ForwardCache<double> moved;
    forward_batch<double>(params, cfg, shifted, 1, moved, true);
    for (int h = 0; h < cfg.n_heads; ++h) {
      const auto& a = base.layers[0].scores[static_cast<std::size_t>(h)];
      const auto& b = moved.layers[0].scores[static_cast<std::size_t>(h)];
      for (int i = 0; i < 24; ++i) {
        for (int j = 0; j <= i; ++j) worst = std::max(worst, std::abs(a(i, j) - b(i + shift, j + shift)));
      }
    }
  }
  return {exact && worst <= 1e-5,
          format("slopes == [2^-1..2^-8] exactly: %s; first-layer attention logits under shifts 1/7/31: max |diff| "
                 "%.3e (limit 1e-5)",
                 exact ? "yes" : "no", worst)};
}

// ---- metric oracles --------------------------------------------------------

std::vector<char32_t> boundary_table(TextView s) {
  std::vector<char32_t> table(1, 0);
  for (char32_t c : s) {
    if (is_mark(c)) {
      table.back() = c;
    } else {
      table.push_back(0);
    }
  }
  return table;
}

Outcome criterion_metrics() {
  std::mt19937 rng(123);
  int agree = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Text gold, pred;
    const std::size_t n = 1 + rng() % 50;
    for (std::size_t i = 0; i < n; ++i) {
      const char32_t c = kAlphabet[rng() % kAlphabet.size()];
      gold.push_back(c);
      pred.push_back(c);
      if (rng() % 3 == 0) gold.push_back(kMarkSet[rng() % 7]);
      if (rng() % 3 == 0) pred.push_back(kMarkSet[rng() % 7]);
    }
    const auto g = boundary_table(gold), p = boundary_table(pred);
    PRF seg, punct;
    for (std::size_t b = 0; b < g.size(); ++b) {
      seg.tp += g[b] && p[b];
      seg.fp += !g[b] && p[b];
      seg.fn += g[b] && !p[b];
      punct.tp += g[b] && g[b] == p[b];
      punct.fp += p[b] && g[b] != p[b];
      punct.fn += g[b] && g[b] != p[b];
    }
    const auto fast = seg_punct_f1(gold, pred);
    agree += fast.segmentation == seg && fast.punctuation == punct;
  }

  const std::vector<Text> ref = {U"abcd"}, hyp = {U"abcde"};
  const double b = bleu(ref, hyp);
  const std::vector<Text> same = {U"州城西南隅有黃鶴樓者", U"甲乙"};
  const std::vector<Text> disjoint = {U"丙丁戊己", U"庚辛"};
  const double chrf_same = chrf(same, same);
  const double chrf_disjoint = chrf(same, disjoint);
  const double jw = jaro_winkler(U"MARTHA", U"MARHTA");
  const std::vector<double> x = {1, 2, 3, 4}, y = {1, 3, 2, 4};
  const double rho = spearman(x, y);
  const std::vector<RatingRecord> tie = {{"i", "A", "e", 4}, {"i", "B", "e", 4}};
  const auto wins = win_rate(RatingMatrix::from_records(tie, RatingScale::kFivePoint));

  const bool pass = agree == 200 && std::abs(b - 66.87) <= 0.01 && chrf_same == 100.0 && chrf_disjoint == 0.0 &&
                    std::abs(jw - 0.9611) <= 0.0001 && rho == 0.8 && wins.at("A") == 1.0 && wins.at("B") == 1.0;
  return {pass, format("brute-force F1 agreement %d/200; BLEU %.4f; chrF identical %.1f, disjoint %.1f; JW %.6f; "
                       "Spearman %.17g; tie win rates %.1f/%.1f",
                       agree, b, chrf_same, chrf_disjoint, jw, rho, wins.at("A"), wins.at("B"))};
}

// ---- pipeline determinism --------------------------------------------------

int quiet_run(const std::vector<std::string>& args) {
  std::ostringstream sink;
  auto* old_out = std::cout.rdbuf(sink.rdbuf());
  auto* old_err = std::cerr.rdbuf(sink.rdbuf());
  const int code = cli::run(args);
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return code;
}

Outcome criterion_determinism() {
  const fs::path fixtures = TAIYAN_FIXTURES;
  const fs::path dir = fs::temp_directory_path() / "taiyan_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto p = [&](const char* f) { return (dir / f).string(); };
  const std::string corpus = (fixtures / "sense").string();

  int failures = quiet_run({"vocab", "--corpus", corpus, "--out", p("vocab.txt")});
  io::write_file(p("config.json"),
                 R"({"model": {"preset": "desk"}, "train": {"total_steps": 20, "batch_size": 4, "seq_len": 64}})");
  for (const char* out : {"a.ckpt", "b.ckpt"}) {
    failures += quiet_run({"train", "--mode", "pretrain", "--corpus", corpus, "--vocab", p("vocab.txt"), "--config",
                           p("config.json"), "--seed", "0", "--threads", "1", "--out", p(out), "--log-every", "0"});
  }
  for (const char* out : {"sa", "sb"}) {
    failures += quiet_run({"sense-drift", "--corpus", corpus, "--keyword", "文章", "--glosses",
                           (fixtures / "sense_glosses.txt").string(), "--threads", "1", "--out", p(out)});
  }
  if (failures != 0) {
    fs::remove_all(dir);
    return {false, "a pipeline command exited nonzero"};
  }
  const bool ckpt_same = io::read_file(p("a.ckpt")) == io::read_file(p("b.ckpt"));
  const bool csv_same = io::read_file(p("sa.csv")) == io::read_file(p("sb.csv"));

  // Han (period 2) favours the first-attested sense, Tang (period 4) the later one.
  std::map<std::pair<std::string, std::string>, double> freq;
  for (const auto& row : io::parse_csv(io::read_file(p("sa.csv")))) {
    if (row.size() == 3 && row[0] != "period") freq[{row[0], row[1]}] = std::stod(row[2]);
  }
  const std::string old_sense = "錯雜的花紋色彩", new_sense = "詩文著作";
  const bool crosses = freq[{"Han", old_sense}] > freq[{"Han", new_sense}] &&
                       freq[{"Tang", new_sense}] > freq[{"Tang", old_sense}] &&
                       freq[{"Pre-Qin", old_sense}] == 1.0 && freq[{"Qing", new_sense}] == 1.0;
  fs::remove_all(dir);
  return {ckpt_same && csv_same && crosses,
          format("train checkpoints byte-identical: %s; sense-drift CSVs byte-identical: %s; "
                 "trajectory crosses between Han and Tang: %s",
                 ckpt_same ? "yes" : "no", csv_same ? "yes" : "no", crosses ? "yes" : "no")};
}

// ---- checkpoint round trip -------------------------------------------------

Outcome criterion_checkpoint() {
  const ModelConfig cfg = desk_preset(300);
  const auto params = Parameters<float>::initialized(cfg, 42);
  const fs::path path = fs::temp_directory_path() / "taiyan_acceptance.ckpt";
  save_checkpoint(path, cfg, params);
  const auto loaded = load_checkpoint(path);
  fs::remove(path);
  std::mt19937 rng(10);
  int identical = 0;
  for (int i = 0; i < 10; ++i) {
    std::vector<TokenId> tokens(1 + rng() % 200);
    for (auto& t : tokens) t = static_cast<TokenId>(rng() % 300);
    const auto a = forward(params, cfg, tokens);
    const auto b = forward(loaded.params, loaded.config, tokens);
    identical += a.size() == b.size() &&
                 std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) == 0;
  }
  return {identical == 10 && loaded.config == cfg,
          format("%d/10 random inputs give bit-identical logits after save/load", identical)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--only") {
      std::stringstream list(argv[i + 1]);
      for (std::string item; std::getline(list, item, ',');) only.insert(std::stoi(item));
    }
  }
  // Cheap criteria first; the trained model from 2 is reused by 1.
  const std::vector<std::tuple<int, const char*, std::function<Outcome()>>> criteria = {
      {3, "gradient correctness", criterion_gradients},
      {4, "cosine schedule", criterion_schedule},
      {5, "ALiBi slopes and relative invariance", criterion_alibi},
      {6, "metric oracles", criterion_metrics},
      {8, "checkpoint round trip", criterion_checkpoint},
      {7, "pipeline determinism", criterion_determinism},
      {2, "desk-scale punctuation training", criterion_training},
      {1, "reconstruction guarantee", criterion_reconstruction},
  };
  int failed = 0;
  for (const auto& [id, name, fn] : criteria) {
    if (!only.empty() && !only.contains(id)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %d %s: %s -- %s\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
