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

#include "cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "taiyan/checkpoint.hpp"
#include "taiyan/decoder.hpp"
#include "taiyan/error.hpp"
#include "taiyan/human_eval.hpp"
#include "taiyan/inference.hpp"
#include "taiyan/io.hpp"
#include "taiyan/metrics.hpp"
#include "taiyan/sense.hpp"
#include "taiyan/sft.hpp"
#include "taiyan/trainer.hpp"

namespace taiyan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& msg) { throw Error(ErrorCode::kSchema, msg); }

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "SHA-256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("TAIYAN_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

// Runs fn(i) for i in [0, n); results must be written to per-index slots so
// the output order never depends on scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& args) {
    doc_["command"] = std::move(command);
    doc_["argv"] = args;
    doc_["tool_version"] = kToolVersion;
    doc_["inputs"] = json::object();
    doc_["outputs"] = json::array();
  }
  void input(const fs::path& path) { doc_["inputs"][path.string()] = sha256_hex(io::read_file(path)); }
  void output(const fs::path& path) { doc_["outputs"].push_back(path.string()); }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }
  void write(const fs::path& path) const { io::write_file(path, doc_.dump(2) + "\n"); }

 private:
  json doc_;
};

fs::path with_suffix(const fs::path& base, const std::string& suffix) { return fs::path(base.string() + suffix); }

std::vector<fs::path> text_files(const fs::path& root, const std::string& extension) {
  if (!fs::exists(root)) throw Error(ErrorCode::kIo, "no such file or directory: " + root.string());
  if (!fs::is_directory(root)) return {root};
  std::set<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == extension) files.insert(entry.path());
  }
  return {files.begin(), files.end()};
}

std::vector<Text> read_text_lines(const fs::path& path) {
  std::vector<Text> out;
  for (const auto& line : io::split_lines(io::read_file(path))) out.push_back(from_utf8(line));
  return out;
}

json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    schema_error(what + ": " + e.what());
  }
}

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) schema_error(where + ": missing field " + key);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    schema_error(where + ": field " + key + " has the wrong type");
  }
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) schema_error(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; })) {
      schema_error(where + ": unknown key " + key);
    }
  }
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

Vocabulary load_vocab(const fs::path& path) { return Vocabulary::load(path); }

Checkpoint load_model(const fs::path& ckpt, const Vocabulary& vocab) {
  Checkpoint c = load_checkpoint(ckpt);
  if (static_cast<std::size_t>(c.config.vocab_size) != vocab.size()) {
    throw Error(ErrorCode::kBadCheckpoint, "checkpoint expects " + std::to_string(c.config.vocab_size) +
                                               " tokens but the vocabulary has " + std::to_string(vocab.size()));
  }
  return c;
}

// ---- vocab ----------------------------------------------------------------

struct VocabOptions {
  std::vector<std::string> corpus;
  std::string out;
  std::size_t min_count = 1;
};

int cmd_vocab(const VocabOptions& o, const std::vector<std::string>& args) {
  Manifest manifest("vocab", args);
  VocabBuilder builder;
  for (const auto& root : o.corpus) {
    const bool jsonl = fs::path(root).extension() == ".jsonl";
    for (const auto& file : text_files(root, jsonl ? ".jsonl" : ".txt")) {
      manifest.input(file);
      const std::string contents = io::read_file(file);
      if (file.extension() != ".jsonl") {
        builder.add(from_utf8(contents));
        continue;
      }
      for (const auto& line : io::split_lines(contents)) {
        json j;
        try {
          j = json::parse(line);
        } catch (const json::exception&) {
          continue;  // validation happens at training time
        }
        if (!j.is_object()) continue;
        for (const char* key : {"input", "instruction", "output"}) {
          if (j.contains(key) && j[key].is_string()) builder.add(from_utf8(j[key].get<std::string>()));
        }
      }
    }
  }
  const Vocabulary vocab = builder.finish(o.min_count, template_codepoints());
  vocab.save(o.out);
  manifest.set("config", {{"min_count", o.min_count}});
  manifest.set("vocab_size", vocab.size());
  manifest.output(o.out);
  manifest.write(with_suffix(o.out, ".manifest.json"));
  std::cerr << "vocabulary: " << vocab.size() << " tokens -> " << o.out << "\n";
  return kExitOk;
}

// ---- train ----------------------------------------------------------------

struct TrainOptions {
  std::string mode = "pretrain";
  std::vector<std::string> corpus;
  std::string vocab;
  std::string config;
  std::string out;
  std::string init;
  std::string log;
  std::uint64_t seed = 0;
  int log_every = 100;
};

ModelConfig model_from_json(const json& j, std::size_t vocab_size) {
  check_keys(j, {"preset", "n_layers", "d_model", "n_heads", "d_ff", "vocab_size", "max_seq_len"}, "model");
  const auto vocab = static_cast<int>(vocab_size);
  ModelConfig cfg = desk_preset(vocab);
  if (j.contains("preset")) {
    const auto preset = field<std::string>(j, "preset", "model");
    if (preset == "paper") {
      cfg = paper_scale_preset(vocab);
    } else if (preset != "desk") {
      schema_error("model: unknown preset " + preset);
    }
  }
  const bool custom_d = j.contains("d_model");
  if (j.contains("n_layers")) cfg.n_layers = field<int>(j, "n_layers", "model");
  if (custom_d) cfg.d_model = field<int>(j, "d_model", "model");
  if (j.contains("n_heads")) cfg.n_heads = field<int>(j, "n_heads", "model");
  cfg.d_ff = j.contains("d_ff") ? field<int>(j, "d_ff", "model") : (custom_d ? default_d_ff(cfg.d_model) : cfg.d_ff);
  if (j.contains("max_seq_len")) cfg.max_seq_len = field<int>(j, "max_seq_len", "model");
  if (j.contains("vocab_size") && field<int>(j, "vocab_size", "model") != vocab) {
    schema_error("model: vocab_size disagrees with the vocabulary file");
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    schema_error(std::string("model: ") + e.what());
  }
  return cfg;
}

json train_to_json(const TrainConfig& t) {
  return {{"max_lr", t.max_lr},           {"total_steps", t.total_steps},   {"warmup_steps", t.warmup_steps},
          {"batch_size", t.batch_size},   {"seq_len", t.seq_len},           {"repeat_factor", t.repeat_factor},
          {"seed", t.seed},               {"beta1", t.beta1},               {"beta2", t.beta2},
          {"adam_epsilon", t.adam_epsilon}, {"weight_decay", t.weight_decay}, {"grad_clip", t.grad_clip}};
}

int cmd_train(const TrainOptions& o, const std::vector<std::string>& args) {
  if (o.mode != "pretrain" && o.mode != "sft") schema_error("--mode must be pretrain or sft");
  const bool sft = o.mode == "sft";
  Manifest manifest("train", args);
  const Vocabulary vocab = load_vocab(o.vocab);
  manifest.input(o.vocab);

  json cfg_json = json::object();
  if (!o.config.empty()) {
    cfg_json = parse_json(io::read_file(o.config), o.config);
    manifest.input(o.config);
  }
  check_keys(cfg_json, {"model", "train"}, "config");

  ModelConfig model;
  Parameters<float> params;
  if (!o.init.empty()) {
    Checkpoint c = load_model(o.init, vocab);
    manifest.input(o.init);
    if (cfg_json.contains("model") && model_from_json(cfg_json["model"], vocab.size()) != c.config) {
      schema_error("config model section disagrees with the --init checkpoint");
    }
    model = c.config;
    params = std::move(c.params);
  } else {
    model = model_from_json(cfg_json.value("model", json::object()), vocab.size());
    params = Parameters<float>::initialized(model, o.seed);
  }

  const json tj = cfg_json.value("train", json::object());
  check_keys(tj,
             {"max_lr", "total_steps", "warmup_steps", "batch_size", "seq_len", "repeat_factor", "beta1", "beta2",
              "adam_epsilon", "weight_decay", "grad_clip", "window_chars"},
             "train");
  TrainConfig tc = sft ? sft_defaults(0) : pretrain_defaults(0);
  tc.seed = o.seed;
  tc.seq_len = std::min(tc.seq_len, model.max_seq_len);
  tc.total_steps = 1000;
  if (tj.contains("total_steps")) {
    if (tj["total_steps"].is_string() && tj["total_steps"] == "auto") {
      tc.total_steps = kDeriveSteps;
    } else {
      tc.total_steps = field<int>(tj, "total_steps", "train");
    }
  }
  if (tj.contains("max_lr")) tc.max_lr = field<double>(tj, "max_lr", "train");
  if (tj.contains("batch_size")) tc.batch_size = field<int>(tj, "batch_size", "train");
  if (tj.contains("seq_len")) tc.seq_len = field<int>(tj, "seq_len", "train");
  if (tj.contains("repeat_factor")) tc.repeat_factor = field<int>(tj, "repeat_factor", "train");
  if (tj.contains("beta1")) tc.beta1 = field<double>(tj, "beta1", "train");
  if (tj.contains("beta2")) tc.beta2 = field<double>(tj, "beta2", "train");
  if (tj.contains("adam_epsilon")) tc.adam_epsilon = field<double>(tj, "adam_epsilon", "train");
  if (tj.contains("weight_decay")) tc.weight_decay = field<double>(tj, "weight_decay", "train");
  if (tj.contains("grad_clip")) tc.grad_clip = field<double>(tj, "grad_clip", "train");
  const auto window_chars = tj.contains("window_chars") ? field<std::size_t>(tj, "window_chars", "train")
                                                       : kDefaultWindowChars;

  std::vector<TrainingSequence> data;
  json data_report = json::object();
  if (!sft) {
    std::vector<std::vector<TokenId>> docs;
    for (const auto& root : o.corpus) {
      for (const auto& file : text_files(root, ".txt")) {
        manifest.input(file);
        docs.push_back(vocab.encode(from_utf8(io::read_file(file))));
      }
    }
    data = pack_documents(docs, tc.seq_len);
    data_report["documents"] = docs.size();
  } else {
    std::vector<TaskExample> examples;
    std::size_t rejected = 0;
    for (const auto& root : o.corpus) {
      if (fs::path(root).extension() == ".jsonl") {
        manifest.input(root);
        auto validated = validate_task_jsonl(root);
        rejected += validated.rejections.size();
        const auto report = with_suffix(o.out, ".rejections.csv");
        io::write_file(report, rejection_report_csv(validated.rejections));
        manifest.output(report);
        examples.insert(examples.end(), validated.examples.begin(), validated.examples.end());
        continue;
      }
      std::vector<Text> docs;
      for (const auto& file : text_files(root, ".txt")) {
        manifest.input(file);
        docs.push_back(from_utf8(io::read_file(file)));
      }
      auto pairs = make_punctuation_pairs(docs, window_chars);
      data_report["skipped_unmarked"] = pairs.skipped_unmarked;
      data_report["skipped_malformed"] = pairs.skipped_malformed;
      data_report["skipped_oversize"] = pairs.skipped_oversize;
      examples.insert(examples.end(), pairs.examples.begin(), pairs.examples.end());
    }
    std::size_t too_long = 0;
    for (const auto& e : examples) {
      if (auto seq = sft_sequence(serialize_for_training(e, vocab), tc.seq_len)) {
        data.push_back(std::move(*seq));
      } else {
        ++too_long;
      }
    }
    data_report["examples"] = examples.size();
    data_report["rejected_records"] = rejected;
    data_report["skipped_too_long"] = too_long;
  }
  data_report["sequences"] = data.size();
  if (data.empty()) throw Error(ErrorCode::kEmptyCorpus, "no training sequences were produced");

  tc.total_steps = resolved_total_steps(tc, data.size());
  tc.warmup_steps = tj.contains("warmup_steps") ? field<int>(tj, "warmup_steps", "train") : tc.total_steps / 100;
  try {
    tc.validate(model);
  } catch (const Error& e) {
    schema_error(std::string("train: ") + e.what());
  }

  const auto log = train(params, model, data, tc, [&](const LossRecord& r) {
    if (o.log_every > 0 && (r.step % o.log_every == 0 || r.step + 1 == tc.total_steps)) {
      std::fprintf(stderr, "step %d lr %.3e loss %.4f\n", r.step, r.lr, r.loss);
    }
  });

  const std::string bytes = encode_checkpoint(model, params);
  io::write_file(o.out, bytes);
  const fs::path log_path = o.log.empty() ? with_suffix(o.out, ".loss.csv") : fs::path(o.log);
  io::write_file(log_path, loss_log_csv(log));
  manifest.output(o.out);
  manifest.output(log_path);
  manifest.set("mode", o.mode);
  manifest.set("seed", o.seed);
  manifest.set("config", {{"model", parse_json(config_to_json(model), "model")}, {"train", train_to_json(tc)}});
  manifest.set("data", data_report);
  manifest.set("checkpoint_sha256", sha256_hex(bytes));
  manifest.write(with_suffix(o.out, ".manifest.json"));
  return kExitOk;
}

// ---- punctuate / infer ----------------------------------------------------

struct PunctuateOptions {
  std::string ckpt;
  std::string vocab;
  std::string in;
  std::string out;
  std::string flags;
  std::string flags_out;
  int threads = 0;
};

int cmd_punctuate(const PunctuateOptions& o, const std::vector<std::string>& args) {
  const Vocabulary vocab = load_vocab(o.vocab);
  const Checkpoint model = load_model(o.ckpt, vocab);
  std::string raw;
  if (o.in.empty() || o.in == "-") {
    raw.assign(std::istreambuf_iterator<char>(std::cin), {});
  } else {
    raw = io::read_file(o.in);
  }
  std::vector<Text> docs;
  for (const auto& line : io::split_lines(raw)) docs.push_back(strip_marks(from_utf8(line)));

  std::vector<Text> gold;
  if (!o.flags.empty()) {
    gold = read_text_lines(o.flags);
    if (gold.size() != docs.size()) {
      throw Error(ErrorCode::kLengthMismatch, "gold file has " + std::to_string(gold.size()) + " documents, input has " +
                                                  std::to_string(docs.size()));
    }
  }

  std::vector<Text> outputs(docs.size());
  parallel_for(docs.size(), resolve_threads(o.threads), [&](std::size_t i) {
    if (!docs[i].empty()) outputs[i] = punctuate(model.params, model.config, vocab, docs[i]);
  });

  std::string text;
  for (const auto& t : outputs) text += to_utf8(t) + "\n";
  if (o.out.empty()) {
    std::cout << text;
  } else {
    io::write_file(o.out, text);
  }

  if (!gold.empty()) {
    std::string csv = "document,boundary,kind,left_context,right_context\n";
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (docs[i].empty()) continue;
      for (const auto& f : post_edit_flags(gold[i], outputs[i])) {
        csv += std::to_string(i + 1) + "," + std::to_string(f.boundary) + "," + io::csv_field(f.kind) + "," +
               io::csv_field(to_utf8(f.left_context)) + "," + io::csv_field(to_utf8(f.right_context)) + "\n";
      }
    }
    if (o.flags_out.empty()) {
      std::cerr << csv;
    } else {
      io::write_file(o.flags_out, csv);
    }
  }

  if (!o.out.empty()) {
    Manifest manifest("punctuate", args);
    manifest.input(o.vocab);
    manifest.input(o.ckpt);
    if (!o.in.empty() && o.in != "-") manifest.input(o.in);
    if (!o.flags.empty()) manifest.input(o.flags);
    manifest.output(o.out);
    if (!o.flags_out.empty()) manifest.output(o.flags_out);
    manifest.set("checkpoint_sha256", sha256_hex(io::read_file(o.ckpt)));
    manifest.write(with_suffix(o.out, ".manifest.json"));
  }
  return kExitOk;
}

struct InferOptions {
  std::string ckpt;
  std::string vocab;
  std::string task;
  std::string input;
  std::string word;
  int max_new = kDefaultMaxNew;
};

int cmd_infer(const InferOptions& o) {
  const auto task = parse_task(o.task);
  if (!task) schema_error("unknown task " + o.task);
  const Vocabulary vocab = load_vocab(o.vocab);
  const Checkpoint model = load_model(o.ckpt, vocab);
  std::cout << to_utf8(infer_task(model, vocab, *task, from_utf8(o.input), from_utf8(o.word), o.max_new)) << "\n";
  return kExitOk;
}

// ---- eval -----------------------------------------------------------------

json seg_punct_report(const fs::path& gold_path, const fs::path& pred_path, bool macro) {
  const auto gold = read_text_lines(gold_path);
  const auto pred = read_text_lines(pred_path);
  if (gold.size() != pred.size()) {
    throw Error(ErrorCode::kLengthMismatch, pred_path.string() + " has " + std::to_string(pred.size()) +
                                                " lines, gold has " + std::to_string(gold.size()));
  }
  const auto r = seg_punct_corpus(gold, pred);
  return {{"samples", r.samples},
          {"text_errors", r.text_errors},
          {"text_error_rate", r.text_error_rate()},
          {"seg_p", r.micro.segmentation.precision()},
          {"seg_r", r.micro.segmentation.recall()},
          {"seg_f1", macro ? r.seg_macro_f1 : r.micro.segmentation.f1()},
          {"punct_p", r.micro.punctuation.precision()},
          {"punct_r", r.micro.punctuation.recall()},
          {"punct_f1", macro ? r.punct_macro_f1 : r.micro.punctuation.f1()},
          {"averaging", macro ? "macro" : "micro"},
          {"degenerate", r.micro.segmentation.degenerate()}};
}

std::set<std::string> label_set(const json& j, const std::string& where) {
  const auto labels = field<std::vector<std::string>>(j, "allusions", where);
  return {labels.begin(), labels.end()};
}

json allusion_report(const fs::path& gold_path, const fs::path& pred_path) {
  std::vector<AllusionGold> golds;
  std::vector<AllusionPrediction> preds;
  std::size_t n = 0;
  for (const auto& line : io::split_lines(io::read_file(gold_path))) {
    const std::string where = gold_path.string() + ":" + std::to_string(++n);
    const json j = parse_json(line, where);
    AllusionGold g{from_utf8(field<std::string>(j, "text", where)), field<bool>(j, "has_allusion", where),
                   label_set(j, where)};
    if (g.has_allusion != !g.allusion_ids.empty()) schema_error(where + ": has_allusion disagrees with allusions");
    golds.push_back(std::move(g));
  }
  n = 0;
  for (const auto& line : io::split_lines(io::read_file(pred_path))) {
    const std::string where = pred_path.string() + ":" + std::to_string(++n);
    const json j = parse_json(line, where);
    preds.push_back({field<bool>(j, "has_allusion", where), label_set(j, where)});
  }
  const auto s = allusion_scores(golds, preds);
  return {{"samples", golds.size()},
          {"detection_acc", s.detection_accuracy},
          {"ident_p", s.identification.precision()},
          {"ident_r", s.identification.recall()},
          {"ident_f1", s.identification.f1()},
          {"degenerate", s.identification.degenerate()}};
}

json translate_report(const fs::path& refs_path, const fs::path& hyps_path, bool smooth) {
  const auto refs = read_text_lines(refs_path);
  const auto hyps = read_text_lines(hyps_path);
  return {{"samples", refs.size()}, {"bleu", bleu(refs, hyps, smooth)}, {"chrf", chrf(refs, hyps)}};
}

json ratings_report(const fs::path& path, RatingScale scale) {
  const auto m = parse_ratings_csv(io::read_file(path), scale);
  json out;
  out["mean"] = mean_scores(m);
  if (scale == RatingScale::kFivePoint) {
    out["win_rate"] = win_rate(m);
  } else {
    json acc = json::object();
    for (const auto& [s, a] : explanation_accuracy(m)) acc[s] = {{"accuracy", a.accuracy}, {"strict_accuracy", a.strict_accuracy}};
    out["accuracy"] = acc;
  }
  if (m.evaluators().size() >= 2) {
    const auto c = inter_rater_consistency(m);
    json skipped = json::array();
    for (const auto& [a, b] : c.skipped_pairs) skipped.push_back({a, b});
    out["consistency"] = {{"spearman_pairwise_mean", c.value}, {"pairs_used", c.pairs_used}, {"skipped_pairs", skipped}};
  }
  return out;
}

std::string csv_table(const std::vector<std::string>& columns, const std::vector<std::pair<std::string, json>>& rows) {
  std::string out = "system";
  for (const auto& c : columns) out += "," + c;
  out += "\n";
  for (const auto& [system, r] : rows) {
    out += io::csv_field(system);
    for (const auto& c : columns) out += "," + fmt(r.at(c).get<double>());
    out += "\n";
  }
  return out;
}

const std::vector<std::string> kSegPunctColumns = {"text_error_rate", "seg_p",   "seg_r",  "seg_f1",
                                                   "punct_p",         "punct_r", "punct_f1"};
const std::vector<std::string> kAllusionColumns = {"detection_acc", "ident_f1"};
const std::vector<std::string> kTranslateColumns = {"bleu", "chrf"};

void print_report(const json& report, const std::string& out_prefix, const std::vector<std::string>& columns,
                  const std::string& name) {
  std::cout << report.dump(2) << "\n";
  if (!out_prefix.empty()) io::write_file(with_suffix(out_prefix, ".csv"), csv_table(columns, {{name, report}}));
}

std::map<std::string, fs::path> systems_of(const json& section, const fs::path& base, const std::string& where) {
  std::map<std::string, fs::path> out;
  const auto systems = section.value("systems", json::object());
  if (!systems.is_object() || systems.empty()) schema_error(where + ": systems must be a nonempty object");
  for (const auto& [name, path] : systems.items()) {
    if (!path.is_string()) schema_error(where + ": system paths must be strings");
    out[name] = base / path.get<std::string>();
  }
  return out;
}

// Everything is read and scored before the first byte is written, so a bad
// input never leaves a partial report behind.
int cmd_eval_suite(const fs::path& config_path, const fs::path& out_dir, const std::vector<std::string>& args) {
  const json cfg = parse_json(io::read_file(config_path), config_path.string());
  check_keys(cfg, {"seg_punct", "allusion", "explanation", "translation"}, "suite");
  const fs::path base = config_path.parent_path();
  Manifest manifest("eval", args);
  manifest.input(config_path);
  std::map<std::string, std::string> files;
  json summary = json::object();

  auto require_file = [&](const fs::path& p) {
    if (!fs::is_regular_file(p)) throw Error(ErrorCode::kIo, "missing input " + p.string());
    manifest.input(p);
  };

  if (cfg.contains("seg_punct")) {
    const auto& s = cfg["seg_punct"];
    check_keys(s, {"gold", "systems", "averaging"}, "seg_punct");
    const auto averaging = s.value("averaging", std::string("micro"));
    if (averaging != "micro" && averaging != "macro") schema_error("seg_punct: averaging must be micro or macro");
    const fs::path gold = base / field<std::string>(s, "gold", "seg_punct");
    require_file(gold);
    std::vector<std::pair<std::string, json>> rows;
    for (const auto& [name, pred] : systems_of(s, base, "seg_punct")) {
      require_file(pred);
      rows.emplace_back(name, seg_punct_report(gold, pred, averaging == "macro"));
      summary["seg_punct"][name] = rows.back().second;
    }
    files["seg_punct.csv"] = csv_table(kSegPunctColumns, rows);
  }
  if (cfg.contains("allusion")) {
    const auto& s = cfg["allusion"];
    check_keys(s, {"gold", "systems"}, "allusion");
    const fs::path gold = base / field<std::string>(s, "gold", "allusion");
    require_file(gold);
    std::vector<std::pair<std::string, json>> rows;
    for (const auto& [name, pred] : systems_of(s, base, "allusion")) {
      require_file(pred);
      rows.emplace_back(name, allusion_report(gold, pred));
      summary["allusion"][name] = rows.back().second;
    }
    files["allusion.csv"] = csv_table(kAllusionColumns, rows);
  }
  if (cfg.contains("explanation")) {
    const auto& s = cfg["explanation"];
    check_keys(s, {"ratings"}, "explanation");
    const fs::path ratings = base / field<std::string>(s, "ratings", "explanation");
    require_file(ratings);
    const json r = ratings_report(ratings, RatingScale::kExplanation);
    summary["explanation"] = r;
    std::vector<std::pair<std::string, json>> rows;
    for (const auto& [name, acc] : r["accuracy"].items()) {
      rows.emplace_back(name, json{{"accuracy", acc["accuracy"]}, {"strict_accuracy", acc["strict_accuracy"]},
                                   {"mean_score", r["mean"][name]}});
    }
    files["explanation.csv"] = csv_table({"accuracy", "strict_accuracy", "mean_score"}, rows);
  }
  if (cfg.contains("translation")) {
    const auto& s = cfg["translation"];
    check_keys(s, {"refs", "systems", "smooth", "ratings"}, "translation");
    if (s.contains("refs") || s.contains("systems")) {
      const fs::path refs = base / field<std::string>(s, "refs", "translation");
      require_file(refs);
      const bool smooth = s.value("smooth", false);
      std::vector<std::pair<std::string, json>> rows;
      for (const auto& [name, hyps] : systems_of(s, base, "translation")) {
        require_file(hyps);
        rows.emplace_back(name, translate_report(refs, hyps, smooth));
        summary["translation"][name] = rows.back().second;
      }
      files["translation.csv"] = csv_table(kTranslateColumns, rows);
    }
    if (s.contains("ratings")) {
      const fs::path ratings = base / field<std::string>(s, "ratings", "translation");
      require_file(ratings);
      const json r = ratings_report(ratings, RatingScale::kFivePoint);
      summary["translation_human"] = r;
      std::vector<std::pair<std::string, json>> rows;
      for (const auto& [name, mean] : r["mean"].items()) {
        rows.emplace_back(name, json{{"mean_score", mean}, {"win_rate", r["win_rate"][name]}});
      }
      files["translation_human.csv"] = csv_table({"mean_score", "win_rate"}, rows);
    }
  }
  if (files.empty()) schema_error("suite config names no evaluations");
  files["summary.json"] = summary.dump(2) + "\n";

  fs::create_directories(out_dir);
  for (const auto& [name, contents] : files) {
    io::write_file(out_dir / name, contents);
    manifest.output(out_dir / name);
  }
  manifest.write(out_dir / "manifest.json");
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

// ---- human-eval -----------------------------------------------------------

int cmd_bundle(const std::string& answers_path, std::string systems_csv, std::uint64_t seed, const std::string& out,
               const std::vector<std::string>& args) {
  const auto items = answers_from_jsonl(io::read_file(answers_path));
  std::vector<std::string> systems;
  if (systems_csv.empty()) {
    std::set<std::string> seen;
    for (const auto& item : items) {
      for (const auto& [s, a] : item.answers) seen.insert(s);
    }
    systems.assign(seen.begin(), seen.end());
  } else {
    std::size_t start = 0;
    while (start <= systems_csv.size()) {
      const auto comma = std::min(systems_csv.find(',', start), systems_csv.size());
      systems.push_back(systems_csv.substr(start, comma - start));
      start = comma + 1;
    }
  }
  const auto set = make_bundles(items, systems, seed);
  const auto bundles_path = with_suffix(out, ".bundles.jsonl");
  const auto key_path = with_suffix(out, ".key.csv");
  io::write_file(bundles_path, bundles_to_jsonl(set.bundles));
  io::write_file(key_path, key_to_csv(set.key));
  Manifest manifest("human-eval bundle", args);
  manifest.input(answers_path);
  manifest.set("seed", seed);
  manifest.output(bundles_path);
  manifest.output(key_path);
  manifest.write(with_suffix(out, ".manifest.json"));
  return kExitOk;
}

int cmd_unshuffle(const std::string& bundles_path, const std::string& key_path) {
  const auto items = unshuffle(bundles_from_jsonl(io::read_file(bundles_path)), key_from_csv(io::read_file(key_path)));
  for (const auto& item : items) {
    std::cout << json{{"item", item.item}, {"answers", item.answers}}.dump() << "\n";
  }
  return kExitOk;
}

int cmd_aggregate(const std::string& ratings, const std::string& scale_name, const std::string& out) {
  RatingScale scale;
  if (scale_name == "five") {
    scale = RatingScale::kFivePoint;
  } else if (scale_name == "explanation") {
    scale = RatingScale::kExplanation;
  } else {
    schema_error("--scale must be five or explanation");
  }
  const json r = ratings_report(ratings, scale);
  std::cout << r.dump(2) << "\n";
  if (!out.empty()) {
    std::vector<std::pair<std::string, json>> rows;
    for (const auto& [name, mean] : r["mean"].items()) {
      json row{{"mean_score", mean}};
      if (scale == RatingScale::kFivePoint) {
        row["win_rate"] = r["win_rate"][name];
      } else {
        row["accuracy"] = r["accuracy"][name]["accuracy"];
        row["strict_accuracy"] = r["accuracy"][name]["strict_accuracy"];
      }
      rows.emplace_back(name, row);
    }
    const std::vector<std::string> cols = scale == RatingScale::kFivePoint
                                              ? std::vector<std::string>{"mean_score", "win_rate"}
                                              : std::vector<std::string>{"mean_score", "accuracy", "strict_accuracy"};
    io::write_file(with_suffix(out, ".csv"), csv_table(cols, rows));
  }
  return kExitOk;
}

// ---- sense-drift ----------------------------------------------------------

struct SenseOptions {
  std::string corpus;
  std::string keyword;
  double theta = kDefaultTheta;
  std::size_t top_k = 2;
  std::size_t window = 10;
  std::string out;
  std::string glosses;
  std::string ckpt;
  std::string vocab;
  int threads = 0;
};

int cmd_sense(const SenseOptions& o, const std::vector<std::string>& args) {
  if (o.keyword.empty()) schema_error("--keyword must be nonempty");
  if (!(o.theta > 0.0 && o.theta <= 1.0)) schema_error("--theta must lie in (0, 1]");
  if (o.top_k < 1) schema_error("--top-k must be positive");
  if (o.glosses.empty() && (o.ckpt.empty() || o.vocab.empty())) {
    schema_error("sense-drift needs --glosses or both --ckpt and --vocab");
  }
  Manifest manifest("sense-drift", args);
  const Text keyword = from_utf8(o.keyword);
  const auto corpus = PeriodCorpus::load(o.corpus);
  for (const auto& file : text_files(o.corpus, ".txt")) manifest.input(file);
  const auto hits = concordance(corpus, keyword, o.window);

  std::vector<GlossedHit> glossed(hits.size());
  if (!o.glosses.empty()) {
    manifest.input(o.glosses);
    const auto lines = read_text_lines(o.glosses);
    if (lines.size() != hits.size()) {
      throw Error(ErrorCode::kLengthMismatch, "glosses file has " + std::to_string(lines.size()) + " lines for " +
                                                  std::to_string(hits.size()) + " occurrences");
    }
    for (std::size_t i = 0; i < hits.size(); ++i) glossed[i] = {lines[i], hits[i].period, hits[i].snippet};
  } else {
    const Vocabulary vocab = load_vocab(o.vocab);
    const Checkpoint model = load_model(o.ckpt, vocab);
    manifest.input(o.vocab);
    manifest.input(o.ckpt);
    manifest.set("checkpoint_sha256", sha256_hex(io::read_file(o.ckpt)));
    parallel_for(hits.size(), resolve_threads(o.threads), [&](std::size_t i) {
      Text gloss = infer_task(model, vocab, TaskKind::kWordExplanation, hits[i].snippet, keyword);
      glossed[i] = {std::move(gloss), hits[i].period, hits[i].snippet};
    });
  }

  const auto clusters = cluster_glosses(glossed, o.theta);
  if (clusters.empty()) schema_error("keyword does not occur in the corpus");
  const auto trajectory = sense_trajectory(clusters, o.top_k);
  emit_chart(trajectory, o.out, o.keyword);

  std::string concord = "period,snippet,gloss,cluster\n";
  for (const auto& hit : glossed) {
    // Equal glosses always land in the same cluster.
    std::size_t cluster = 0;
    while (std::none_of(clusters[cluster].members.begin(), clusters[cluster].members.end(),
                        [&](const GlossedHit& m) { return m.gloss == hit.gloss; })) {
      ++cluster;
    }
    concord += std::string(kPeriods[hit.period]) + "," + io::csv_field(to_utf8(hit.snippet)) + "," +
               io::csv_field(to_utf8(hit.gloss)) + "," + io::csv_field(to_utf8(clusters[cluster].representative)) + "\n";
  }
  const auto concord_path = with_suffix(o.out, ".concordance.csv");
  io::write_file(concord_path, concord);

  manifest.set("config", {{"keyword", o.keyword}, {"theta", o.theta}, {"top_k", o.top_k}, {"window", o.window}});
  manifest.set("occurrences", hits.size());
  manifest.set("clusters", clusters.size());
  manifest.output(with_suffix(o.out, ".csv"));
  manifest.output(with_suffix(o.out, ".svg"));
  manifest.output(concord_path);
  manifest.write(with_suffix(o.out, ".manifest.json"));
  std::cerr << hits.size() << " occurrences, " << clusters.size() << " sense clusters\n";
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return kExitIo;
    case ErrorCode::kNonFiniteLoss: return kExitNumeric;
    default: return kExitSchema;
  }
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Classical Chinese language model toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  VocabOptions vocab;
  auto* vocab_cmd = app.add_subcommand("vocab", "Build a character vocabulary");
  vocab_cmd->add_option("--corpus", vocab.corpus, "Directory of .txt, a .txt file, or a task .jsonl")->required();
  vocab_cmd->add_option("--out", vocab.out, "Vocabulary file")->required();
  vocab_cmd->add_option("--min-count", vocab.min_count, "Minimum character frequency");

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Pretrain or fine-tune a model");
  train_cmd->add_option("--mode", train.mode, "pretrain or sft");
  train_cmd->add_option("--corpus", train.corpus, "Corpus directory, .txt or .jsonl (repeatable)")->required();
  train_cmd->add_option("--vocab", train.vocab)->required();
  train_cmd->add_option("--config", train.config, "JSON with optional model and train sections");
  train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
  train_cmd->add_option("--init", train.init, "Start from this checkpoint");
  train_cmd->add_option("--log", train.log, "Loss CSV (default OUT.loss.csv)");
  train_cmd->add_option("--seed", train.seed);
  train_cmd->add_option("--log-every", train.log_every, "Progress interval in steps (0 = silent)");
  int train_threads = 0;
  train_cmd->add_option("--threads", train_threads, "Accepted for symmetry; training is single-threaded");

  PunctuateOptions punct;
  auto* punct_cmd = app.add_subcommand("punctuate", "Restore punctuation, one document per line");
  punct_cmd->add_option("--ckpt", punct.ckpt)->required();
  punct_cmd->add_option("--vocab", punct.vocab)->required();
  punct_cmd->add_option("--in", punct.in, "Input file (default stdin)");
  punct_cmd->add_option("--out", punct.out, "Output file (default stdout)");
  punct_cmd->add_option("--flags", punct.flags, "Gold punctuated file to compare against");
  punct_cmd->add_option("--flags-out", punct.flags_out, "Post-edit flags CSV (default stderr)");
  punct_cmd->add_option("--threads", punct.threads);

  InferOptions infer;
  auto* infer_cmd = app.add_subcommand("infer", "Run one task on one input");
  infer_cmd->add_option("--ckpt", infer.ckpt)->required();
  infer_cmd->add_option("--vocab", infer.vocab)->required();
  infer_cmd->add_option("--task", infer.task, "punctuation, allusion, word_explanation or translation")->required();
  infer_cmd->add_option("--input", infer.input)->required();
  infer_cmd->add_option("--word", infer.word, "Query word for word_explanation");
  infer_cmd->add_option("--max-new", infer.max_new);

  auto* eval_cmd = app.add_subcommand("eval", "Score predictions");
  eval_cmd->require_subcommand(1);
  std::string gold, pred, refs, hyps, eval_out, suite_config, suite_out;
  bool macro = false, smooth = false;
  auto* seg_cmd = eval_cmd->add_subcommand("seg-punct", "Text error rate, segmentation and punctuation F1");
  seg_cmd->add_option("--gold", gold)->required();
  seg_cmd->add_option("--pred", pred)->required();
  seg_cmd->add_flag("--macro", macro, "Macro-average F1 over samples");
  seg_cmd->add_option("--out", eval_out, "Also write OUT.csv");
  auto* allusion_cmd = eval_cmd->add_subcommand("allusion", "Detection accuracy and identification F1");
  allusion_cmd->add_option("--gold", gold)->required();
  allusion_cmd->add_option("--pred", pred)->required();
  allusion_cmd->add_option("--out", eval_out);
  auto* translate_cmd = eval_cmd->add_subcommand("translate", "Character BLEU and chrF");
  translate_cmd->add_option("--refs", refs)->required();
  translate_cmd->add_option("--hyps", hyps)->required();
  translate_cmd->add_flag("--smooth", smooth, "Add-one smoothing for BLEU");
  translate_cmd->add_option("--out", eval_out);
  auto* suite_cmd = eval_cmd->add_subcommand("suite", "Run every evaluation named in a JSON config");
  suite_cmd->add_option("--config", suite_config)->required();
  suite_cmd->add_option("--out", suite_out, "Report directory")->required();

  auto* human_cmd = app.add_subcommand("human-eval", "Rating bundles and aggregation");
  human_cmd->require_subcommand(1);
  std::string answers, systems, he_out, bundles, key, ratings, scale = "five";
  std::uint64_t he_seed = 0;
  auto* bundle_cmd = human_cmd->add_subcommand("bundle", "Anonymize and shuffle answers");
  bundle_cmd->add_option("--answers", answers, "JSONL of {item, answers: {system: text}}")->required();
  bundle_cmd->add_option("--systems", systems, "Comma-separated system list (default: all, sorted)");
  bundle_cmd->add_option("--seed", he_seed);
  bundle_cmd->add_option("--out", he_out, "Writes OUT.bundles.jsonl and OUT.key.csv")->required();
  auto* unshuffle_cmd = human_cmd->add_subcommand("unshuffle", "Restore provenance from a sealed key");
  unshuffle_cmd->add_option("--bundles", bundles)->required();
  unshuffle_cmd->add_option("--key", key)->required();
  auto* aggregate_cmd = human_cmd->add_subcommand("aggregate", "Means, win rate and rater consistency");
  aggregate_cmd->add_option("--ratings", ratings, "CSV item,system,evaluator,score")->required();
  aggregate_cmd->add_option("--scale", scale, "five or explanation");
  aggregate_cmd->add_option("--out", he_out, "Also write OUT.csv");

  SenseOptions sense;
  auto* sense_cmd = app.add_subcommand("sense-drift", "Diachronic sense frequencies of a keyword");
  sense_cmd->add_option("--corpus", sense.corpus, "One directory per period")->required();
  sense_cmd->add_option("--keyword", sense.keyword)->required();
  sense_cmd->add_option("--theta", sense.theta, "Jaro-Winkler clustering threshold");
  sense_cmd->add_option("--top-k", sense.top_k);
  sense_cmd->add_option("--window", sense.window, "Snippet context in characters");
  sense_cmd->add_option("--out", sense.out, "Writes OUT.csv, OUT.svg, OUT.concordance.csv")->required();
  sense_cmd->add_option("--glosses", sense.glosses, "One gloss per occurrence, in concordance order");
  sense_cmd->add_option("--ckpt", sense.ckpt);
  sense_cmd->add_option("--vocab", sense.vocab);
  sense_cmd->add_option("--threads", sense.threads);

  std::string manifest_path;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay_cmd->add_option("manifest", manifest_path)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitSchema;
  }

  try {
    if (vocab_cmd->parsed()) return cmd_vocab(vocab, args);
    if (train_cmd->parsed()) return cmd_train(train, args);
    if (punct_cmd->parsed()) return cmd_punctuate(punct, args);
    if (infer_cmd->parsed()) return cmd_infer(infer);
    if (seg_cmd->parsed()) {
      print_report(seg_punct_report(gold, pred, macro), eval_out, kSegPunctColumns, "predictions");
      return kExitOk;
    }
    if (allusion_cmd->parsed()) {
      print_report(allusion_report(gold, pred), eval_out, kAllusionColumns, "predictions");
      return kExitOk;
    }
    if (translate_cmd->parsed()) {
      print_report(translate_report(refs, hyps, smooth), eval_out, kTranslateColumns, "predictions");
      return kExitOk;
    }
    if (suite_cmd->parsed()) return cmd_eval_suite(suite_config, suite_out, args);
    if (bundle_cmd->parsed()) return cmd_bundle(answers, systems, he_seed, he_out, args);
    if (unshuffle_cmd->parsed()) return cmd_unshuffle(bundles, key);
    if (aggregate_cmd->parsed()) return cmd_aggregate(ratings, scale, he_out);
    if (sense_cmd->parsed()) return cmd_sense(sense, args);
    if (replay_cmd->parsed()) {
      const json m = parse_json(io::read_file(manifest_path), manifest_path);
      return run(field<std::vector<std::string>>(m, "argv", manifest_path));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace taiyan::cli
