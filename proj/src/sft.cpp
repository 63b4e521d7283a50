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

#include "taiyan/sft.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "taiyan/error.hpp"

namespace taiyan {

namespace {

constexpr std::u32string_view kExplanationPrefix = U"文本中的「";
constexpr std::u32string_view kExplanationSuffix = U"」是什麼意思？";

// Curly and corner quotes are both seen in the wild; corner quotes are canonical.
Text normalize_quotes(TextView text) {
  Text out(text);
  for (char32_t& c : out) {
    if (c == U'“') c = U'「';
    if (c == U'”') c = U'」';
  }
  return out;
}

std::optional<Text> word_from_instruction(TextView instruction) {
  const Text norm = normalize_quotes(instruction);
  const auto open = norm.find(U'「');
  if (open == Text::npos) return std::nullopt;
  const auto close = norm.find(U'」', open + 1);
  if (close == Text::npos || close == open + 1) return std::nullopt;
  return norm.substr(open + 1, close - open - 1);
}

}  // namespace

std::string_view task_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kPunctuation: return "punctuation";
    case TaskKind::kAllusion: return "allusion";
    case TaskKind::kWordExplanation: return "word_explanation";
    case TaskKind::kTranslation: return "translation";
  }
  return "unknown";
}

std::optional<TaskKind> parse_task(std::string_view name) {
  for (auto kind : {TaskKind::kPunctuation, TaskKind::kAllusion, TaskKind::kWordExplanation,
                    TaskKind::kTranslation}) {
    if (task_name(kind) == name) return kind;
  }
  return std::nullopt;
}

Text instruction_for(TaskKind kind, TextView word) {
  switch (kind) {
    case TaskKind::kPunctuation: return Text(kPunctuationInstruction);
    case TaskKind::kAllusion: return Text(kAllusionInstruction);
    case TaskKind::kTranslation: return Text(kTranslationInstruction);
    case TaskKind::kWordExplanation:
      if (word.empty()) throw Error(ErrorCode::kInvalidArgument, "word explanation needs a query word");
      return Text(kExplanationPrefix) + Text(word) + Text(kExplanationSuffix);
  }
  return {};
}

Text template_codepoints() {
  std::set<char32_t> cps = {U'\n'};
  for (auto t : {kPunctuationInstruction, kAllusionInstruction, kTranslationInstruction, kExplanationPrefix,
                 kExplanationSuffix}) {
    cps.insert(t.begin(), t.end());
  }
  return Text(cps.begin(), cps.end());
}

PunctuationPairs make_punctuation_pairs(std::span<const Text> documents, std::size_t max_chars) {
  PunctuationPairs out;
  auto emit = [&](TextView segment) {
    if (segment.empty()) return;
    if (segment.size() > max_chars) {
      ++out.skipped_oversize;
      return;
    }
    try {
      const auto a = align(segment);
      if (a.boundary_marks.empty()) {
        ++out.skipped_unmarked;
        return;
      }
      out.examples.push_back({TaskKind::kPunctuation, a.chars, Text(kPunctuationInstruction), Text(segment)});
    } catch (const Error&) {
      ++out.skipped_malformed;
    }
  };

  for (const Text& doc : documents) {
    // Units end right after a mark; only unit boundaries may split a window.
    std::vector<TextView> units;
    std::size_t start = 0;
    for (std::size_t i = 0; i < doc.size(); ++i) {
      if (is_mark(doc[i])) {
        units.emplace_back(TextView(doc).substr(start, i + 1 - start));
        start = i + 1;
      }
    }
    if (start < doc.size()) units.emplace_back(TextView(doc).substr(start));

    std::size_t seg_begin = 0;
    std::size_t seg_len = 0;
    std::size_t offset = 0;
    for (const TextView unit : units) {
      if (seg_len > 0 && seg_len + unit.size() > max_chars) {
        emit(TextView(doc).substr(seg_begin, seg_len));
        seg_begin = offset;
        seg_len = 0;
      }
      seg_len += unit.size();
      offset += unit.size();
    }
    if (seg_len > 0) emit(TextView(doc).substr(seg_begin, seg_len));
  }
  return out;
}

std::optional<std::string> check_example(const TaskExample& e, TextView word) {
  if (e.input.empty()) return "empty input";
  if (e.instruction.empty()) return "empty instruction";
  if (e.output.empty()) return "empty output";
  switch (e.task) {
    case TaskKind::kPunctuation:
      try {
        align(e.output);
      } catch (const Error&) {
        return "malformed punctuation in output";
      }
      if (strip_marks(e.output) != e.input) return "output does not reproduce input";
      break;
    case TaskKind::kWordExplanation: {
      Text query(word);
      if (query.empty()) {
        auto found = word_from_instruction(e.instruction);
        if (!found) return "query word missing";
        query = *found;
      }
      if (e.input.find(query) == Text::npos) return "query not in text";
      break;
    }
    case TaskKind::kAllusion:
    case TaskKind::kTranslation:
      break;
  }
  return std::nullopt;
}

ValidatedTasks validate_task_jsonl_text(std::string_view contents) {
  ValidatedTasks out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < contents.size()) {
    std::size_t end = contents.find('\n', start);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    auto reject = [&](std::string reason) { out.rejections.push_back({line_no, std::move(reason)}); };
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      reject("empty line");
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      reject("invalid JSON");
      continue;
    }
    if (!j.is_object()) {
      reject("record is not an object");
      continue;
    }
    std::optional<std::string> missing;
    for (const char* field : {"task", "input", "instruction", "output"}) {
      if (!j.contains(field) || !j[field].is_string()) {
        missing = std::string("missing field ") + field;
        break;
      }
    }
    if (missing) {
      reject(*missing);
      continue;
    }
    const auto kind = parse_task(j["task"].get<std::string>());
    if (!kind) {
      reject("unknown task");
      continue;
    }
    TaskExample e;
    Text word;
    try {
      e.task = *kind;
      e.input = from_utf8(j["input"].get<std::string>());
      e.instruction = from_utf8(j["instruction"].get<std::string>());
      e.output = from_utf8(j["output"].get<std::string>());
      if (j.contains("word")) {
        if (!j["word"].is_string()) {
          reject("word is not a string");
          continue;
        }
        word = from_utf8(j["word"].get<std::string>());
      }
    } catch (const Error&) {
      reject("invalid UTF-8");
      continue;
    }
    if (e.task == TaskKind::kWordExplanation) e.instruction = normalize_quotes(e.instruction);
    if (auto reason = check_example(e, word)) {
      reject(*reason);
      continue;
    }
    out.examples.push_back(std::move(e));
    out.lines.push_back(line_no);
  }
  return out;
}

ValidatedTasks validate_task_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return validate_task_jsonl_text(buf.str());
}

std::string rejection_report_csv(std::span<const Rejection> rejections) {
  std::string out = "line,reason\n";
  for (const auto& r : rejections) {
    out += std::to_string(r.line) + "," + r.reason + "\n";
  }
  return out;
}

SerializedExample serialize_for_training(const TaskExample& example, const Vocabulary& vocab) {
  SerializedExample s;
  s.prompt.reserve(example.input.size() + example.instruction.size() + 3);
  s.prompt.push_back(kBos);
  for (TokenId id : vocab.encode(example.input)) s.prompt.push_back(id);
  s.prompt.push_back(vocab.id_of(U'\n'));
  for (TokenId id : vocab.encode(example.instruction)) s.prompt.push_back(id);
  s.prompt.push_back(kSep);
  s.target = vocab.encode(example.output);
  s.target.push_back(kEos);
  return s;
}

}  // namespace taiyan
