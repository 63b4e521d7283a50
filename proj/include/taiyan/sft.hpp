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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "taiyan/text.hpp"
#include "taiyan/vocab.hpp"

namespace taiyan {

enum class TaskKind { kPunctuation, kAllusion, kWordExplanation, kTranslation };

std::string_view task_name(TaskKind kind);
// Accepts the names produced by task_name.
std::optional<TaskKind> parse_task(std::string_view name);

struct TaskExample {
  TaskKind task = TaskKind::kPunctuation;
  Text input;
  Text instruction;
  Text output;

  bool operator==(const TaskExample&) const = default;
};

inline constexpr std::u32string_view kPunctuationInstruction = U"給上述文本添加標點。";
inline constexpr std::u32string_view kAllusionInstruction = U"識別文本中的典故。";
inline constexpr std::u32string_view kTranslationInstruction = U"將上文翻譯成白話文。";

// WordExplanation requires the queried word; the other kinds ignore it.
Text instruction_for(TaskKind kind, TextView word = {});

// Every codepoint used by the fixed instructions plus the prompt newline.
Text template_codepoints();

struct PunctuationPairs {
  std::vector<TaskExample> examples;
  std::size_t skipped_unmarked = 0;
  std::size_t skipped_malformed = 0;
  std::size_t skipped_oversize = 0;
};

inline constexpr std::size_t kDefaultWindowChars = 256;

// Splits each document into windows of at most max_chars codepoints that end
// on mark boundaries and turns each into a (stripped -> punctuated) pair.
PunctuationPairs make_punctuation_pairs(std::span<const Text> documents,
                                        std::size_t max_chars = kDefaultWindowChars);

struct Rejection {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct ValidatedTasks {
  std::vector<TaskExample> examples;
  std::vector<std::size_t> lines;  // source line of each accepted example
  std::vector<Rejection> rejections;
};

// Checks one decoded record; returns the rejection reason or nothing.
std::optional<std::string> check_example(const TaskExample& example, TextView word = {});

// Throws kIo when the file cannot be read; bad records land in rejections.
ValidatedTasks validate_task_jsonl(const std::filesystem::path& path);
ValidatedTasks validate_task_jsonl_text(std::string_view contents);

std::string rejection_report_csv(std::span<const Rejection> rejections);

struct SerializedExample {
  std::vector<TokenId> prompt;  // BOS input \n instruction SEP
  std::vector<TokenId> target;  // output EOS
};

SerializedExample serialize_for_training(const TaskExample& example, const Vocabulary& vocab);

}  // namespace taiyan
