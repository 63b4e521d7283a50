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

#include "taiyan/inference.hpp"

#include <algorithm>

#include "taiyan/decoder.hpp"
#include "taiyan/error.hpp"

namespace taiyan {

Text infer_task(const Checkpoint& ckpt, const Vocabulary& vocab, TaskKind task, TextView input, TextView word,
                int max_new) {
  if (static_cast<std::size_t>(ckpt.config.vocab_size) != vocab.size()) {
    throw Error(ErrorCode::kBadCheckpoint, "checkpoint vocab_size " + std::to_string(ckpt.config.vocab_size) +
                                               " does not match vocabulary size " + std::to_string(vocab.size()));
  }
  if (input.empty()) throw Error(ErrorCode::kEmptyInput, "empty input text");
  if (task == TaskKind::kPunctuation) return punctuate(ckpt.params, ckpt.config, vocab, strip_marks(input));
  if (task == TaskKind::kWordExplanation && (word.empty() || input.find(word) == TextView::npos)) {
    throw Error(ErrorCode::kWordNotInText, "\"" + to_utf8(word) + "\" does not occur in the input");
  }
  const TaskExample request{task, Text(input), instruction_for(task, word), {}};
  const auto prompt = serialize_for_training(request, vocab).prompt;
  const int room = ckpt.config.max_seq_len - static_cast<int>(prompt.size());
  if (room < 1) {
    throw Error(ErrorCode::kSequenceTooLong, "prompt of " + std::to_string(prompt.size()) + " tokens fills the context");
  }
  const auto generated = generate(ckpt.params, ckpt.config, prompt, std::min(max_new, room));
  return vocab.decode(generated);
}

}  // namespace taiyan
