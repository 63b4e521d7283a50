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

#include "taiyan/checkpoint.hpp"
#include "taiyan/sft.hpp"
#include "taiyan/vocab.hpp"

namespace taiyan {

inline constexpr int kDefaultMaxNew = 256;

// Punctuation goes through the constrained decoder (marks already present in
// `input` are stripped first); the other tasks decode freely until EOS.
// Throws kWordNotInText, kBadCheckpoint when the vocabulary does not match
// the checkpoint, and kSequenceTooLong when the prompt leaves no room.
Text infer_task(const Checkpoint& ckpt, const Vocabulary& vocab, TaskKind task, TextView input, TextView word = {},
                int max_new = kDefaultMaxNew);

}  // namespace taiyan
