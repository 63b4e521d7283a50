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
#include <string>
#include <vector>

#include "taiyan/model.hpp"
#include "taiyan/text.hpp"
#include "taiyan/vocab.hpp"

namespace taiyan {

// Cursor over the source text during constrained punctuation.
struct DecodeState {
  Text source;
  std::size_t cursor = 0;  // next unemitted source char
  bool last_was_mark = false;
  bool finished = false;
};

// The next source char (UNK when out of vocabulary), the marks when a mark
// may follow, or EOS once the text is complete and terminated. Never empty
// for an unfinished state.
std::vector<TokenId> allowed_tokens(const DecodeState& state, const Vocabulary& vocab);

// Advances the state by the chosen token and appends its surface form to out.
// Throws kInvalidArgument if the token is not allowed.
void apply_token(DecodeState& state, const Vocabulary& vocab, TokenId token, Text& out);

// Masked greedy decoding that can only reproduce the source and insert single
// marks. The result always satisfies strip_marks(result) == text and ends with
// exactly one mark. Throws kEmptyInput for empty text, kInvalidArgument when
// the text already contains marks.
template <typename T>
Text punctuate(const Parameters<T>& params, const ModelConfig& cfg, const Vocabulary& vocab, TextView text);

struct PostEditFlag {
  std::size_t boundary = 0;
  std::string kind;  // "insertion X", "deletion X" or "type mismatch G/M"
  Text left_context;
  Text right_context;
};

inline constexpr std::size_t kFlagContext = 5;

// Boundaries where the model's marks disagree with the original. Throws
// kAlignmentMismatch when the two texts differ once marks are removed.
std::vector<PostEditFlag> post_edit_flags(TextView original_punctuated, TextView model_punctuated);

}  // namespace taiyan
