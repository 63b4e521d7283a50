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

#include "taiyan/decoder.hpp"

#include <algorithm>

#include "taiyan/error.hpp"
#include "taiyan/sft.hpp"

namespace taiyan {

namespace {

std::vector<TokenId> mark_ids(const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  for (char32_t m : kMarkSet) ids.push_back(vocab.id_of(m));
  return ids;
}

}  // namespace

std::vector<TokenId> allowed_tokens(const DecodeState& s, const Vocabulary& vocab) {
  if (s.finished) return {};
  const std::size_t len = s.source.size();
  if (s.cursor == 0) return {vocab.id_of(s.source[0])};
  if (s.cursor < len) {
    std::vector<TokenId> ids{vocab.id_of(s.source[s.cursor])};
    if (!s.last_was_mark) {
      const auto marks = mark_ids(vocab);
      ids.insert(ids.end(), marks.begin(), marks.end());
    }
    return ids;
  }
  if (s.last_was_mark) return {kEos};
  return mark_ids(vocab);
}

void apply_token(DecodeState& s, const Vocabulary& vocab, TokenId token, Text& out) {
  const auto allowed = allowed_tokens(s, vocab);
  if (std::find(allowed.begin(), allowed.end(), token) == allowed.end()) {
    throw Error(ErrorCode::kInvalidArgument, "token " + std::to_string(token) + " not allowed in this state");
  }
  if (token == kEos) {
    s.finished = true;
    return;
  }
  const bool char_allowed = s.cursor < s.source.size() && token == allowed.front();
  if (char_allowed) {
    out.push_back(s.source[s.cursor]);
    ++s.cursor;
    s.last_was_mark = false;
  } else {
    out.push_back(vocab.codepoint_of(token));
    s.last_was_mark = true;
  }
}

template <typename T>
Text punctuate(const Parameters<T>& params, const ModelConfig& cfg, const Vocabulary& vocab, TextView text) {
  if (text.empty()) throw Error(ErrorCode::kEmptyInput, "cannot punctuate empty text");
  if (std::any_of(text.begin(), text.end(), is_mark)) {
    throw Error(ErrorCode::kInvalidArgument, "text to punctuate already contains marks");
  }
  const TaskExample request{TaskKind::kPunctuation, Text(text), Text(kPunctuationInstruction), {}};
  const auto prompt = serialize_for_training(request, vocab).prompt;

  DecodeState state{Text(text)};
  Text out;
  out.reserve(text.size() * 2);
  std::size_t consumed = 0;
  const MaskFn mask = [&](std::span<const TokenId> generated) {
    for (; consumed < generated.size(); ++consumed) apply_token(state, vocab, generated[consumed], out);
    return allowed_tokens(state, vocab);
  };
  const int max_new = static_cast<int>(2 * text.size() + 1);
  const auto generated = generate(params, cfg, prompt, max_new, mask);
  for (; consumed < generated.size(); ++consumed) apply_token(state, vocab, generated[consumed], out);
  return out;
}

std::vector<PostEditFlag> post_edit_flags(TextView original_punctuated, TextView model_punctuated) {
  if (strip_marks(original_punctuated) != strip_marks(model_punctuated)) {
    throw Error(ErrorCode::kAlignmentMismatch, "texts differ after removing marks");
  }
  const auto gold = align(original_punctuated);
  const auto pred = align(model_punctuated);
  std::vector<PostEditFlag> flags;
  auto context = [&](std::size_t b) {
    const std::size_t lo = b >= kFlagContext ? b - kFlagContext : 0;
    const std::size_t hi = std::min(gold.chars.size(), b + kFlagContext);
    return std::pair{gold.chars.substr(lo, b - lo), gold.chars.substr(b, hi - b)};
  };
  for (std::size_t b = 0; b <= gold.chars.size(); ++b) {
    const auto g = gold.boundary_marks.find(b);
    const auto p = pred.boundary_marks.find(b);
    const bool has_g = g != gold.boundary_marks.end();
    const bool has_p = p != pred.boundary_marks.end();
    std::string kind;
    if (has_g && has_p && g->second != p->second) {
      kind = "type mismatch " + to_utf8(Text{g->second}) + "/" + to_utf8(Text{p->second});
    } else if (!has_g && has_p) {
      kind = "insertion " + to_utf8(Text{p->second});
    } else if (has_g && !has_p) {
      kind = "deletion " + to_utf8(Text{g->second});
    } else {
      continue;
    }
    auto [left, right] = context(b);
    flags.push_back({b, std::move(kind), std::move(left), std::move(right)});
  }
  return flags;
}

template Text punctuate(const Parameters<float>&, const ModelConfig&, const Vocabulary&, TextView);
template Text punctuate(const Parameters<double>&, const ModelConfig&, const Vocabulary&, TextView);

}  // namespace taiyan
