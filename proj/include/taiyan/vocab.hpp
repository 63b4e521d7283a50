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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "taiyan/text.hpp"

namespace taiyan {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kSep = 4;
inline constexpr TokenId kNumSpecials = 5;

// Character-level vocabulary. Ids 0-4 are the specials, every id above maps
// to exactly one codepoint. Immutable once built.
class Vocabulary {
 public:
  std::size_t size() const noexcept { return kNumSpecials + codepoints_.size(); }

  // kUnk for codepoints outside the vocabulary.
  TokenId id_of(char32_t c) const;
  bool contains(char32_t c) const { return ids_.contains(c); }
  bool is_special(TokenId id) const noexcept { return id >= 0 && id < kNumSpecials; }

  // Throws kUnknownId for specials or out-of-range ids.
  char32_t codepoint_of(TokenId id) const;

  std::vector<TokenId> encode(TextView text) const;
  // Specials render as nothing.
  Text decode(std::span<const TokenId> ids) const;

  // One token per line, line number = id.
  std::string serialize() const;
  static Vocabulary parse(std::string_view contents);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return codepoints_ == other.codepoints_; }

 private:
  friend class VocabBuilder;
  explicit Vocabulary(std::vector<char32_t> codepoints);

  std::vector<char32_t> codepoints_;
  std::unordered_map<char32_t, TokenId> ids_;
};

// Streams documents through a frequency counter.
class VocabBuilder {
 public:
  void add(TextView text);

  // Keeps every codepoint seen at least min_count times, all seven marks, and
  // any `required` codepoint regardless of frequency. Ids are assigned by
  // descending frequency, ties by ascending codepoint. Throws kEmptyCorpus
  // when nothing was added.
  Vocabulary finish(std::size_t min_count, TextView required = {}) const;

 private:
  std::unordered_map<char32_t, std::size_t> counts_;
  std::size_t total_ = 0;
};

Vocabulary build_vocab(std::span<const Text> corpus, std::size_t min_count, TextView required = {});

}  // namespace taiyan
