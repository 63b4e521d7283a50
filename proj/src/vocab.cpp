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

#include "taiyan/vocab.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <string_view>
#include <utility>

#include "taiyan/error.hpp"

namespace taiyan {

namespace {

constexpr std::array<std::string_view, kNumSpecials> kSpecialLiterals = {"<pad>", "<bos>", "<eos>",
                                                                        "<unk>", "<sep>"};

std::string escape_token(char32_t c) {
  switch (c) {
    case U'\n': return "\\n";
    case U'\r': return "\\r";
    case U'\\': return "\\\\";
    default: return to_utf8(Text(1, c));
  }
}

char32_t unescape_token(std::string_view line, std::size_t line_no) {
  if (line == "\\n") return U'\n';
  if (line == "\\r") return U'\r';
  if (line == "\\\\") return U'\\';
  const Text t = from_utf8(line);
  if (t.size() != 1) {
    throw Error(ErrorCode::kSchema,
                "vocabulary line " + std::to_string(line_no + 1) + " is not a single codepoint");
  }
  return t[0];
}

}  // namespace

Vocabulary::Vocabulary(std::vector<char32_t> codepoints) : codepoints_(std::move(codepoints)) {
  ids_.reserve(codepoints_.size());
  for (std::size_t i = 0; i < codepoints_.size(); ++i) {
    const auto [it, inserted] = ids_.emplace(codepoints_[i], static_cast<TokenId>(i) + kNumSpecials);
    if (!inserted) {
      throw Error(ErrorCode::kSchema, "duplicate vocabulary entry U+" + std::to_string(codepoints_[i]));
    }
  }
  for (char32_t m : kMarkSet) {
    if (!ids_.contains(m)) throw Error(ErrorCode::kSchema, "vocabulary lacks a punctuation mark");
  }
}

TokenId Vocabulary::id_of(char32_t c) const {
  const auto it = ids_.find(c);
  return it == ids_.end() ? kUnk : it->second;
}

char32_t Vocabulary::codepoint_of(TokenId id) const {
  if (id < kNumSpecials || static_cast<std::size_t>(id) >= size()) {
    throw Error(ErrorCode::kUnknownId, "token id " + std::to_string(id) + " has no codepoint");
  }
  return codepoints_[static_cast<std::size_t>(id - kNumSpecials)];
}

std::vector<TokenId> Vocabulary::encode(TextView text) const {
  std::vector<TokenId> ids;
  ids.reserve(text.size());
  for (char32_t c : text) ids.push_back(id_of(c));
  return ids;
}

Text Vocabulary::decode(std::span<const TokenId> ids) const {
  Text out;
  out.reserve(ids.size());
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= size()) {
      throw Error(ErrorCode::kUnknownId, "token id " + std::to_string(id) + " out of range");
    }
    if (is_special(id)) continue;
    out.push_back(codepoints_[static_cast<std::size_t>(id - kNumSpecials)]);
  }
  return out;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (auto literal : kSpecialLiterals) {
    out += literal;
    out += '\n';
  }
  for (char32_t c : codepoints_) {
    out += escape_token(c);
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::parse(std::string_view contents) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < contents.size()) {
    const std::size_t end = contents.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(contents.substr(start));
      break;
    }
    lines.push_back(contents.substr(start, end - start));
    start = end + 1;
  }
  if (lines.size() < kNumSpecials) throw Error(ErrorCode::kSchema, "vocabulary file too short");
  for (std::size_t i = 0; i < kNumSpecials; ++i) {
    if (lines[i] != kSpecialLiterals[i]) {
      throw Error(ErrorCode::kSchema, "vocabulary line " + std::to_string(i + 1) + " must be " +
                                          std::string(kSpecialLiterals[i]));
    }
  }
  std::vector<char32_t> codepoints;
  codepoints.reserve(lines.size() - kNumSpecials);
  for (std::size_t i = kNumSpecials; i < lines.size(); ++i) {
    codepoints.push_back(unescape_token(lines[i], i));
  }
  return Vocabulary(std::move(codepoints));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << serialize();
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void VocabBuilder::add(TextView text) {
  for (char32_t c : text) ++counts_[c];
  total_ += text.size();
}

Vocabulary VocabBuilder::finish(std::size_t min_count, TextView required) const {
  if (total_ == 0) throw Error(ErrorCode::kEmptyCorpus, "corpus contains no characters");
  std::unordered_map<char32_t, std::size_t> kept;
  for (const auto& [c, n] : counts_) {
    if (n >= min_count) kept.emplace(c, n);
  }
  auto keep_always = [&](char32_t c) {
    const auto it = counts_.find(c);
    kept.emplace(c, it == counts_.end() ? 0 : it->second);
  };
  for (char32_t m : kMarkSet) keep_always(m);
  for (char32_t c : required) keep_always(c);

  std::vector<std::pair<char32_t, std::size_t>> ranked(kept.begin(), kept.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<char32_t> codepoints;
  codepoints.reserve(ranked.size());
  for (const auto& [c, n] : ranked) codepoints.push_back(c);
  return Vocabulary(std::move(codepoints));
}

Vocabulary build_vocab(std::span<const Text> corpus, std::size_t min_count, TextView required) {
  VocabBuilder builder;
  for (const Text& doc : corpus) builder.add(doc);
  return builder.finish(min_count, required);
}

}  // namespace taiyan
