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

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>

namespace taiyan {

// Text is handled as sequences of Unicode scalar values.
using Text = std::u32string;
using TextView = std::u32string_view;

Text from_utf8(std::string_view bytes);
std::string to_utf8(TextView text);

// The seven scored punctuation marks, in canonical order.
inline constexpr std::array<char32_t, 7> kMarkSet = {U'，', U'。', U'！', U'？', U'；', U'：', U'、'};

constexpr bool is_mark(char32_t c) noexcept {
  for (char32_t m : kMarkSet) {
    if (m == c) return true;
  }
  return false;
}

// Source characters plus the mark (if any) placed at each boundary.
// Boundary i sits after chars[i-1]; boundary 0 precedes the first char.
struct PunctuationAlignment {
  Text chars;
  std::map<std::size_t, char32_t> boundary_marks;

  bool operator==(const PunctuationAlignment&) const = default;
};

Text strip_marks(TextView text);

// Throws kMalformedPunctuation on a leading mark or a run of two marks.
PunctuationAlignment align(TextView punctuated);

Text render(const PunctuationAlignment& alignment);

}  // namespace taiyan
