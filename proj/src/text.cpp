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

#include "taiyan/text.hpp"

#include <cstdint>

#include "taiyan/error.hpp"

namespace taiyan {

Text from_utf8(std::string_view bytes) {
  Text out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  while (i < bytes.size()) {
    const auto lead = static_cast<std::uint8_t>(bytes[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (lead < 0x80) {
      len = 1;
      cp = lead;
    } else if ((lead & 0xE0) == 0xC0) {
      len = 2;
      cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
      len = 3;
      cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
      len = 4;
      cp = lead & 0x07;
    } else {
      throw Error(ErrorCode::kSchema, "invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > bytes.size()) {
      throw Error(ErrorCode::kSchema, "truncated UTF-8 sequence at offset " + std::to_string(i));
    }
    for (std::size_t k = 1; k < len; ++k) {
      const auto cont = static_cast<std::uint8_t>(bytes[i + k]);
      if ((cont & 0xC0) != 0x80) {
        throw Error(ErrorCode::kSchema, "invalid UTF-8 continuation at offset " + std::to_string(i + k));
      }
      cp = (cp << 6) | (cont & 0x3F);
    }
    static constexpr char32_t kMinForLength[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMinForLength[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      throw Error(ErrorCode::kSchema, "invalid code point in UTF-8 at offset " + std::to_string(i));
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string to_utf8(TextView text) {
  std::string out;
  out.reserve(text.size() * 3);
  for (char32_t cp : text) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

Text strip_marks(TextView text) {
  Text out;
  out.reserve(text.size());
  for (char32_t c : text) {
    if (!is_mark(c)) out.push_back(c);
  }
  return out;
}

PunctuationAlignment align(TextView punctuated) {
  PunctuationAlignment a;
  a.chars.reserve(punctuated.size());
  bool last_was_mark = false;
  for (std::size_t i = 0; i < punctuated.size(); ++i) {
    const char32_t c = punctuated[i];
    if (!is_mark(c)) {
      a.chars.push_back(c);
      last_was_mark = false;
      continue;
    }
    if (i == 0) {
      throw Error(ErrorCode::kMalformedPunctuation, "text begins with a mark");
    }
    if (last_was_mark) {
      throw Error(ErrorCode::kMalformedPunctuation,
                  "consecutive marks at codepoint offset " + std::to_string(i));
    }
    a.boundary_marks.emplace(a.chars.size(), c);
    last_was_mark = true;
  }
  return a;
}

Text render(const PunctuationAlignment& alignment) {
  Text out;
  out.reserve(alignment.chars.size() + alignment.boundary_marks.size());
  auto mark = alignment.boundary_marks.begin();
  for (std::size_t b = 0; b <= alignment.chars.size(); ++b) {
    if (mark != alignment.boundary_marks.end() && mark->first == b) {
      out.push_back(mark->second);
      ++mark;
    }
    if (b < alignment.chars.size()) out.push_back(alignment.chars[b]);
  }
  return out;
}

}  // namespace taiyan
