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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace taiyan::io {

// All throw kIo on failure.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Splits on '\n', dropping a trailing '\r' per line and the empty remainder
// after a final newline.
std::vector<std::string> split_lines(std::string_view contents);

// RFC 4180 quoting. Throws kSchema on an unterminated quote.
std::vector<std::vector<std::string>> parse_csv(std::string_view contents);
std::string csv_field(std::string_view value);

}  // namespace taiyan::io
