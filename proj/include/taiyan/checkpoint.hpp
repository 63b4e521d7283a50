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

#include <cstdint>
#include <filesystem>
#include <string>

#include "taiyan/model.hpp"

namespace taiyan {

// Layout (all integers little-endian):
//   "TYCK" | u32 version | u32 config length | config JSON (UTF-8)
//   then per tensor, sorted by name:
//   u16 name length | name | u8 rank | u64 dims[rank] | f32 data
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  Parameters<float> params;
};

std::string config_to_json(const ModelConfig& cfg);
// Throws kSchema on missing or mistyped fields.
ModelConfig config_from_json(std::string_view text);

std::string encode_checkpoint(const ModelConfig& cfg, const Parameters<float>& params);
// Throws kBadCheckpoint.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const Parameters<float>& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace taiyan
