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

#include "taiyan/checkpoint.hpp"

#include <bit>
#include <limits>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "taiyan/error.hpp"

namespace taiyan {

namespace {

constexpr char kMagic[4] = {'T', 'Y', 'C', 'K'};

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename U>
  U get_le() {
    need(sizeof(U));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::kBadCheckpoint, "unexpected end of checkpoint");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string config_to_json(const ModelConfig& cfg) {
  nlohmann::json j = {
      {"n_layers", cfg.n_layers}, {"d_model", cfg.d_model},       {"n_heads", cfg.n_heads},
      {"d_ff", cfg.d_ff},         {"vocab_size", cfg.vocab_size}, {"max_seq_len", cfg.max_seq_len},
  };
  return j.dump();
}

ModelConfig config_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("model config is not JSON: ") + e.what());
  }
  auto field = [&](const char* name) {
    if (!j.contains(name) || !j[name].is_number_integer()) {
      throw Error(ErrorCode::kSchema, std::string("model config needs integer field ") + name);
    }
    return j[name].get<int>();
  };
  ModelConfig cfg;
  cfg.n_layers = field("n_layers");
  cfg.d_model = field("d_model");
  cfg.n_heads = field("n_heads");
  cfg.d_ff = field("d_ff");
  cfg.vocab_size = field("vocab_size");
  cfg.max_seq_len = field("max_seq_len");
  cfg.validate();
  return cfg;
}

std::string encode_checkpoint(const ModelConfig& cfg, const Parameters<float>& params) {
  static_assert(std::numeric_limits<float>::is_iec559);
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  const std::string config = config_to_json(cfg);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(config.size()));
  out += config;
  for (const auto& t : named_tensors(params)) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out += t.name;
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
    for (auto dim : t.shape) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(dim));
    for (float v : t.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(4) != std::string_view(kMagic, 4)) throw Error(ErrorCode::kBadCheckpoint, "bad magic");
  const auto version = in.get_le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kBadCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto config_len = in.get_le<std::uint32_t>();
  Checkpoint ck;
  try {
    ck.config = config_from_json(in.take(config_len));
  } catch (const Error& e) {
    throw Error(ErrorCode::kBadCheckpoint, e.what());
  }
  ck.params = Parameters<float>::zeros(ck.config);
  for (auto& t : named_tensors(ck.params)) {
    const auto name_len = in.get_le<std::uint16_t>();
    const auto name = in.take(name_len);
    if (name != t.name) {
      throw Error(ErrorCode::kBadCheckpoint, "expected tensor " + t.name + ", found " + std::string(name));
    }
    const auto rank = in.get_le<std::uint8_t>();
    if (rank != t.shape.size()) throw Error(ErrorCode::kBadCheckpoint, "rank mismatch for " + t.name);
    for (auto dim : t.shape) {
      if (in.get_le<std::uint64_t>() != static_cast<std::uint64_t>(dim)) {
        throw Error(ErrorCode::kBadCheckpoint, "shape mismatch for " + t.name);
      }
    }
    for (float& v : t.data) v = std::bit_cast<float>(in.get_le<std::uint32_t>());
  }
  if (!in.done()) throw Error(ErrorCode::kBadCheckpoint, "trailing bytes after last tensor");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const Parameters<float>& params) {
  const std::string bytes = encode_checkpoint(cfg, params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace taiyan
