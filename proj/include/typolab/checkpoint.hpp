// Copyright 2026 The TypoLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TYPOLAB_CHECKPOINT_HPP_
#define TYPOLAB_CHECKPOINT_HPP_

// Checkpoint container.
//
//   bytes 0..7    magic "TYPOLABC"
//   bytes 8..11   format version, uint32 little-endian (currently 1)
//   bytes 12..19  header length H, uint64 little-endian
//   next H bytes  UTF-8 JSON header: config, tensor directory
//                 ([{name, shape:[rows, cols], offset}] with offsets in bytes
//                 from the start of the payload), free-form metadata
//   payload       every tensor as row-major IEEE-754 float32, little-endian,
//                 in directory order
//
// The JSON header is written with sorted keys, so identical weights and
// metadata always produce identical bytes.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "typolab/error.hpp"
#include "typolab/hash.hpp"
#include "typolab/model.hpp"

namespace typolab {

inline constexpr char kCheckpointMagic[8] = {'T', 'Y', 'P', 'O', 'L', 'A', 'B', 'C'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Weights<float> weights;
  nlohmann::json metadata = nlohmann::json::object();
};

namespace detail {

inline void put_le(std::string& out, uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline uint64_t get_le(std::string_view in, size_t at, int bytes) {
  uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<uint64_t>(static_cast<unsigned char>(in[at + static_cast<size_t>(i)]))
         << (8 * i);
  }
  return v;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format"] = "typolab-checkpoint";
  header["version"] = kCheckpointVersion;
  header["byte_order"] = "little";
  header["dtype"] = "float32";
  header["config"] = ckpt.weights.config;
  header["metadata"] = ckpt.metadata;
  auto& dir = header["tensors"] = nlohmann::json::array();
  std::string payload;
  ckpt.weights.for_each_tensor([&](const std::string& name, const Mat<float>& m) {
    dir.push_back({{"name", name},
                   {"shape", {m.rows(), m.cols()}},
                   {"offset", payload.size()}});
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      detail::put_le(payload, std::bit_cast<uint32_t>(m.data()[i]), 4);
    }
  });
  const std::string text = header.dump();
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_le(out, kCheckpointVersion, 4);
  detail::put_le(out, text.size(), 8);
  out += text;
  out += payload;
  return out;
}

inline Checkpoint parse_checkpoint(std::string_view bytes) {
  auto bad = [](const std::string& what) {
    return Error(ErrorCode::kBadCheckpoint, what);
  };
  if (bytes.size() < 20 ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw bad("missing magic");
  }
  const auto version = detail::get_le(bytes, 8, 4);
  if (version != kCheckpointVersion) {
    throw bad("unsupported version " + std::to_string(version));
  }
  const auto header_len = detail::get_le(bytes, 12, 8);
  if (20 + header_len > bytes.size()) throw bad("truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(20, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw bad(std::string("header is not JSON: ") + e.what());
  }
  const std::string_view payload = bytes.substr(20 + header_len);
  Checkpoint ckpt;
  ModelConfig config;
  try {
    config = header.at("config").get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw bad(std::string("bad config: ") + e.what());
  }
  ckpt.weights = zero_weights<float>(config);
  ckpt.metadata = header.value("metadata", nlohmann::json::object());
  if (!header.contains("tensors") || !header.at("tensors").is_array()) {
    throw bad("missing tensor directory");
  }
  const auto& dir = header.at("tensors");
  size_t index = 0;
  try {
    ckpt.weights.for_each_tensor([&](const std::string& name, Mat<float>& m) {
      if (index >= dir.size()) throw bad("missing tensor " + name);
      const auto& entry = dir[index++];
      if (entry.at("name").get<std::string>() != name) {
        throw bad("expected tensor " + name);
      }
      const auto rows = entry.at("shape")[0].get<Eigen::Index>();
      const auto cols = entry.at("shape")[1].get<Eigen::Index>();
      if (rows != m.rows() || cols != m.cols()) throw bad("shape mismatch for " + name);
      const auto offset = entry.at("offset").get<size_t>();
      if (offset + 4 * static_cast<size_t>(m.size()) > payload.size()) {
        throw bad("truncated payload for " + name);
      }
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = std::bit_cast<float>(static_cast<uint32_t>(
            detail::get_le(payload, offset + 4 * static_cast<size_t>(i), 4)));
      }
    });
  } catch (const nlohmann::json::exception& e) {
    throw bad(std::string("bad tensor directory: ") + e.what());
  }
  if (index != dir.size()) throw bad("unexpected extra tensors");
  if (payload.size() != 4 * ckpt.weights.parameter_count()) {
    throw bad("payload size does not match the tensors");
  }
  return ckpt;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file(path, serialize_checkpoint(ckpt));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return parse_checkpoint(read_file(path));
}

inline std::string checkpoint_hash(const Checkpoint& ckpt) {
  return hash_string(serialize_checkpoint(ckpt));
}

}  // namespace typolab

#endif  // TYPOLAB_CHECKPOINT_HPP_
