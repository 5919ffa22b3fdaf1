// Copyright 2026 The ckpool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace ckpool {

// 256-bit SHA-256 digest naming a chunk by its content.
class ChunkId {
 public:
  static constexpr size_t kSize = 32;

  ChunkId() = default;
  explicit ChunkId(const std::array<uint8_t, kSize>& bytes) : bytes_(bytes) {}

  static ChunkId from_bytes(std::span<const uint8_t> raw);
  // Accepts exactly 64 hex digits (either case); nullopt otherwise.
  static std::optional<ChunkId> from_hex(std::string_view hex);

  // Lowercase hexadecimal; used for storage filenames and CLI output.
  std::string hex() const;
  std::string short_hex() const { return hex().substr(0, 12); }

  const std::array<uint8_t, kSize>& bytes() const { return bytes_; }

  auto operator<=>(const ChunkId&) const = default;

 private:
  std::array<uint8_t, kSize> bytes_{};
};

struct ChunkIdHash {
  size_t operator()(const ChunkId& id) const noexcept {
    // A digest is already uniformly distributed.
    size_t h;
    std::memcpy(&h, id.bytes().data(), sizeof(h));
    return h;
  }
};

}  // namespace ckpool

template <>
struct std::hash<ckpool::ChunkId> : ckpool::ChunkIdHash {};
