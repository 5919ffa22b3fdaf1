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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ckpool/chunk_id.hpp"

namespace ckpool {

// Frame layout: u32 length (of everything after it), u8 opcode, u64 request
// id, payload. All integers big-endian.
struct Frame {
  uint8_t opcode = 0;
  uint64_t request_id = 0;
  std::vector<uint8_t> payload;
};

inline constexpr size_t kFrameHeaderSize = 4 + 1 + 8;
inline constexpr uint32_t kMaxFrameLength = 256u << 20;

std::vector<uint8_t> encode_frame(const Frame& frame);

class WireWriter {
 public:
  WireWriter& u8(uint8_t v);
  WireWriter& u16(uint16_t v);
  WireWriter& u32(uint32_t v);
  WireWriter& u64(uint64_t v);
  WireWriter& boolean(bool v) { return u8(v ? 1 : 0); }
  // u16 length + UTF-8 bytes.
  WireWriter& str(std::string_view s);
  WireWriter& id(const ChunkId& id);
  // u32 length + raw bytes.
  WireWriter& blob(std::span<const uint8_t> bytes);
  // List prefix; the caller writes `count` elements afterwards.
  WireWriter& count(size_t n);

  template <typename Seq, typename Fn>
  WireWriter& list(const Seq& seq, Fn&& write_one) {
    count(std::size(seq));
    for (const auto& item : seq) write_one(*this, item);
    return *this;
  }

  std::vector<uint8_t>& bytes() { return buf_; }
  std::vector<uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<uint8_t> buf_;
};

// Bounds-checked reader; every underflow throws Error(kMalformed).
class WireReader {
 public:
  explicit WireReader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  bool boolean() { return u8() != 0; }
  std::string str();
  ChunkId id();
  std::span<const uint8_t> blob();
  std::vector<uint8_t> blob_copy();
  // Reads a list prefix, rejecting counts that cannot fit in the remaining
  // bytes given each element needs at least `min_element_size`.
  size_t count(size_t min_element_size = 1);

  template <typename T, typename Fn>
  std::vector<T> list(Fn&& read_one, size_t min_element_size = 1) {
    const size_t n = count(min_element_size);
    std::vector<T> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) out.push_back(read_one(*this));
    return out;
  }

  size_t remaining() const { return data_.size() - pos_; }
  // Throws unless every byte was consumed.
  void expect_end() const;

 private:
  std::span<const uint8_t> take(size_t n);

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

}  // namespace ckpool
