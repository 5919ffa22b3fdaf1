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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ckpool/byte_source.hpp"
#include "ckpool/chunk_id.hpp"
#include "ckpool/error.hpp"
#include "ckpool/rolling_hash.hpp"

namespace ckpool {

inline constexpr uint64_t kKiB = 1024;
inline constexpr uint64_t kMiB = 1024 * kKiB;
inline constexpr uint64_t kDefaultChunkSize = 1 * kMiB;

// SHA-256 of `payload`.
ChunkId content_address(std::span<const uint8_t> payload);

struct ChunkDescriptor {
  ChunkId id;
  uint64_t offset = 0;
  uint64_t length = 0;

  bool operator==(const ChunkDescriptor&) const = default;
};

// Content-based chunking parameters. The first `window`-byte window tested
// ends min_chunk bytes into the chunk and each later one `advance` bytes
// further; a boundary follows a window whose fingerprint has its
// `boundary_bits` low bits clear.
struct CbchParams {
  uint32_t window = 20;
  uint32_t boundary_bits = 14;
  uint32_t advance = 20;
  uint64_t min_chunk = 64 * kKiB;
  uint64_t max_chunk = 4 * kMiB;

  // Throws Error(kUsage) when an invariant does not hold.
  void validate() const;

  bool operator==(const CbchParams&) const = default;

  static CbchParams no_overlap(uint32_t m = 20, uint32_t k = 14) {
    return CbchParams{m, k, m, 64 * kKiB, 4 * kMiB};
  }
  static CbchParams overlap(uint32_t m = 20, uint32_t k = 14) {
    return CbchParams{m, k, 1, 64 * kKiB, 4 * kMiB};
  }
};

struct FixedScheme {
  uint64_t chunk_size = kDefaultChunkSize;
  bool operator==(const FixedScheme&) const = default;
};

using ChunkingScheme = std::variant<FixedScheme, CbchParams>;

std::string describe(const ChunkingScheme& scheme);

// Raised when the byte source fails; `consumed` bytes were read before it.
class ChunkingIoError : public Error {
 public:
  ChunkingIoError(const std::string& message, uint64_t consumed)
      : Error(ErrorCode::kIo, message), consumed_(consumed) {}
  uint64_t consumed() const { return consumed_; }

 private:
  uint64_t consumed_;
};

// Finds content-defined cut points for one chunk at a time. The scanner keeps
// its position between calls so a growing chunk prefix is never rescanned.
class BoundaryScanner {
 public:
  explicit BoundaryScanner(const CbchParams& params);

  // `chunk` points at the first byte of the current chunk and `avail` bytes
  // are readable. Returns the chunk length once a cut is known, 0 when more
  // data is needed. With eof set a non-empty remainder is always cut.
  size_t next_cut(const uint8_t* chunk, size_t avail, bool eof);

  // Forget the current chunk; call after each cut.
  void reset();

 private:
  CbchParams params_;
  RabinWindow rabin_;
  uint64_t mask_;
  // p == 1: fingerprint of the window ending at end_, not yet tested.
  bool have_fp_ = false;
  uint64_t fp_ = 0;
  size_t end_ = 0;
  // p > 1: index of the next untested window.
  size_t next_window_ = 0;
};

using ChunkSink =
    std::function<void(const ChunkDescriptor&, std::span<const uint8_t>)>;

// Push-style chunker used by the write pipeline: bytes are fed in stream order
// and every completed chunk is handed to the sink together with its payload.
class Chunker {
 public:
  virtual ~Chunker() = default;
  virtual void feed(std::span<const uint8_t> data) = 0;
  // Flushes the final partial chunk.
  virtual void finish() = 0;
  virtual uint64_t bytes_fed() const = 0;

  static std::unique_ptr<Chunker> make(const ChunkingScheme& scheme,
                                       ChunkSink sink);
};

std::vector<ChunkDescriptor> chunk_fixed(ByteSource& source,
                                         uint64_t chunk_size);
std::vector<ChunkDescriptor> chunk_fixed(std::span<const uint8_t> data,
                                         uint64_t chunk_size);
std::vector<ChunkDescriptor> chunk_content(ByteSource& source,
                                           const CbchParams& params);
std::vector<ChunkDescriptor> chunk_content(std::span<const uint8_t> data,
                                           const CbchParams& params);
std::vector<ChunkDescriptor> chunk_stream(std::span<const uint8_t> data,
                                          const ChunkingScheme& scheme);

struct SimilarityReport {
  uint64_t shared_bytes = 0;
  uint64_t total_bytes = 0;
  double ratio = 0.0;
  // Bytes per second spent chunking and hashing the candidate; 0 when the
  // report was computed from descriptors alone.
  double heuristic_throughput = 0.0;
};

// Fraction of the candidate's bytes whose chunk ids also occur in the
// reference version.
SimilarityReport similarity(std::span<const ChunkDescriptor> reference,
                            std::span<const ChunkDescriptor> candidate);

// Chunks both versions with `scheme` and times the candidate pass.
SimilarityReport measure_similarity(std::span<const uint8_t> reference,
                                    std::span<const uint8_t> candidate,
                                    const ChunkingScheme& scheme);

}  // namespace ckpool
