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

#include "ckpool/chunking.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <chrono>
#include <unordered_set>

namespace ckpool {

ChunkId content_address(std::span<const uint8_t> payload) {
  std::array<uint8_t, ChunkId::kSize> digest;
  SHA256(payload.data(), payload.size(), digest.data());
  return ChunkId(digest);
}

void CbchParams::validate() const {
  if (window < 1) fail(ErrorCode::kUsage, "cbch: window must be >= 1");
  if (advance < 1 || advance > window) {
    fail(ErrorCode::kUsage, "cbch: advance must be in [1, window]");
  }
  if (boundary_bits < 1 || boundary_bits > 30) {
    fail(ErrorCode::kUsage, "cbch: boundary bits must be in [1, 30]");
  }
  if (min_chunk == 0 || min_chunk >= max_chunk) {
    fail(ErrorCode::kUsage, "cbch: need 0 < min_chunk < max_chunk");
  }
}

std::string describe(const ChunkingScheme& scheme) {
  if (const auto* fixed = std::get_if<FixedScheme>(&scheme)) {
    return "fsch(" + std::to_string(fixed->chunk_size) + ")";
  }
  const auto& p = std::get<CbchParams>(scheme);
  return "cbch(m=" + std::to_string(p.window) + ",k=" +
         std::to_string(p.boundary_bits) + ",p=" + std::to_string(p.advance) +
         ",min=" + std::to_string(p.min_chunk) +
         ",max=" + std::to_string(p.max_chunk) + ")";
}

BoundaryScanner::BoundaryScanner(const CbchParams& params)
    : params_(params),
      rabin_(params.window),
      mask_((uint64_t{1} << params.boundary_bits) - 1) {
  params_.validate();
}

void BoundaryScanner::reset() {
  have_fp_ = false;
  fp_ = 0;
  end_ = 0;
  next_window_ = 0;
}

size_t BoundaryScanner::next_cut(const uint8_t* chunk, size_t avail, bool eof) {
  const size_t m = params_.window;
  const size_t min = params_.min_chunk;
  const size_t max = params_.max_chunk;
  const size_t limit = std::min(avail, max);

  // Cuts shorter than min are never taken, so the first window tested is the
  // one ending at min (or at m when the window is longer than min).
  const size_t first = std::max(min, m);
  if (params_.advance == 1) {
    while (true) {
      if (!have_fp_) {
        if (limit < first) break;
        fp_ = rabin_.hash({chunk + first - m, m});
        end_ = first;
        have_fp_ = true;
      }
      if ((fp_ & mask_) == 0) return end_;
      if (end_ + 1 > limit) break;
      fp_ = rabin_.roll(fp_, chunk[end_ - m], chunk[end_]);
      ++end_;
    }
  } else {
    const size_t p = params_.advance;
    while (first + next_window_ * p <= limit) {
      const size_t end = first + next_window_ * p;
      ++next_window_;
      if ((rabin_.hash({chunk + end - m, m}) & mask_) == 0) return end;
    }
  }
  if (avail >= max) return max;
  if (eof && avail > 0) return avail;
  return 0;
}

namespace {

class FixedChunker final : public Chunker {
 public:
  FixedChunker(uint64_t chunk_size, ChunkSink sink)
      : chunk_size_(chunk_size), sink_(std::move(sink)) {
    if (chunk_size_ == 0) fail(ErrorCode::kUsage, "chunk size must be > 0");
    pending_.reserve(chunk_size_);
  }

  void feed(std::span<const uint8_t> data) override {
    fed_ += data.size();
    while (!data.empty()) {
      if (pending_.empty() && data.size() >= chunk_size_) {
        // Whole chunks straight from the caller's buffer.
        emit(data.first(chunk_size_));
        data = data.subspan(chunk_size_);
        continue;
      }
      const size_t take = std::min<size_t>(chunk_size_ - pending_.size(), data.size());
      pending_.insert(pending_.end(), data.begin(), data.begin() + take);
      data = data.subspan(take);
      if (pending_.size() == chunk_size_) {
        emit(pending_);
        pending_.clear();
      }
    }
  }

  void finish() override {
    if (!pending_.empty()) {
      emit(pending_);
      pending_.clear();
    }
  }

  uint64_t bytes_fed() const override { return fed_; }

 private:
  void emit(std::span<const uint8_t> payload) {
    const ChunkDescriptor d{content_address(payload), offset_, payload.size()};
    offset_ += payload.size();
    sink_(d, payload);
  }

  uint64_t chunk_size_;
  ChunkSink sink_;
  std::vector<uint8_t> pending_;
  uint64_t offset_ = 0;
  uint64_t fed_ = 0;
};

class ContentChunker final : public Chunker {
 public:
  ContentChunker(const CbchParams& params, ChunkSink sink)
      : scanner_(params), sink_(std::move(sink)) {}

  void feed(std::span<const uint8_t> data) override {
    fed_ += data.size();
    buf_.insert(buf_.end(), data.begin(), data.end());
    drain(false);
  }

  void finish() override { drain(true); }

  uint64_t bytes_fed() const override { return fed_; }

 private:
  void drain(bool eof) {
    while (true) {
      const size_t avail = buf_.size() - begin_;
      const size_t cut = scanner_.next_cut(buf_.data() + begin_, avail, eof);
      if (cut == 0) break;
      const std::span<const uint8_t> payload(buf_.data() + begin_, cut);
      const ChunkDescriptor d{content_address(payload), offset_, cut};
      offset_ += cut;
      begin_ += cut;
      scanner_.reset();
      sink_(d, payload);
    }
    if (begin_ > 0 && (begin_ == buf_.size() || begin_ >= buf_.size() / 2)) {
      buf_.erase(buf_.begin(), buf_.begin() + begin_);
      begin_ = 0;
    }
  }

  BoundaryScanner scanner_;
  ChunkSink sink_;
  std::vector<uint8_t> buf_;
  size_t begin_ = 0;
  uint64_t offset_ = 0;
  uint64_t fed_ = 0;
};

void drain_source(ByteSource& source, Chunker& chunker) {
  std::vector<uint8_t> buf(4 * kMiB);
  uint64_t consumed = 0;
  while (true) {
    size_t n;
    try {
      n = source.read(buf);
    } catch (const Error& e) {
      throw ChunkingIoError(e.what(), consumed);
    }
    if (n == 0) break;
    consumed += n;
    chunker.feed({buf.data(), n});
  }
  chunker.finish();
}

}  // namespace

std::unique_ptr<Chunker> Chunker::make(const ChunkingScheme& scheme,
                                       ChunkSink sink) {
  if (const auto* fixed = std::get_if<FixedScheme>(&scheme)) {
    return std::make_unique<FixedChunker>(fixed->chunk_size, std::move(sink));
  }
  return std::make_unique<ContentChunker>(std::get<CbchParams>(scheme),
                                          std::move(sink));
}

std::vector<ChunkDescriptor> chunk_fixed(std::span<const uint8_t> data,
                                         uint64_t chunk_size) {
  if (chunk_size == 0) fail(ErrorCode::kUsage, "chunk size must be > 0");
  std::vector<ChunkDescriptor> out;
  out.reserve(data.size() / chunk_size + 1);
  for (uint64_t off = 0; off < data.size(); off += chunk_size) {
    const auto payload = data.subspan(off, std::min<uint64_t>(chunk_size, data.size() - off));
    out.push_back({content_address(payload), off, payload.size()});
  }
  return out;
}

std::vector<ChunkDescriptor> chunk_fixed(ByteSource& source,
                                         uint64_t chunk_size) {
  std::vector<ChunkDescriptor> out;
  auto chunker = Chunker::make(FixedScheme{chunk_size},
                               [&](const ChunkDescriptor& d, auto) { out.push_back(d); });
  drain_source(source, *chunker);
  return out;
}

std::vector<ChunkDescriptor> chunk_content(std::span<const uint8_t> data,
                                           const CbchParams& params) {
  BoundaryScanner scanner(params);
  std::vector<ChunkDescriptor> out;
  size_t begin = 0;
  while (begin < data.size()) {
    const size_t cut = scanner.next_cut(data.data() + begin, data.size() - begin, true);
    const auto payload = data.subspan(begin, cut);
    out.push_back({content_address(payload), begin, cut});
    begin += cut;
    scanner.reset();
  }
  return out;
}

std::vector<ChunkDescriptor> chunk_content(ByteSource& source,
                                           const CbchParams& params) {
  std::vector<ChunkDescriptor> out;
  auto chunker = Chunker::make(params,
                               [&](const ChunkDescriptor& d, auto) { out.push_back(d); });
  drain_source(source, *chunker);
  return out;
}

std::vector<ChunkDescriptor> chunk_stream(std::span<const uint8_t> data,
                                          const ChunkingScheme& scheme) {
  if (const auto* fixed = std::get_if<FixedScheme>(&scheme)) {
    return chunk_fixed(data, fixed->chunk_size);
  }
  return chunk_content(data, std::get<CbchParams>(scheme));
}

SimilarityReport similarity(std::span<const ChunkDescriptor> reference,
                            std::span<const ChunkDescriptor> candidate) {
  std::unordered_set<ChunkId> known;
  known.reserve(reference.size());
  for (const auto& d : reference) known.insert(d.id);

  SimilarityReport r;
  for (const auto& d : candidate) {
    r.total_bytes += d.length;
    if (known.contains(d.id)) r.shared_bytes += d.length;
  }
  r.ratio = r.total_bytes == 0
                ? 0.0
                : static_cast<double>(r.shared_bytes) / static_cast<double>(r.total_bytes);
  return r;
}

SimilarityReport measure_similarity(std::span<const uint8_t> reference,
                                    std::span<const uint8_t> candidate,
                                    const ChunkingScheme& scheme) {
  const auto ref = chunk_stream(reference, scheme);
  const auto start = std::chrono::steady_clock::now();
  const auto cand = chunk_stream(candidate, scheme);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  SimilarityReport r = similarity(ref, cand);
  r.heuristic_throughput = secs > 0 ? static_cast<double>(candidate.size()) / secs : 0.0;
  return r;
}

}  // namespace ckpool
