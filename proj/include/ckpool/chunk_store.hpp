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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "ckpool/chunk_id.hpp"

namespace ckpool {

// Content-addressed chunk files under root/chunks/ab/cd/<hex>. Writes land in
// root/tmp and are renamed into place; corrupt chunks move to
// root/quarantine.
class ChunkStore {
 public:
  ChunkStore(std::filesystem::path root, uint64_t capacity, bool fsync = false);

  // Verifies the digest and stores the payload. Returns false when the chunk
  // was already present. Throws kIntegrity or kNoSpace.
  bool put(const ChunkId& id, std::span<const uint8_t> payload);
  // Throws kNotFound, or kIntegrity after quarantining a corrupt file.
  std::vector<uint8_t> get(const ChunkId& id);
  bool contains(const ChunkId& id) const;

  uint32_t remove(std::span<const ChunkId> ids);
  // Removes only chunks not written since `generation` was read, so a put
  // racing a collection round always survives it.
  uint32_t remove_untouched(std::span<const ChunkId> ids, uint64_t generation);
  uint64_t generation() const { return generation_.load(); }

  std::vector<ChunkId> inventory() const;
  // Re-hashes every chunk; returns how many were quarantined.
  uint32_t scrub();

  uint64_t used_bytes() const;
  uint64_t capacity() const { return capacity_; }
  uint64_t free_bytes() const;
  uint64_t chunk_count() const;
  uint64_t quarantined() const { return quarantined_.load(); }

  std::filesystem::path path_for(const ChunkId& id) const;
  // Location of a chunk file below a store root.
  static std::filesystem::path relative_path(const ChunkId& id);
  const std::filesystem::path& root() const { return root_; }

  // Sum of chunk file sizes found on disk, independent of the index.
  uint64_t scan_disk_bytes() const;

 private:
  struct Entry {
    uint64_t size = 0;
    uint64_t touched = 0;
  };

  void load();
  void quarantine(const ChunkId& id);
  bool erase_locked(const ChunkId& id);

  std::filesystem::path root_;
  std::filesystem::path chunks_dir_;
  std::filesystem::path tmp_dir_;
  std::filesystem::path quarantine_dir_;
  uint64_t capacity_;
  bool fsync_;

  mutable std::mutex mu_;
  std::unordered_map<ChunkId, Entry, ChunkIdHash> index_;
  uint64_t used_ = 0;
  uint64_t pending_ = 0;  // bytes of puts in progress
  std::atomic<uint64_t> generation_{1};
  std::atomic<uint64_t> tmp_counter_{0};
  std::atomic<uint64_t> quarantined_{0};
};

}  // namespace ckpool
