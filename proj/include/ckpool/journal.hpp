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

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ckpool {

enum class RecordType : uint8_t {
  kRegisterBenefactor = 1,
  kSetPolicy = 2,
  kCommit = 3,
  kAddReplica = 4,
  kDropReplica = 5,
  kDeleteDataset = 6,
  kDeleteFolder = 7,
  kPurge = 8,
  kSetReplication = 9,
};

struct JournalRecord {
  RecordType type{};
  std::vector<uint8_t> payload;
};

// Append-only log of manager mutations. Each record is a u32 big-endian
// length (type byte plus payload), a type byte and the payload.
class Journal {
 public:
  Journal(std::filesystem::path path, bool fsync);
  ~Journal();
  Journal(const Journal&) = delete;
  Journal& operator=(const Journal&) = delete;

  // Reads every intact record and truncates a torn tail, if any.
  std::vector<JournalRecord> replay();

  // `durable` forces the record (and everything before it) to stable
  // storage when fsync is enabled.
  void append(RecordType type, std::span<const uint8_t> payload, bool durable);

  // Forces every appended record to stable storage (when fsync is enabled).
  void sync();

  uint64_t records_appended() const { return appended_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  bool fsync_;
  int fd_ = -1;
  uint64_t appended_ = 0;
};

}  // namespace ckpool
