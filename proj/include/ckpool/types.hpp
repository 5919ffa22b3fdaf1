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

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ckpool/chunk_id.hpp"

namespace ckpool {

using BenefactorId = uint64_t;
using ReservationId = uint64_t;
using Version = uint64_t;

// Milliseconds since the Unix epoch; the manager's notion of time.
using Millis = std::chrono::milliseconds;
using TimePoint = std::chrono::time_point<std::chrono::system_clock, Millis>;

inline TimePoint wall_now() {
  return std::chrono::time_point_cast<Millis>(std::chrono::system_clock::now());
}

// Checkpoint image name A.N.T: application, node, timestep.
struct DatasetName {
  std::string application;
  std::string node;
  uint64_t timestep = 0;

  std::string str() const;
  // Inverse of str(); nullopt for anything str() cannot produce.
  static std::optional<DatasetName> parse(std::string_view text);
  // Throws Error(kUsage) where parse() would return nullopt.
  static DatasetName must_parse(std::string_view text);

  auto operator<=>(const DatasetName&) const = default;
};

// Application and node names are non-empty and free of '.', '/' and control
// characters.
bool valid_name_component(std::string_view s);

enum class LifecycleMode : uint8_t { kNone = 0, kReplace = 1, kPurge = 2 };

std::string_view lifecycle_mode_name(LifecycleMode mode);
std::optional<LifecycleMode> parse_lifecycle_mode(std::string_view text);

struct LifecyclePolicy {
  LifecycleMode mode = LifecycleMode::kNone;
  Millis purge_after{0};  // meaningful only for kPurge

  bool operator==(const LifecyclePolicy&) const = default;
};

enum class BenefactorStatus : uint8_t { kOnline = 0, kOffline = 1 };

struct BenefactorRecord {
  BenefactorId id = 0;
  std::string address;
  uint64_t free_space = 0;
  TimePoint last_heartbeat{};
  BenefactorStatus status = BenefactorStatus::kOffline;
};

struct StripeMember {
  BenefactorId id = 0;
  std::string address;
  uint64_t reserved_bytes = 0;
};

struct ReservationGrant {
  ReservationId id = 0;
  std::vector<StripeMember> members;
  TimePoint expiry{};
};

struct ChunkRef {
  ChunkId id;
  uint64_t length = 0;
  std::vector<BenefactorId> replicas;

  bool operator==(const ChunkRef&) const = default;
};

enum class ReplicationState : uint8_t { kPending = 0, kSatisfied = 1 };

std::string_view replication_state_name(ReplicationState s);

struct ChunkMap {
  DatasetName dataset;
  Version version = 0;
  std::vector<ChunkRef> chunks;
  uint64_t total_bytes = 0;
  TimePoint committed_at{};
  uint32_t replication = 1;
  ReplicationState replication_state = ReplicationState::kPending;
  // Addresses of every benefactor named in `chunks`, for direct reads.
  std::vector<StripeMember> locations;

  const std::string* address_of(BenefactorId id) const;
};

struct ChunkLocation {
  ChunkId id;
  uint64_t length = 0;
  std::vector<StripeMember> replicas;
};

struct ChunkAnnouncement {
  ChunkId id;
  uint64_t length = 0;
};

struct ReplicaAssignment {
  ChunkId chunk;
  BenefactorId source = 0;
  BenefactorId target = 0;
  std::string source_address;
  std::string target_address;
  uint64_t length = 0;
};

struct ShadowChunkMap {
  DatasetName dataset;
  Version version = 0;
  std::vector<ReplicaAssignment> assignments;
};

struct VersionInfo {
  Version version = 0;
  uint64_t total_bytes = 0;
  uint64_t chunk_count = 0;
  TimePoint committed_at{};
  uint32_t replication = 1;
  ReplicationState replication_state = ReplicationState::kPending;
};

struct DatasetInfo {
  DatasetName name;
  std::vector<VersionInfo> versions;  // ascending
};

struct FolderInfo {
  std::string application;
  LifecyclePolicy policy;
  std::vector<DatasetInfo> datasets;  // sorted by name
};

struct NamespaceListing {
  std::vector<FolderInfo> folders;  // sorted by application
};

struct PurgedVersion {
  DatasetName dataset;
  Version version = 0;
  bool operator==(const PurgedVersion&) const = default;
};

}  // namespace ckpool
