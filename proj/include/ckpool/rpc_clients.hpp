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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ckpool/net.hpp"
#include "ckpool/types.hpp"

namespace ckpool {

struct RegisterReply {
  BenefactorId id = 0;
  Millis heartbeat_interval{0};
};

struct CommitReply {
  Version version = 0;
  ReplicationState replication_state = ReplicationState::kPending;
};

struct ReplicaResult {
  ChunkId chunk;
  BenefactorId target = 0;
  bool ok = false;
  std::string reason;
};

struct StoreStats {
  BenefactorId id = 0;
  uint64_t used_bytes = 0;
  uint64_t capacity = 0;
  uint64_t chunk_count = 0;
  uint64_t quarantined = 0;
  bool draining = false;
};

// Typed stubs for the manager's RPC surface. Thread-safe.
class ManagerClient {
 public:
  explicit ManagerClient(std::string address,
                         std::chrono::milliseconds timeout = std::chrono::seconds(30));

  const std::string& address() const { return address_; }

  void ping();
  RegisterReply register_benefactor(const std::string& address, uint64_t free_space);
  void heartbeat(BenefactorId id, uint64_t free_space);
  ReservationGrant reserve_space(const std::string& client_id, uint64_t bytes_hint,
                                 uint32_t stripe_width,
                                 std::span<const BenefactorId> exclude = {});
  ReservationGrant extend_reservation(ReservationId id, uint64_t additional_bytes);
  void release_reservation(ReservationId id);
  std::vector<ChunkLocation> announce_chunks(ReservationId id,
                                             std::span<const ChunkAnnouncement> chunks);
  std::vector<ChunkLocation> lookup_chunks(std::span<const ChunkId> ids);
  CommitReply commit_chunk_map(const DatasetName& dataset, std::span<const ChunkRef> chunks,
                               ReservationId reservation, uint32_t replication);
  // version 0 selects the latest.
  ChunkMap get_chunk_map(const DatasetName& dataset, Version version = 0);
  ShadowChunkMap plan_replication(const DatasetName& dataset, Version version, uint32_t r);
  void commit_replica(const DatasetName& dataset, Version version, const ChunkId& chunk,
                      BenefactorId benefactor);
  void replica_failed(const ChunkId& chunk, BenefactorId source, BenefactorId target,
                      const std::string& reason);
  uint64_t gc_begin(BenefactorId id);
  std::vector<ChunkId> gc_exchange(BenefactorId id, uint64_t snapshot,
                                   std::span<const ChunkId> inventory);
  std::vector<PurgedVersion> apply_lifecycle();
  uint32_t delete_dataset(const DatasetName& dataset);
  uint32_t delete_folder(const std::string& application);
  NamespaceListing list_namespace(const std::string& prefix = "");
  std::vector<PurgedVersion> set_policy(const std::string& application,
                                        const LifecyclePolicy& policy);
  std::vector<BenefactorRecord> list_benefactors();
  void set_replication_paused(bool paused);

 private:
  std::vector<uint8_t> call(uint8_t opcode, WireWriter& w);

  std::string address_;
  ConnectionPool pool_;
};

// Typed stubs for benefactor RPCs; one instance serves any number of
// benefactor addresses.
class BenefactorClient {
 public:
  explicit BenefactorClient(std::chrono::milliseconds timeout = std::chrono::seconds(30));

  // Returns true when the chunk was newly stored.
  bool put_chunk(const std::string& address, const ChunkId& id,
                 std::span<const uint8_t> payload);
  std::vector<uint8_t> get_chunk(const std::string& address, const ChunkId& id);
  uint32_t delete_chunks(const std::string& address, std::span<const ChunkId> ids);
  std::vector<ChunkId> inventory(const std::string& address);
  // With wait set the reply carries the outcome of every push; otherwise the
  // work is queued and only immediate failures are reported.
  std::vector<ReplicaResult> replicate_to(const std::string& address,
                                          const ShadowChunkMap& plan, bool wait);
  uint32_t run_gc_round(const std::string& address);
  void drain(const std::string& address, bool on);
  StoreStats store_stats(const std::string& address);
  uint32_t scrub(const std::string& address);

  void forget(const std::string& address) { pool_.forget(address); }

 private:
  ConnectionPool pool_;
};

}  // namespace ckpool
