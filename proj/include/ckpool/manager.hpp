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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ckpool/config.hpp"
#include "ckpool/journal.hpp"
#include "ckpool/rpc_clients.hpp"
#include "ckpool/types.hpp"

namespace ckpool {

struct ManagerConfig {
  std::string listen = "127.0.0.1:7070";
  Millis heartbeat_interval{5000};
  // Zero means three heartbeat intervals.
  Millis liveness_timeout{0};
  Millis reservation_ttl{10 * 60 * 1000};
  uint32_t default_replication = 1;
  LifecyclePolicy default_policy{};
  Millis lifecycle_interval{1000};
  Millis replication_interval{100};
  // An issued replica copy that is neither confirmed nor failed within this
  // long is planned again.
  Millis replication_retry{30000};
  // A target that failed a copy is skipped for this chunk for a while.
  Millis failed_target_backoff{5000};
  std::string journal;  // empty keeps metadata in memory only
  bool journal_fsync = true;

  Millis effective_liveness_timeout() const {
    return liveness_timeout.count() > 0 ? liveness_timeout : 3 * heartbeat_interval;
  }

  static ManagerConfig from(const KeyValueConfig& kv);
};

// The metadata service. Every mutation runs under one exclusive lock, so the
// effects are totally ordered; reads share the lock.
class Manager {
 public:
  using Clock = std::function<TimePoint()>;

  explicit Manager(ManagerConfig config, Clock clock = wall_now);
  ~Manager();
  Manager(const Manager&) = delete;
  Manager& operator=(const Manager&) = delete;

  const ManagerConfig& config() const { return config_; }
  TimePoint now() const { return clock_(); }

  RegisterReply register_benefactor(const std::string& address, uint64_t free_space);
  // Throws kUnknownBenefactor so the caller re-registers.
  void heartbeat(BenefactorId id, uint64_t free_space);
  std::vector<BenefactorRecord> list_benefactors() const;

  // Held by the RPC layer while a reservation request waits for the lock.
  class QueuedRequest {
   public:
    explicit QueuedRequest(std::atomic<int>* counter) : counter_(counter) { ++*counter_; }
    ~QueuedRequest() {
      if (counter_) --*counter_;
    }
    QueuedRequest(QueuedRequest&& o) noexcept : counter_(o.counter_) { o.counter_ = nullptr; }
    QueuedRequest(const QueuedRequest&) = delete;
    QueuedRequest& operator=(const QueuedRequest&) = delete;

   private:
    std::atomic<int>* counter_;
  };
  QueuedRequest queue_reservation_request() { return QueuedRequest(&queued_reservations_); }

  ReservationGrant reserve_space(const std::string& client_id, uint64_t bytes_hint,
                                 uint32_t stripe_width,
                                 std::span<const BenefactorId> exclude = {});
  ReservationGrant extend_reservation(ReservationId id, uint64_t additional_bytes);
  void release_reservation(ReservationId id);

  // Records the chunks as in flight under the reservation (shielding them
  // from collection) and returns the ones already durably stored.
  std::vector<ChunkLocation> announce_chunks(ReservationId id,
                                             std::span<const ChunkAnnouncement> chunks);
  std::vector<ChunkLocation> lookup_chunks(std::span<const ChunkId> ids) const;

  // reservation 0 commits without one; every chunk must then already be
  // referenced by a live version.
  CommitReply commit_chunk_map(const DatasetName& dataset, std::span<const ChunkRef> chunks,
                               ReservationId reservation, uint32_t replication);
  // version 0 is the latest live version. Throws kNotFound or kPurged.
  ChunkMap get_chunk_map(const DatasetName& dataset, Version version = 0) const;

  ShadowChunkMap plan_replication(const DatasetName& dataset, Version version, uint32_t r);
  void commit_replica(const DatasetName& dataset, Version version, const ChunkId& chunk,
                      BenefactorId benefactor);
  void replica_failed(const ChunkId& chunk, BenefactorId source, BenefactorId target);

  uint64_t gc_begin(BenefactorId id);
  std::vector<ChunkId> gc_exchange(BenefactorId id, uint64_t snapshot,
                                   std::span<const ChunkId> inventory);

  std::vector<PurgedVersion> apply_lifecycle();
  uint32_t delete_dataset(const DatasetName& dataset);
  uint32_t delete_folder(const std::string& application);
  NamespaceListing list_namespace(const std::string& prefix = "") const;
  std::vector<PurgedVersion> set_policy(const std::string& application,
                                        const LifecyclePolicy& policy);

  void set_replication_paused(bool paused) { replication_paused_ = paused; }
  bool replication_paused() const { return replication_paused_; }
  // Copy plans for every under-replicated live version, with the returned
  // assignments marked in flight. nullopt while a reservation request is
  // queued or replication is paused.
  std::optional<std::vector<ShadowChunkMap>> next_replication_batch();

  // Chunks a fully collected benefactor should hold.
  std::vector<ChunkId> live_chunks_on(BenefactorId id) const;
  size_t active_reservations() const;

 private:
  struct Replica {
    BenefactorId id;
    uint64_t seq;  // gc sequence at which the record was made
  };
  struct ChunkEntry {
    uint64_t length = 0;
    uint64_t refs = 0;  // occurrences in live versions
    std::vector<Replica> replicas;
    bool holds(BenefactorId b) const;
  };
  struct VersionRecord {
    std::vector<ChunkRef> chunks;  // replicas are kept in ChunkEntry
    uint64_t total_bytes = 0;
    TimePoint committed_at{};
    uint32_t replication = 1;
  };
  struct Dataset {
    std::map<Version, VersionRecord> versions;
    std::set<Version> purged;
  };
  struct Folder {
    LifecyclePolicy policy;
    bool explicit_policy = false;
    std::map<std::pair<std::string, uint64_t>, Dataset> datasets;  // (node, timestep)
  };
  struct Reservation {
    std::string client_id;
    std::vector<StripeMember> members;
    TimePoint expiry{};
    std::unordered_set<ChunkId, ChunkIdHash> announced;
  };
  struct Inflight {
    BenefactorId source;
    BenefactorId target;
    TimePoint deadline;
  };
  struct Benefactor {
    BenefactorRecord record;
  };

  // Journaled mutations; apply_* is shared by live operation and replay.
  void log(RecordType type, WireWriter& w, bool durable);
  void replay(const JournalRecord& rec);
  void apply_register(BenefactorId id, const std::string& address);
  void apply_policy(const std::string& app, const LifecyclePolicy& policy);
  void apply_commit(const DatasetName& d, Version v, uint32_t r, TimePoint at,
                    const std::vector<ChunkRef>& chunks);
  void apply_add_replica(const ChunkId& c, BenefactorId b);
  void apply_drop_replica(const ChunkId& c, BenefactorId b);
  uint32_t apply_delete_dataset(const DatasetName& d);
  uint32_t apply_delete_folder(const std::string& app);
  void apply_purge(const DatasetName& d, Version v);
  void apply_set_replication(const DatasetName& d, Version v, uint32_t r);

  void add_replica_locked(const ChunkId& c, BenefactorId b);
  void drop_replica_locked(const ChunkId& c, BenefactorId b);
  void release_chunk_refs(const VersionRecord& v);
  void maybe_erase_chunk(const ChunkId& c);
  void collect_expired_locked(TimePoint now);
  void drop_reservation_locked(ReservationId id);
  std::vector<PurgedVersion> lifecycle_locked(TimePoint now);
  void purge_locked(const DatasetName& d, Version v);

  bool online(const BenefactorRecord& b, TimePoint now) const;
  uint64_t allocatable(BenefactorId id) const;
  Folder* find_folder(const std::string& app);
  const Folder* find_folder(const std::string& app) const;
  Dataset* find_dataset(const DatasetName& d);
  const Dataset* find_dataset(const DatasetName& d) const;
  const VersionRecord& version_locked(const DatasetName& d, Version v, Version* resolved) const;
  ReplicationState replication_state(const VersionRecord& v) const;
  ChunkLocation location_locked(const ChunkId& id, const ChunkEntry& e) const;
  bool inflight_to(const ChunkId& c, BenefactorId target) const;
  void expire_inflight_locked(TimePoint now);
  ShadowChunkMap plan_locked(const DatasetName& d, Version v, const VersionRecord& rec,
                             uint32_t r, TimePoint now,
                             std::map<BenefactorId, uint64_t>& planned_bytes);

  ManagerConfig config_;
  Clock clock_;
  std::unique_ptr<Journal> journal_;

  mutable std::shared_mutex mu_;
  std::map<BenefactorId, Benefactor> benefactors_;
  std::unordered_map<std::string, BenefactorId> by_address_;
  BenefactorId next_benefactor_ = 1;

  std::map<ReservationId, Reservation> reservations_;
  ReservationId next_reservation_ = 1;
  // Reservation count per announced chunk.
  std::unordered_map<ChunkId, uint32_t, ChunkIdHash> announced_;

  std::map<std::string, Folder> folders_;
  // Highest version ever assigned per application; survives deletes.
  std::map<std::string, Version> version_counter_;
  std::unordered_map<ChunkId, ChunkEntry, ChunkIdHash> chunks_;

  std::unordered_map<ChunkId, std::vector<Inflight>, ChunkIdHash> inflight_;
  std::map<std::pair<ChunkId, BenefactorId>, TimePoint> failed_targets_;

  // Replica records are stamped with gc_seq_; the epoch tags snapshots so a
  // snapshot taken before a restart is never compared against new stamps.
  uint64_t gc_epoch_ = 0;
  uint64_t gc_seq_ = 1;

  std::atomic<int> queued_reservations_{0};
  std::atomic<bool> replication_paused_{false};
};

}  // namespace ckpool
