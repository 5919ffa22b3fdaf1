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

#include "ckpool/rpc_clients.hpp"

#include "ckpool/messages.hpp"
#include "ckpool/protocol.hpp"

namespace ckpool {

namespace {

std::vector<PurgedVersion> read_purged(WireReader& r) {
  return r.list<PurgedVersion>(wire::get_purged, 10);
}

}  // namespace

ManagerClient::ManagerClient(std::string address, std::chrono::milliseconds timeout)
    : address_(std::move(address)), pool_(timeout) {}

std::vector<uint8_t> ManagerClient::call(uint8_t opcode, WireWriter& w) {
  return pool_.call(address_, opcode, w.bytes());
}

void ManagerClient::ping() {
  WireWriter w;
  call(op::kPing, w);
}

RegisterReply ManagerClient::register_benefactor(const std::string& address,
                                                 uint64_t free_space) {
  WireWriter w;
  w.str(address).u64(free_space);
  const auto reply = call(op::kRegisterBenefactor, w);
  WireReader r(reply);
  RegisterReply out;
  out.id = r.u64();
  out.heartbeat_interval = Millis(static_cast<int64_t>(r.u64()));
  return out;
}

void ManagerClient::heartbeat(BenefactorId id, uint64_t free_space) {
  WireWriter w;
  w.u64(id).u64(free_space);
  call(op::kHeartbeat, w);
}

ReservationGrant ManagerClient::reserve_space(const std::string& client_id,
                                              uint64_t bytes_hint, uint32_t stripe_width,
                                              std::span<const BenefactorId> exclude) {
  WireWriter w;
  w.str(client_id).u64(bytes_hint).u32(stripe_width);
  w.list(exclude, [](WireWriter& w, BenefactorId b) { w.u64(b); });
  const auto reply = call(op::kReserveSpace, w);
  WireReader r(reply);
  return wire::get_grant(r);
}

ReservationGrant ManagerClient::extend_reservation(ReservationId id, uint64_t additional_bytes) {
  WireWriter w;
  w.u64(id).u64(additional_bytes);
  const auto reply = call(op::kExtendReservation, w);
  WireReader r(reply);
  return wire::get_grant(r);
}

void ManagerClient::release_reservation(ReservationId id) {
  WireWriter w;
  w.u64(id);
  call(op::kReleaseReservation, w);
}

std::vector<ChunkLocation> ManagerClient::announce_chunks(
    ReservationId id, std::span<const ChunkAnnouncement> chunks) {
  WireWriter w;
  w.u64(id);
  w.list(chunks, [](WireWriter& w, const ChunkAnnouncement& a) { wire::put(w, a); });
  const auto reply = call(op::kAnnounceChunks, w);
  WireReader r(reply);
  return r.list<ChunkLocation>(wire::get_location, 44);
}

std::vector<ChunkLocation> ManagerClient::lookup_chunks(std::span<const ChunkId> ids) {
  WireWriter w;
  wire::put_ids(w, ids);
  const auto reply = call(op::kLookupChunks, w);
  WireReader r(reply);
  return r.list<ChunkLocation>(wire::get_location, 44);
}

CommitReply ManagerClient::commit_chunk_map(const DatasetName& dataset,
                                            std::span<const ChunkRef> chunks,
                                            ReservationId reservation, uint32_t replication) {
  WireWriter w;
  wire::put(w, dataset);
  w.u64(reservation).u32(replication);
  w.list(chunks, [](WireWriter& w, const ChunkRef& c) { wire::put(w, c); });
  const auto reply = call(op::kCommitChunkMap, w);
  WireReader r(reply);
  CommitReply out;
  out.version = r.u64();
  out.replication_state =
      r.u8() ? ReplicationState::kSatisfied : ReplicationState::kPending;
  return out;
}

ChunkMap ManagerClient::get_chunk_map(const DatasetName& dataset, Version version) {
  WireWriter w;
  wire::put(w, dataset);
  w.u64(version);
  const auto reply = call(op::kGetChunkMap, w);
  WireReader r(reply);
  return wire::get_chunk_map(r);
}

ShadowChunkMap ManagerClient::plan_replication(const DatasetName& dataset, Version version,
                                               uint32_t replication) {
  WireWriter w;
  wire::put(w, dataset);
  w.u64(version).u32(replication);
  const auto reply = call(op::kPlanReplication, w);
  WireReader r(reply);
  return wire::get_shadow(r);
}

void ManagerClient::commit_replica(const DatasetName& dataset, Version version,
                                   const ChunkId& chunk, BenefactorId benefactor) {
  WireWriter w;
  wire::put(w, dataset);
  w.u64(version).id(chunk).u64(benefactor);
  call(op::kCommitReplica, w);
}

void ManagerClient::replica_failed(const ChunkId& chunk, BenefactorId source,
                                   BenefactorId target, const std::string& reason) {
  WireWriter w;
  w.id(chunk).u64(source).u64(target).str(reason);
  call(op::kReplicaFailed, w);
}

uint64_t ManagerClient::gc_begin(BenefactorId id) {
  WireWriter w;
  w.u64(id);
  const auto reply = call(op::kGcBegin, w);
  WireReader r(reply);
  return r.u64();
}

std::vector<ChunkId> ManagerClient::gc_exchange(BenefactorId id, uint64_t snapshot,
                                                std::span<const ChunkId> inventory) {
  WireWriter w;
  w.u64(id).u64(snapshot);
  wire::put_ids(w, inventory);
  const auto reply = call(op::kGcExchange, w);
  WireReader r(reply);
  return wire::get_ids(r);
}

std::vector<PurgedVersion> ManagerClient::apply_lifecycle() {
  WireWriter w;
  const auto reply = call(op::kApplyLifecycle, w);
  WireReader r(reply);
  return read_purged(r);
}

uint32_t ManagerClient::delete_dataset(const DatasetName& dataset) {
  WireWriter w;
  w.u8(0).str(dataset.str());
  const auto reply = call(op::kDeleteDataset, w);
  WireReader r(reply);
  return r.u32();
}

uint32_t ManagerClient::delete_folder(const std::string& application) {
  WireWriter w;
  w.u8(1).str(application);
  const auto reply = call(op::kDeleteDataset, w);
  WireReader r(reply);
  return r.u32();
}

NamespaceListing ManagerClient::list_namespace(const std::string& prefix) {
  WireWriter w;
  w.str(prefix);
  const auto reply = call(op::kListNamespace, w);
  WireReader r(reply);
  return wire::get_listing(r);
}

std::vector<PurgedVersion> ManagerClient::set_policy(const std::string& application,
                                                     const LifecyclePolicy& policy) {
  WireWriter w;
  w.str(application);
  wire::put(w, policy);
  const auto reply = call(op::kSetPolicy, w);
  WireReader r(reply);
  return read_purged(r);
}

std::vector<BenefactorRecord> ManagerClient::list_benefactors() {
  WireWriter w;
  const auto reply = call(op::kListBenefactors, w);
  WireReader r(reply);
  return r.list<BenefactorRecord>(wire::get_benefactor, 27);
}

void ManagerClient::set_replication_paused(bool paused) {
  WireWriter w;
  w.boolean(paused);
  call(op::kSetReplicationPaused, w);
}

BenefactorClient::BenefactorClient(std::chrono::milliseconds timeout) : pool_(timeout) {}

bool BenefactorClient::put_chunk(const std::string& address, const ChunkId& id,
                                 std::span<const uint8_t> payload) {
  WireWriter w;
  w.id(id).blob(payload);
  const auto reply = pool_.call(address, op::kPutChunk, w.bytes());
  WireReader r(reply);
  return r.boolean();
}

std::vector<uint8_t> BenefactorClient::get_chunk(const std::string& address, const ChunkId& id) {
  WireWriter w;
  w.id(id);
  const auto reply = pool_.call(address, op::kGetChunk, w.bytes());
  WireReader r(reply);
  return r.blob_copy();
}

uint32_t BenefactorClient::delete_chunks(const std::string& address,
                                         std::span<const ChunkId> ids) {
  WireWriter w;
  wire::put_ids(w, ids);
  const auto reply = pool_.call(address, op::kDeleteChunks, w.bytes());
  WireReader r(reply);
  return r.u32();
}

std::vector<ChunkId> BenefactorClient::inventory(const std::string& address) {
  const auto reply = pool_.call(address, op::kInventory, {});
  WireReader r(reply);
  return wire::get_ids(r);
}

std::vector<ReplicaResult> BenefactorClient::replicate_to(const std::string& address,
                                                          const ShadowChunkMap& plan,
                                                          bool wait) {
  WireWriter w;
  wire::put(w, plan);
  w.boolean(wait);
  const auto reply = pool_.call(address, op::kReplicateTo, w.bytes());
  WireReader r(reply);
  return r.list<ReplicaResult>(
      [](WireReader& r) {
        ReplicaResult res;
        res.chunk = r.id();
        res.target = r.u64();
        res.ok = r.boolean();
        res.reason = r.str();
        return res;
      },
      43);
}

uint32_t BenefactorClient::run_gc_round(const std::string& address) {
  const auto reply = pool_.call(address, op::kRunGcRound, {});
  WireReader r(reply);
  return r.u32();
}

void BenefactorClient::drain(const std::string& address, bool on) {
  WireWriter w;
  w.boolean(on);
  pool_.call(address, op::kDrain, w.bytes());
}

StoreStats BenefactorClient::store_stats(const std::string& address) {
  const auto reply = pool_.call(address, op::kStoreStats, {});
  WireReader r(reply);
  StoreStats s;
  s.id = r.u64();
  s.used_bytes = r.u64();
  s.capacity = r.u64();
  s.chunk_count = r.u64();
  s.quarantined = r.u64();
  s.draining = r.boolean();
  return s;
}

uint32_t BenefactorClient::scrub(const std::string& address) {
  const auto reply = pool_.call(address, op::kScrub, {});
  WireReader r(reply);
  return r.u32();
}

}  // namespace ckpool
