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

#include "ckpool/manager_server.hpp"

#include <map>

#include "ckpool/error.hpp"
#include "ckpool/messages.hpp"
#include "ckpool/protocol.hpp"

namespace ckpool {

namespace {

std::vector<uint8_t> write_purged(const std::vector<PurgedVersion>& purged) {
  WireWriter w;
  w.list(purged, [](WireWriter& w, const PurgedVersion& p) { wire::put(w, p); });
  return w.take();
}

std::vector<uint8_t> write_locations(const std::vector<ChunkLocation>& locs) {
  WireWriter w;
  w.list(locs, [](WireWriter& w, const ChunkLocation& l) { wire::put(w, l); });
  return w.take();
}

}  // namespace

ManagerServer::ManagerServer(ManagerConfig config, Manager::Clock clock)
    : manager_(std::move(config), std::move(clock)),
      server_([this](uint8_t opcode, WireReader& r) { return handle(opcode, r); }),
      benefactors_(std::chrono::seconds(10)) {}

ManagerServer::~ManagerServer() { stop(); }

void ManagerServer::start() {
  server_.start(manager_.config().listen);
  running_ = true;
  background_ = std::thread([this] { background_loop(); });
}

void ManagerServer::stop() {
  if (running_.exchange(false)) {
    wake();
    if (background_.joinable()) background_.join();
  }
  server_.stop();
}

void ManagerServer::wake() {
  {
    std::lock_guard lock(wake_mu_);
    wake_pending_ = true;
  }
  wake_cv_.notify_one();
}

void ManagerServer::background_loop() {
  const auto& cfg = manager_.config();
  auto next_sweep = std::chrono::steady_clock::now() + cfg.lifecycle_interval;
  while (running_.load()) {
    {
      std::unique_lock lock(wake_mu_);
      wake_cv_.wait_for(lock, cfg.replication_interval,
                        [this] { return wake_pending_ || !running_.load(); });
      wake_pending_ = false;
    }
    if (!running_.load()) break;
    try {
      if (std::chrono::steady_clock::now() >= next_sweep) {
        manager_.apply_lifecycle();
        next_sweep = std::chrono::steady_clock::now() + cfg.lifecycle_interval;
      }
      auto batch = manager_.next_replication_batch();
      if (!batch) continue;
      for (const auto& plan : *batch) dispatch(plan);
    } catch (const std::exception&) {
      // Best effort; the next tick retries.
    }
  }
}

void ManagerServer::dispatch(const ShadowChunkMap& plan) {
  std::map<BenefactorId, ShadowChunkMap> by_source;
  std::map<BenefactorId, std::string> source_address;
  for (const auto& a : plan.assignments) {
    auto& sub = by_source[a.source];
    sub.dataset = plan.dataset;
    sub.version = plan.version;
    sub.assignments.push_back(a);
    source_address[a.source] = a.source_address;
  }
  for (const auto& [source, sub] : by_source) {
    try {
      for (const auto& res : benefactors_.replicate_to(source_address[source], sub, false)) {
        if (!res.ok) manager_.replica_failed(res.chunk, source, res.target);
      }
    } catch (const Error&) {
      benefactors_.forget(source_address[source]);
      for (const auto& a : sub.assignments) manager_.replica_failed(a.chunk, a.source, a.target);
    }
  }
}

std::vector<uint8_t> ManagerServer::handle(uint8_t opcode, WireReader& r) {
  WireWriter w;
  switch (opcode) {
    case op::kPing:
      r.expect_end();
      break;
    case op::kRegisterBenefactor: {
      const std::string address = r.str();
      const uint64_t free = r.u64();
      r.expect_end();
      const auto reply = manager_.register_benefactor(address, free);
      w.u64(reply.id).u64(static_cast<uint64_t>(reply.heartbeat_interval.count()));
      wake();
      break;
    }
    case op::kHeartbeat: {
      const BenefactorId id = r.u64();
      const uint64_t free = r.u64();
      r.expect_end();
      manager_.heartbeat(id, free);
      break;
    }
    case op::kReserveSpace: {
      auto ticket = manager_.queue_reservation_request();
      const std::string client = r.str();
      const uint64_t hint = r.u64();
      const uint32_t width = r.u32();
      const auto exclude = r.list<BenefactorId>([](WireReader& r) { return r.u64(); }, 8);
      r.expect_end();
      wire::put(w, manager_.reserve_space(client, hint, width, exclude));
      break;
    }
    case op::kExtendReservation: {
      const ReservationId id = r.u64();
      const uint64_t bytes = r.u64();
      r.expect_end();
      wire::put(w, manager_.extend_reservation(id, bytes));
      break;
    }
    case op::kReleaseReservation: {
      const ReservationId id = r.u64();
      r.expect_end();
      manager_.release_reservation(id);
      break;
    }
    case op::kAnnounceChunks: {
      const ReservationId id = r.u64();
      const auto chunks = r.list<ChunkAnnouncement>(wire::get_announcement, 40);
      r.expect_end();
      return write_locations(manager_.announce_chunks(id, chunks));
    }
    case op::kLookupChunks: {
      const auto ids = wire::get_ids(r);
      r.expect_end();
      return write_locations(manager_.lookup_chunks(ids));
    }
    case op::kCommitChunkMap: {
      const DatasetName d = wire::get_dataset(r);
      const ReservationId rid = r.u64();
      const uint32_t repl = r.u32();
      const auto chunks = r.list<ChunkRef>(wire::get_chunk_ref, 44);
      r.expect_end();
      const auto reply = manager_.commit_chunk_map(d, chunks, rid, repl);
      w.u64(reply.version).u8(static_cast<uint8_t>(reply.replication_state));
      if (reply.replication_state == ReplicationState::kPending) wake();
      break;
    }
    case op::kGetChunkMap: {
      const DatasetName d = wire::get_dataset(r);
      const Version v = r.u64();
      r.expect_end();
      wire::put(w, manager_.get_chunk_map(d, v));
      break;
    }
    case op::kPlanReplication: {
      const DatasetName d = wire::get_dataset(r);
      const Version v = r.u64();
      const uint32_t repl = r.u32();
      r.expect_end();
      wire::put(w, manager_.plan_replication(d, v, repl));
      break;
    }
    case op::kCommitReplica: {
      const DatasetName d = wire::get_dataset(r);
      const Version v = r.u64();
      const ChunkId c = r.id();
      const BenefactorId b = r.u64();
      r.expect_end();
      manager_.commit_replica(d, v, c, b);
      break;
    }
    case op::kReplicaFailed: {
      const ChunkId c = r.id();
      const BenefactorId source = r.u64();
      const BenefactorId target = r.u64();
      r.str();
      r.expect_end();
      manager_.replica_failed(c, source, target);
      wake();
      break;
    }
    case op::kGcBegin: {
      const BenefactorId id = r.u64();
      r.expect_end();
      w.u64(manager_.gc_begin(id));
      break;
    }
    case op::kGcExchange: {
      const BenefactorId id = r.u64();
      const uint64_t snapshot = r.u64();
      const auto inventory = wire::get_ids(r);
      r.expect_end();
      wire::put_ids(w, manager_.gc_exchange(id, snapshot, inventory));
      wake();
      break;
    }
    case op::kApplyLifecycle:
      r.expect_end();
      return write_purged(manager_.apply_lifecycle());
    case op::kDeleteDataset: {
      const uint8_t kind = r.u8();
      const std::string name = r.str();
      r.expect_end();
      if (kind == 0) {
        w.u32(manager_.delete_dataset(DatasetName::must_parse(name)));
      } else {
        w.u32(manager_.delete_folder(name));
      }
      break;
    }
    case op::kListNamespace: {
      const std::string prefix = r.str();
      r.expect_end();
      wire::put(w, manager_.list_namespace(prefix));
      break;
    }
    case op::kSetPolicy: {
      const std::string app = r.str();
      const LifecyclePolicy policy = wire::get_policy(r);
      r.expect_end();
      return write_purged(manager_.set_policy(app, policy));
    }
    case op::kListBenefactors: {
      r.expect_end();
      const auto list = manager_.list_benefactors();
      w.list(list, [](WireWriter& w, const BenefactorRecord& b) { wire::put(w, b); });
      break;
    }
    case op::kSetReplicationPaused: {
      const bool paused = r.boolean();
      r.expect_end();
      manager_.set_replication_paused(paused);
      wake();
      break;
    }
    default:
      fail(ErrorCode::kUnknownOpcode, "unknown opcode " + std::to_string(opcode));
  }
  return w.take();
}

}  // namespace ckpool
