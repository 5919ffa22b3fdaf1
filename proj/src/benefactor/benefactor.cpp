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

#include "ckpool/benefactor.hpp"

#include "ckpool/error.hpp"
#include "ckpool/messages.hpp"
#include "ckpool/protocol.hpp"

namespace ckpool {

BenefactorConfig BenefactorConfig::from(const KeyValueConfig& kv) {
  BenefactorConfig c;
  c.manager_address = kv.get_string("manager_address", c.manager_address);
  c.root = kv.get_string("root", c.root.string());
  c.capacity = kv.get_bytes("capacity", c.capacity);
  c.listen = kv.get_string("listen", c.listen);
  c.heartbeat_interval = kv.get_duration("heartbeat_interval", c.heartbeat_interval);
  c.gc_interval = kv.get_duration("gc_interval", c.gc_interval);
  c.workers = kv.get_u64("workers", c.workers);
  c.replication_slots = kv.get_u64("replication_slots", c.replication_slots);
  c.fsync = kv.get_bool("fsync", c.fsync);
  if (c.root.empty()) fail(ErrorCode::kUsage, "benefactor needs a root directory");
  if (c.manager_address.empty()) fail(ErrorCode::kUsage, "benefactor needs a manager address");
  return c;
}

Benefactor::Benefactor(BenefactorConfig config)
    : config_(std::move(config)),
      store_(config_.root, config_.capacity, config_.fsync),
      manager_(config_.manager_address, std::chrono::seconds(10)),
      peers_(std::chrono::seconds(10)),
      queue_(config_.workers, config_.replication_slots),
      server_([this](uint8_t opcode, WireReader& r) { return handle(opcode, r); }) {
  heartbeat_ms_ = config_.heartbeat_interval.count();
}

Benefactor::~Benefactor() { stop(); }

void Benefactor::start() {
  server_.start(config_.listen);
  running_ = true;
  try {
    ensure_registered();
  } catch (const Error&) {
    // The heartbeat loop keeps trying until the manager is up.
  }
  heartbeat_thread_ = std::thread([this] { heartbeat_loop(); });
  if (config_.gc_interval.count() > 0) gc_thread_ = std::thread([this] { gc_loop(); });
}

void Benefactor::stop() {
  if (running_.exchange(false)) {
    loop_cv_.notify_all();
    if (heartbeat_thread_.joinable()) heartbeat_thread_.join();
    if (gc_thread_.joinable()) gc_thread_.join();
  }
  server_.stop();
  queue_.stop();
}

void Benefactor::ensure_registered() {
  std::lock_guard lock(register_mu_);
  if (id_.load() != 0) return;
  const auto reply = manager_.register_benefactor(address(), draining_ ? 0 : store_.free_bytes());
  id_ = reply.id;
  if (reply.heartbeat_interval.count() > 0) heartbeat_ms_ = reply.heartbeat_interval.count();
}

void Benefactor::heartbeat_loop() {
  while (running_.load()) {
    {
      std::unique_lock lock(loop_mu_);
      loop_cv_.wait_for(lock, Millis(heartbeat_ms_.load()), [this] { return !running_.load(); });
    }
    if (!running_.load()) break;
    try {
      if (id_.load() == 0) {
        ensure_registered();
        continue;
      }
      manager_.heartbeat(id_.load(), draining_ ? 0 : store_.free_bytes());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kUnknownBenefactor) {
        id_ = 0;
        try {
          ensure_registered();
        } catch (const Error&) {
        }
      }
    }
  }
}

void Benefactor::gc_loop() {
  while (running_.load()) {
    {
      std::unique_lock lock(loop_mu_);
      loop_cv_.wait_for(lock, config_.gc_interval, [this] { return !running_.load(); });
    }
    if (!running_.load()) break;
    try {
      run_gc_round();
    } catch (const Error&) {
      // Manager unreachable: skip and retry next period.
    }
  }
}

uint32_t Benefactor::run_gc_round() {
  std::lock_guard lock(gc_mu_);
  if (id_.load() == 0) ensure_registered();
  const uint64_t generation = store_.generation();
  uint64_t snapshot = 0;
  try {
    snapshot = manager_.gc_begin(id_.load());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUnknownBenefactor) throw;
    id_ = 0;
    ensure_registered();
    snapshot = manager_.gc_begin(id_.load());
  }
  const auto inventory = store_.inventory();
  const auto doomed = manager_.gc_exchange(id_.load(), snapshot, inventory);
  return store_.remove_untouched(doomed, generation);
}

ReplicaResult Benefactor::push_replica(const DatasetName& dataset, Version version,
                                       const ReplicaAssignment& a) {
  ReplicaResult res;
  res.chunk = a.chunk;
  res.target = a.target;
  try {
    const auto payload = store_.get(a.chunk);
    peers_.put_chunk(a.target_address, a.chunk, payload);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kUnavailable || e.code() == ErrorCode::kTimeout) {
      peers_.forget(a.target_address);
    }
    res.reason = e.code() == ErrorCode::kNotFound ? "source-missing" : e.what();
    return res;
  }
  try {
    manager_.commit_replica(dataset, version, a.chunk, a.target);
    res.ok = true;
  } catch (const Error& e) {
    res.reason = std::string("commit-replica: ") + e.what();
  }
  return res;
}

std::vector<uint8_t> Benefactor::handle(uint8_t opcode, WireReader& r) {
  using Lane = PriorityWorkQueue::Lane;
  WireWriter w;
  switch (opcode) {
    case op::kPing:
      r.expect_end();
      break;
    case op::kPutChunk: {
      const ChunkId id = r.id();
      const auto payload = r.blob();
      r.expect_end();
      if (draining_) fail(ErrorCode::kDraining, "benefactor is draining");
      const bool fresh =
          queue_.run(Lane::kClient, [&] { return store_.put(id, payload); }).get();
      w.boolean(fresh);
      break;
    }
    case op::kGetChunk: {
      const ChunkId id = r.id();
      r.expect_end();
      const auto payload = queue_.run(Lane::kClient, [&] { return store_.get(id); }).get();
      w.blob(payload);
      break;
    }
    case op::kDeleteChunks: {
      const auto ids = wire::get_ids(r);
      r.expect_end();
      w.u32(store_.remove(ids));
      break;
    }
    case op::kInventory: {
      r.expect_end();
      wire::put_ids(w, store_.inventory());
      break;
    }
    case op::kReplicateTo: {
      const ShadowChunkMap plan = wire::get_shadow(r);
      const bool wait = r.boolean();
      r.expect_end();
      std::vector<ReplicaResult> immediate;
      std::vector<std::future<ReplicaResult>> pending;
      for (const auto& a : plan.assignments) {
        if (!store_.contains(a.chunk)) {
          immediate.push_back(ReplicaResult{a.chunk, a.target, false, "source-missing"});
          continue;
        }
        auto fut = queue_.run(Lane::kReplication, [this, plan_ds = plan.dataset,
                                                   v = plan.version, a, wait] {
          auto res = push_replica(plan_ds, v, a);
          if (!res.ok && !wait) {
            try {
              manager_.replica_failed(a.chunk, a.source, a.target, res.reason);
            } catch (const Error&) {
            }
          }
          return res;
        });
        if (wait) pending.push_back(std::move(fut));
      }
      for (auto& f : pending) immediate.push_back(f.get());
      w.list(immediate, [](WireWriter& w, const ReplicaResult& res) {
        w.id(res.chunk).u64(res.target).boolean(res.ok).str(res.reason);
      });
      break;
    }
    case op::kRunGcRound:
      r.expect_end();
      w.u32(run_gc_round());
      break;
    case op::kDrain:
      draining_ = r.boolean();
      r.expect_end();
      break;
    case op::kStoreStats:
      r.expect_end();
      w.u64(id_.load())
          .u64(store_.used_bytes())
          .u64(store_.capacity())
          .u64(store_.chunk_count())
          .u64(store_.quarantined())
          .boolean(draining_.load());
      break;
    case op::kScrub:
      r.expect_end();
      w.u32(store_.scrub());
      break;
    default:
      fail(ErrorCode::kUnknownOpcode, "unknown opcode " + std::to_string(opcode));
  }
  return w.take();
}

}  // namespace ckpool
