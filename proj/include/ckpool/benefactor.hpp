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
#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "ckpool/chunk_store.hpp"
#include "ckpool/config.hpp"
#include "ckpool/net.hpp"
#include "ckpool/rpc_clients.hpp"
#include "ckpool/work_queue.hpp"

namespace ckpool {

struct BenefactorConfig {
  std::string manager_address;
  std::filesystem::path root;
  uint64_t capacity = 16ULL << 30;
  std::string listen = "127.0.0.1:0";
  Millis heartbeat_interval{5000};
  // Zero disables the periodic collection loop (rounds can still be run on
  // demand).
  Millis gc_interval{30000};
  size_t workers = 4;
  size_t replication_slots = 2;
  bool fsync = false;

  static BenefactorConfig from(const KeyValueConfig& kv);
};

// Storage donor daemon: serves chunk requests, pushes replicas, heartbeats
// to the manager and applies garbage-collection rounds.
class Benefactor {
 public:
  explicit Benefactor(BenefactorConfig config);
  ~Benefactor();
  Benefactor(const Benefactor&) = delete;
  Benefactor& operator=(const Benefactor&) = delete;

  void start();
  void stop();

  std::string address() const { return server_.address(); }
  BenefactorId id() const { return id_.load(); }
  ChunkStore& store() { return store_; }

  // One inventory exchange; returns the number of chunks deleted. Throws
  // kUnavailable when the manager cannot be reached.
  uint32_t run_gc_round();
  bool draining() const { return draining_.load(); }

  std::vector<uint8_t> handle(uint8_t opcode, WireReader& r);

 private:
  void heartbeat_loop();
  void gc_loop();
  void ensure_registered();
  ReplicaResult push_replica(const DatasetName& dataset, Version version,
                             const ReplicaAssignment& a);

  BenefactorConfig config_;
  ChunkStore store_;
  ManagerClient manager_;
  BenefactorClient peers_;
  PriorityWorkQueue queue_;
  RpcServer server_;

  std::atomic<BenefactorId> id_{0};
  std::atomic<bool> draining_{false};
  std::atomic<bool> running_{false};
  std::atomic<int64_t> heartbeat_ms_{0};
  std::mutex register_mu_;
  std::mutex gc_mu_;

  std::mutex loop_mu_;
  std::condition_variable loop_cv_;
  std::thread heartbeat_thread_;
  std::thread gc_thread_;
};

}  // namespace ckpool
