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
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "ckpool/manager.hpp"
#include "ckpool/net.hpp"
#include "ckpool/rpc_clients.hpp"

namespace ckpool {

// Serves a Manager over the wire protocol and runs its background work:
// replication dispatch to source benefactors and periodic lifecycle sweeps.
class ManagerServer {
 public:
  explicit ManagerServer(ManagerConfig config, Manager::Clock clock = wall_now);
  ~ManagerServer();
  ManagerServer(const ManagerServer&) = delete;
  ManagerServer& operator=(const ManagerServer&) = delete;

  void start();
  void stop();

  std::string address() const { return server_.address(); }
  uint16_t port() const { return server_.port(); }
  Manager& manager() { return manager_; }

  // Schedules a replication pass without waiting for the next tick.
  void wake();

  std::vector<uint8_t> handle(uint8_t opcode, WireReader& r);

 private:
  void background_loop();
  void dispatch(const ShadowChunkMap& plan);

  Manager manager_;
  RpcServer server_;
  BenefactorClient benefactors_;

  std::mutex wake_mu_;
  std::condition_variable wake_cv_;
  bool wake_pending_ = false;
  std::atomic<bool> running_{false};
  std::thread background_;
};

}  // namespace ckpool
