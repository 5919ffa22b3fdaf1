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

#include <sys/types.h>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ckpool/client.hpp"
#include "ckpool/config.hpp"
#include "ckpool/types.hpp"

namespace ckpool::harness {

struct ClusterOptions {
  uint32_t benefactors = 4;
  // Where ckpool-manager and ckpool-benefactor live; empty means the
  // directory of the running executable.
  std::filesystem::path bin_dir;
  // Empty means a fresh directory under the system temp dir, removed on
  // teardown unless keep_work_dir is set.
  std::filesystem::path work_dir;
  bool keep_work_dir = false;
  uint64_t capacity = 8ULL << 30;
  Millis heartbeat_interval{500};
  Millis liveness_timeout{0};
  // Benefactor collection loop; zero leaves GC to explicit rounds.
  Millis gc_interval{0};
  Millis start_timeout{20000};
  // Extra key=value settings handed to every daemon of that kind.
  KeyValueConfig manager_settings;
  KeyValueConfig benefactor_settings;

  // Keys: benefactors, capacity, heartbeat_interval, liveness_timeout,
  // gc_interval, work_dir, keep_work_dir; `manager.X` and `benefactor.X`
  // are forwarded to the daemons.
  static ClusterOptions from(const KeyValueConfig& kv);
};

enum class FaultAction { kKill, kRestart, kCorruptChunk };

// Target index for a fault aimed at the manager.
inline constexpr size_t kManagerTarget = static_cast<size_t>(-1);

// One manager and N benefactor daemons on loopback, each a child process
// with its own port and storage root.
class LocalCluster {
 public:
  // Throws kUnavailable when a daemon does not come up in time.
  static std::unique_ptr<LocalCluster> up(ClusterOptions options);
  ~LocalCluster();
  LocalCluster(const LocalCluster&) = delete;
  LocalCluster& operator=(const LocalCluster&) = delete;

  const ClusterOptions& options() const { return options_; }
  const std::filesystem::path& work_dir() const { return work_dir_; }
  const std::string& manager_address() const { return manager_.address; }
  size_t size() const { return benefactors_.size(); }
  const std::string& benefactor_address(size_t i) const { return benefactors_.at(i).address; }
  BenefactorId benefactor_id(size_t i) const { return benefactors_.at(i).id; }
  std::optional<size_t> index_of(BenefactorId id) const;
  std::filesystem::path benefactor_root(size_t i) const;
  bool running(size_t i) const { return benefactors_.at(i).pid > 0; }
  bool manager_running() const { return manager_.pid > 0; }

  // Adds one more benefactor and waits until it is registered.
  size_t add_benefactor();

  void kill_benefactor(size_t i);
  void restart_benefactor(size_t i);
  void kill_manager();
  void restart_manager();
  // Flips one byte of the stored chunk file; returns false when benefactor i
  // does not hold the chunk.
  bool corrupt_chunk(size_t i, const ChunkId& id);
  // Benefactors holding a copy of `id` on disk.
  std::vector<size_t> holders_of(const ChunkId& id) const;

  // kManagerTarget addresses the manager. Returns a one-line acknowledgement.
  std::string fault_inject(FaultAction action, size_t target,
                           std::optional<ChunkId> chunk = std::nullopt);

  // Blocks until the registry reports `count` online benefactors.
  void wait_online(size_t count, Millis timeout);
  // Blocks until the registry reports benefactor i offline.
  void wait_offline(size_t i, Millis timeout);

  // Bytes of chunk files on disk across running and stopped benefactors.
  uint64_t disk_chunk_bytes() const;
  std::vector<ChunkId> disk_chunks(size_t i) const;

  // One GC round on every running benefactor; returns chunks deleted.
  uint32_t gc_all();

  std::unique_ptr<Client> client(ClientOptions options = {}) const;
  ManagerClient& manager() { return *manager_client_; }
  BenefactorClient& benefactors() { return *benefactor_client_; }

 private:
  struct Daemon {
    pid_t pid = -1;
    std::string address;
    BenefactorId id = 0;
  };

  explicit LocalCluster(ClusterOptions options);
  void start_manager(const std::string& listen);
  void start_benefactor(size_t i, const std::string& listen);
  std::string spawn(const std::string& program, std::vector<std::string> args,
                    const std::filesystem::path& port_file, const std::string& log_name,
                    pid_t* pid);
  void stop_daemon(Daemon& d, int signal);
  void resolve_ids();

  ClusterOptions options_;
  std::filesystem::path work_dir_;
  bool owns_work_dir_ = false;
  Daemon manager_;
  std::vector<Daemon> benefactors_;
  std::unique_ptr<ManagerClient> manager_client_;
  std::unique_ptr<BenefactorClient> benefactor_client_;
};

}  // namespace ckpool::harness
