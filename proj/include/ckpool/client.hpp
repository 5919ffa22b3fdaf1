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
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ckpool/chunking.hpp"
#include "ckpool/config.hpp"
#include "ckpool/rpc_clients.hpp"
#include "ckpool/types.hpp"

namespace ckpool {

enum class WriteProtocol : uint8_t { kCompleteLocal, kIncremental, kSlidingWindow };
enum class CommitSemantics : uint8_t { kOptimistic, kPessimistic };
enum class DedupMode : uint8_t { kOff, kFsch, kCbch };

std::string_view protocol_name(WriteProtocol p);
std::optional<WriteProtocol> parse_protocol(std::string_view s);
std::string_view semantics_name(CommitSemantics s);
std::optional<CommitSemantics> parse_semantics(std::string_view s);
std::string_view dedup_name(DedupMode d);
std::optional<DedupMode> parse_dedup(std::string_view s);

struct WritePolicy {
  WriteProtocol protocol = WriteProtocol::kSlidingWindow;
  CommitSemantics semantics = CommitSemantics::kOptimistic;
  uint32_t stripe_width = 4;
  uint64_t chunk_size = kDefaultChunkSize;
  uint32_t replication = 1;
  uint64_t buffer_bytes = 64 * kMiB;     // sliding_window
  uint64_t temp_file_limit = 16 * kMiB;  // incremental
  DedupMode dedup = DedupMode::kOff;
  CbchParams cbch{};
  // Initial reservation; grown by the same amount whenever it is used up.
  uint64_t reservation_hint = 64 * kMiB;
  Millis pessimistic_timeout{60000};
  // What a pessimistic close does when the timeout passes: fail, or return
  // as if the session were optimistic.
  bool downgrade_on_timeout = false;
  // Flush local temp files to disk before they are uploaded.
  bool sync_temp_files = true;
  std::filesystem::path temp_dir = std::filesystem::temp_directory_path();

  // Throws Error(kUsage) when an invariant does not hold.
  void validate() const;
  ChunkingScheme scheme() const;

  static WritePolicy from(const KeyValueConfig& kv, WritePolicy base);
  static WritePolicy from(const KeyValueConfig& kv) { return from(kv, WritePolicy()); }
};

struct TransferMetrics {
  uint64_t bytes_logical = 0;
  uint64_t bytes_uploaded = 0;
  uint64_t chunks = 0;
  uint64_t chunks_uploaded = 0;
  uint64_t temp_bytes = 0;  // bytes written to local temp files
  double open_to_close_s = 0;
  double open_to_stored_s = 0;  // 0 until the session is fully stored
  double oab = 0;               // bytes per second
  double asb = 0;               // 0 until the session is fully stored
  bool fully_stored = false;
};

enum class SessionState : uint8_t { kOpen, kClosing, kCommitted, kFailed };

struct CommitResult {
  Version version = 0;
  ReplicationState replication_state = ReplicationState::kPending;
  bool downgraded = false;
  TransferMetrics metrics;
};

struct ClientOptions {
  std::string client_id = "client";
  Millis rpc_timeout{30000};
  size_t readahead = 2;
  Millis poll_interval{10};

  static ClientOptions from(const KeyValueConfig& kv);
};

class Client;

// One checkpoint image being written. Not thread-safe: a session has a single
// producer.
class WriteSession {
 public:
  ~WriteSession();
  WriteSession(const WriteSession&) = delete;
  WriteSession& operator=(const WriteSession&) = delete;

  // Blocks only for back-pressure. Throws kUsage when the session is not
  // open and kSessionFailed once uploads can no longer succeed.
  size_t write(std::span<const uint8_t> data);
  // Flushes, uploads and commits; see WritePolicy for the pessimistic case.
  CommitResult close_commit();
  // Waits until the committed version meets its replication target and
  // records the time. Returns false on timeout.
  bool await_fully_stored(Millis timeout);
  // Drops the session without committing.
  void abort();

  SessionState state() const;
  const DatasetName& dataset() const;
  const WritePolicy& policy() const;
  uint64_t bytes_accepted() const;
  TransferMetrics metrics() const;
  std::vector<StripeMember> stripe() const;
  // Chunks uploaded to each benefactor by this session.
  std::map<BenefactorId, uint64_t> chunks_per_member() const;

  struct Impl;

 private:
  friend class Client;
  explicit WriteSession(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

class ReadHandle {
 public:
  ~ReadHandle();
  ReadHandle(const ReadHandle&) = delete;
  ReadHandle& operator=(const ReadHandle&) = delete;

  // Returns 0 at end of stream. Throws kUnavailable naming the chunk when no
  // replica can serve it.
  size_t read(std::span<uint8_t> out);
  std::vector<uint8_t> read(size_t count);
  std::vector<uint8_t> read_all();

  uint64_t size() const;
  uint64_t position() const;
  const ChunkMap& map() const;

  struct Impl;

 private:
  friend class Client;
  explicit ReadHandle(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

class Client {
 public:
  explicit Client(std::string manager_address, ClientOptions options = {});
  ~Client();

  std::unique_ptr<WriteSession> open_write(const DatasetName& dataset, const WritePolicy& policy);
  // version 0 reads the latest.
  std::unique_ptr<ReadHandle> open_read(const DatasetName& dataset, Version version = 0);

  // Materialises the newest committed image named by `target` ("A.N" or
  // "A.N.T") at `out`. A purged A.N.T falls back to the newest surviving
  // timestep of A.N. Returns the dataset that was fetched.
  DatasetName restart_fetch(const std::string& target, const std::filesystem::path& out);

  // Polls until the version's replication target is met.
  bool await_replication(const DatasetName& dataset, Version version, Millis timeout);

  ManagerClient& manager() { return manager_; }
  BenefactorClient& benefactors() { return benefactors_; }
  const ClientOptions& options() const { return options_; }

 private:
  ClientOptions options_;
  ManagerClient manager_;
  BenefactorClient benefactors_;
};

}  // namespace ckpool
