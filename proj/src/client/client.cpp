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

#include "ckpool/client.hpp"

#include <thread>

#include "ckpool/error.hpp"

namespace fs = std::filesystem;

namespace ckpool {

std::string_view protocol_name(WriteProtocol p) {
  switch (p) {
    case WriteProtocol::kCompleteLocal: return "complete_local";
    case WriteProtocol::kIncremental: return "incremental";
    case WriteProtocol::kSlidingWindow: return "sliding_window";
  }
  return "?";
}

std::optional<WriteProtocol> parse_protocol(std::string_view s) {
  if (s == "complete_local") return WriteProtocol::kCompleteLocal;
  if (s == "incremental") return WriteProtocol::kIncremental;
  if (s == "sliding_window") return WriteProtocol::kSlidingWindow;
  return std::nullopt;
}

std::string_view semantics_name(CommitSemantics s) {
  return s == CommitSemantics::kOptimistic ? "optimistic" : "pessimistic";
}

std::optional<CommitSemantics> parse_semantics(std::string_view s) {
  if (s == "optimistic") return CommitSemantics::kOptimistic;
  if (s == "pessimistic") return CommitSemantics::kPessimistic;
  return std::nullopt;
}

std::string_view dedup_name(DedupMode d) {
  switch (d) {
    case DedupMode::kOff: return "off";
    case DedupMode::kFsch: return "fsch";
    case DedupMode::kCbch: return "cbch";
  }
  return "?";
}

std::optional<DedupMode> parse_dedup(std::string_view s) {
  if (s == "off") return DedupMode::kOff;
  if (s == "fsch") return DedupMode::kFsch;
  if (s == "cbch") return DedupMode::kCbch;
  return std::nullopt;
}

void WritePolicy::validate() const {
  if (stripe_width == 0) fail(ErrorCode::kUsage, "stripe_width must be >= 1");
  if (chunk_size == 0) fail(ErrorCode::kUsage, "chunk_size must be > 0");
  if (replication == 0) fail(ErrorCode::kUsage, "replication must be >= 1");
  if (dedup == DedupMode::kCbch) cbch.validate();
  const uint64_t largest_chunk = dedup == DedupMode::kCbch ? cbch.max_chunk : chunk_size;
  if (protocol == WriteProtocol::kSlidingWindow && buffer_bytes < 2 * largest_chunk) {
    fail(ErrorCode::kUsage, "buffer_bytes must be at least twice the largest chunk");
  }
  if (protocol == WriteProtocol::kIncremental && temp_file_limit == 0) {
    fail(ErrorCode::kUsage, "temp_file_limit must be > 0");
  }
}

ChunkingScheme WritePolicy::scheme() const {
  if (dedup == DedupMode::kCbch) return cbch;
  return FixedScheme{chunk_size};
}

WritePolicy WritePolicy::from(const KeyValueConfig& kv, WritePolicy p) {
  if (auto v = kv.get("protocol")) {
    auto x = parse_protocol(*v);
    if (!x) fail(ErrorCode::kUsage, "bad protocol: " + *v);
    p.protocol = *x;
  }
  if (auto v = kv.get("semantics")) {
    auto x = parse_semantics(*v);
    if (!x) fail(ErrorCode::kUsage, "bad semantics: " + *v);
    p.semantics = *x;
  }
  if (auto v = kv.get("dedup")) {
    auto x = parse_dedup(*v);
    if (!x) fail(ErrorCode::kUsage, "bad dedup mode: " + *v);
    p.dedup = *x;
  }
  p.stripe_width = static_cast<uint32_t>(kv.get_u64("stripe_width", p.stripe_width));
  p.chunk_size = kv.get_bytes("chunk_size", p.chunk_size);
  p.replication = static_cast<uint32_t>(kv.get_u64("replication", p.replication));
  p.buffer_bytes = kv.get_bytes("buffer_bytes", p.buffer_bytes);
  p.temp_file_limit = kv.get_bytes("temp_file_limit", p.temp_file_limit);
  p.cbch.window = static_cast<uint32_t>(kv.get_u64("cbch_window", p.cbch.window));
  p.cbch.boundary_bits = static_cast<uint32_t>(kv.get_u64("cbch_bits", p.cbch.boundary_bits));
  p.cbch.advance = static_cast<uint32_t>(kv.get_u64("cbch_advance", p.cbch.advance));
  p.cbch.min_chunk = kv.get_bytes("cbch_min_chunk", p.cbch.min_chunk);
  p.cbch.max_chunk = kv.get_bytes("cbch_max_chunk", p.cbch.max_chunk);
  p.reservation_hint = kv.get_bytes("reservation_hint", p.reservation_hint);
  p.pessimistic_timeout = kv.get_duration("pessimistic_timeout", p.pessimistic_timeout);
  if (auto v = kv.get("on_timeout")) {
    if (*v == "downgrade") {
      p.downgrade_on_timeout = true;
    } else if (*v == "fail") {
      p.downgrade_on_timeout = false;
    } else {
      fail(ErrorCode::kUsage, "on_timeout must be fail or downgrade");
    }
  }
  p.sync_temp_files = kv.get_bool("sync_temp_files", p.sync_temp_files);
  p.temp_dir = kv.get_string("temp_dir", p.temp_dir.string());
  p.validate();
  return p;
}

ClientOptions ClientOptions::from(const KeyValueConfig& kv) {
  ClientOptions o;
  o.client_id = kv.get_string("client_id", o.client_id);
  o.rpc_timeout = kv.get_duration("rpc_timeout", o.rpc_timeout);
  o.readahead = kv.get_u64("readahead", o.readahead);
  o.poll_interval = kv.get_duration("poll_interval", o.poll_interval);
  return o;
}

Client::Client(std::string manager_address, ClientOptions options)
    : options_(std::move(options)),
      manager_(std::move(manager_address), options_.rpc_timeout),
      benefactors_(options_.rpc_timeout) {}

Client::~Client() = default;

bool Client::await_replication(const DatasetName& dataset, Version version, Millis timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto map = manager_.get_chunk_map(dataset, version);
    if (map.replication_state == ReplicationState::kSatisfied) return true;
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(options_.poll_interval);
  }
}

DatasetName Client::restart_fetch(const std::string& target, const fs::path& out) {
  DatasetName chosen;
  std::optional<DatasetName> exact = DatasetName::parse(target);
  std::string app, node;
  if (exact) {
    app = exact->application;
    node = exact->node;
  } else {
    const size_t dot = target.find('.');
    if (dot == std::string::npos) fail(ErrorCode::kUsage, "target must be A.N or A.N.T");
    app = target.substr(0, dot);
    node = target.substr(dot + 1);
    if (!valid_name_component(app) || !valid_name_component(node)) {
      fail(ErrorCode::kUsage, "target must be A.N or A.N.T");
    }
  }

  bool have = false;
  if (exact) {
    try {
      manager_.get_chunk_map(*exact);
      chosen = *exact;
      have = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kPurged) throw;
    }
  }
  if (!have) {
    const auto listing = manager_.list_namespace(app + "." + node + ".");
    for (const auto& f : listing.folders) {
      if (f.application != app) continue;
      for (const auto& d : f.datasets) {
        if (d.name.node != node || d.versions.empty()) continue;
        if (!have || d.name.timestep > chosen.timestep) {
          chosen = d.name;
          have = true;
        }
      }
    }
    if (!have) fail(ErrorCode::kNotFound, "no surviving image for " + target);
  }

  auto reader = open_read(chosen);
  const fs::path tmp = out.string() + ".part";
  {
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) fail(ErrorCode::kIo, "cannot create " + tmp.string());
    std::vector<uint8_t> buf(4 * kMiB);
    try {
      for (;;) {
        const size_t n = reader->read(buf);
        if (n == 0) break;
        if (std::fwrite(buf.data(), 1, n, f) != n) fail(ErrorCode::kIo, "write " + tmp.string());
      }
    } catch (...) {
      std::fclose(f);
      fs::remove(tmp);
      throw;
    }
    if (std::fclose(f) != 0) fail(ErrorCode::kIo, "close " + tmp.string());
  }
  fs::rename(tmp, out);
  return chosen;
}

}  // namespace ckpool
