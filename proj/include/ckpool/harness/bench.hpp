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
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ckpool/client.hpp"
#include "ckpool/harness/workload.hpp"

namespace ckpool::harness {

struct SessionRecord {
  WriteProtocol protocol = WriteProtocol::kSlidingWindow;
  CommitSemantics semantics = CommitSemantics::kOptimistic;
  uint32_t stripe = 1;
  uint64_t buffer = 0;
  DedupMode dedup = DedupMode::kOff;
  uint32_t replication = 1;
  uint32_t client = 0;
  uint32_t run = 0;
  uint64_t bytes_logical = 0;
  uint64_t bytes_uploaded = 0;
  double oab = 0.0;
  double asb = 0.0;
  // Seconds since the bench started.
  double started_s = 0.0;
  double finished_s = 0.0;
  // "ok" or the error category.
  std::string outcome = "ok";

  bool ok() const { return outcome == "ok"; }
};

struct Summary {
  size_t count = 0;
  double median = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
};

Summary summarize(std::vector<double> values);

struct BenchReport {
  std::vector<SessionRecord> sessions;
  // Sessions where OAB < ASB; always zero for a correct client.
  size_t oab_violations = 0;
  double wall_s = 0.0;

  static const char* csv_header();
  void write_csv(std::ostream& out) const;
  void print_table(std::ostream& out) const;

  size_t failures() const;
  uint64_t bytes_logical() const;
  uint64_t bytes_uploaded() const;
  // Logical bytes committed per second of wall time.
  double aggregate_throughput() const;

  // Records matching one sweep point.
  std::vector<const SessionRecord*> select(WriteProtocol p, uint32_t stripe, uint64_t buffer,
                                           DedupMode dedup) const;
};

struct SweepSpec {
  std::vector<WriteProtocol> protocols = {WriteProtocol::kSlidingWindow};
  std::vector<uint32_t> stripes = {4};
  std::vector<uint64_t> buffers = {64 << 20};
  std::vector<DedupMode> dedups = {DedupMode::kOff};
  uint32_t runs = 20;
  WorkloadSpec workload;
  WritePolicy base;
  std::string application = "bench";
  // Runs each sweep point to completion one after another (true), or
  // interleaves runs across points so slow drift hits all equally.
  bool interleave = true;
};

// Writes workload.versions images per run for every sweep point. Images are
// generated once and reused, so identical seeds give identical bytes.
BenchReport bench_write(const std::string& manager_address, const SweepSpec& spec,
                        const ClientOptions& options = {});

struct StressSpec {
  uint32_t clients = 7;
  uint32_t files = 10;
  uint64_t file_size = 16 << 20;
  Millis stagger{1000};
  WritePolicy policy;
  uint64_t seed = 1;
  std::string application = "stress";
  // Called once after this many commits in total (0 disables).
  uint32_t hook_after_commits = 0;
  std::function<void()> hook;
};

struct StressReport {
  BenchReport report;
  uint32_t failed_commits = 0;
  // Aggregate committed bytes per second over one-second buckets.
  std::vector<double> throughput_series;
  double aggregate_throughput = 0.0;
};

StressReport bench_stress(const std::string& manager_address, const StressSpec& spec,
                          const ClientOptions& options = {});

struct SimilarityRow {
  uint32_t from = 0;
  uint32_t to = 0;
  double similarity = 0.0;
  double throughput = 0.0;
};

// Similarity of each consecutive version pair under `scheme`.
std::vector<SimilarityRow> similarity_table(const WorkloadSpec& spec,
                                            const ChunkingScheme& scheme);

}  // namespace ckpool::harness
