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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any fails. `acceptance 3 5` runs only those.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ckpool/chunking.hpp"
#include "ckpool/client.hpp"
#include "ckpool/error.hpp"
#include "ckpool/harness/bench.hpp"
#include "ckpool/harness/cluster.hpp"
#include "ckpool/harness/workload.hpp"
#include "gc_model.hpp"
#include "lifecycle_model.hpp"

using namespace ckpool;
using namespace ckpool::harness;

namespace {

// Pinned thresholds.
constexpr double kC1MaxSeconds = 300.0;
constexpr uint32_t kC1Seeds = 20;
constexpr uint64_t kC1Size = 64 * kMiB;
constexpr int kC2Interleavings = 200;
constexpr int kC2Readers = 4;
constexpr int kC3Trials = 50;
constexpr uint32_t kC4Runs = 20;
constexpr uint64_t kC4Size = 64 * kMiB;
constexpr uint64_t kC5FixedImage = 64 * kMiB;
constexpr uint64_t kC5FixedChunk = 1 * kMiB;
constexpr double kC5PrependMax = 0.01;
constexpr uint64_t kC5CbchImage = 8 * kMiB;
constexpr uint64_t kC5CbchInsert = 100;
constexpr double kC5CbchMin = 0.95;
constexpr uint32_t kC5CbchSeeds = 30;
constexpr double kC6Low = 0.24;
constexpr double kC6High = 0.30;
constexpr uint64_t kC7Size = 256 * kMiB;
constexpr double kC7Gap = 2.0;
constexpr int kC7Runs = 5;
constexpr int kC8Histories = 1000;
constexpr int kC9Histories = 500;
constexpr double kC10MaxSeconds = 600.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using SteadyClock = std::chrono::steady_clock;

double since(SteadyClock::time_point t0) {
  return std::chrono::duration<double>(SteadyClock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double median(std::vector<double> v) { return summarize(std::move(v)).median; }

std::unique_ptr<LocalCluster> cluster(uint32_t n, Millis heartbeat = Millis(200)) {
  ClusterOptions o;
  o.benefactors = n;
  o.capacity = 64ULL << 30;
  o.heartbeat_interval = heartbeat;
  return LocalCluster::up(o);
}

CommitResult put(Client& c, const DatasetName& d, const WritePolicy& p,
                 std::span<const uint8_t> data, size_t piece = 1 << 20) {
  auto s = c.open_write(d, p);
  for (size_t off = 0; off < data.size(); off += piece) {
    s->write(data.subspan(off, std::min(piece, data.size() - off)));
  }
  return s->close_commit();
}

const WriteProtocol kProtocols[] = {WriteProtocol::kCompleteLocal, WriteProtocol::kIncremental,
                                    WriteProtocol::kSlidingWindow};

Outcome c1_round_trip() {
  const auto t0 = SteadyClock::now();
  auto c = cluster(4);
  auto client = c->client();
  uint32_t runs = 0, mismatches = 0, errors = 0;
  std::string first;
  for (uint32_t seed = 1; seed <= kC1Seeds; ++seed) {
    uint32_t cfg = 0;
    for (auto proto : kProtocols) {
      for (auto sem : {CommitSemantics::kOptimistic, CommitSemantics::kPessimistic}) {
        for (uint32_t stripe : {1u, 2u, 4u}) {
          ++cfg;
          WritePolicy p;
          p.protocol = proto;
          p.semantics = sem;
          p.stripe_width = stripe;
          p.replication = 2;
          p.sync_temp_files = false;
          const DatasetName d{"c1", std::string(protocol_name(proto)) + "-" +
                                        std::string(semantics_name(sem)) + "-s" +
                                        std::to_string(stripe),
                              seed};
          const auto data = random_bytes(kC1Size, seed * 1000 + cfg);
          ++runs;
          try {
            put(*client, d, p, data);
            if (client->open_read(d)->read_all() != data) {
              ++mismatches;
              if (first.empty()) first = d.str();
            }
          } catch (const Error& e) {
            ++errors;
            if (first.empty()) first = d.str() + ": " + e.what();
          }
        }
      }
    }
    client->manager().delete_folder("c1");
    c->gc_all();
    c->gc_all();
  }
  const double wall = since(t0);
  Outcome o;
  o.pass = mismatches == 0 && errors == 0 && wall < kC1MaxSeconds;
  o.detail = fmt("%u round trips of 64 MiB, %u mismatches, %u errors, %.0f s (limit %.0f s)", runs,
                 mismatches, errors, wall, kC1MaxSeconds);
  if (!first.empty()) o.detail += "; first: " + first;
  return o;
}

Outcome c2_session_semantics() {
  auto c = cluster(4);
  constexpr uint64_t kChunk = 256 * kKiB;
  std::atomic<uint64_t> observations{0}, violations{0};
  std::string first;
  std::mutex first_mu;
  auto violation = [&](const std::string& what) {
    ++violations;
    std::lock_guard lock(first_mu);
    if (first.empty()) first = what;
  };

  for (int it = 0; it < kC2Interleavings; ++it) {
    std::mt19937_64 rng(static_cast<uint64_t>(it) + 1);
    // Versions are dense per application folder, so each interleaving gets
    // its own folder.
    const DatasetName d{"c2-" + std::to_string(it), "n", 1};
    std::mutex mu;
    std::map<Version, std::vector<uint8_t>> expected;
    std::atomic<bool> done{false};

    auto check = [&](ReadHandle& h, Version asked) {
      const ChunkMap& map = h.map();
      std::vector<uint8_t> want;
      {
        std::lock_guard lock(mu);
        auto e = expected.find(map.version);
        if (e == expected.end()) {
          violation(fmt("%s: observed v%llu that was never written", d.str().c_str(),
                        static_cast<unsigned long long>(map.version)));
          return;
        }
        want = e->second;
      }
      if (asked != 0 && map.version != asked) violation(d.str() + ": asked version mismatch");
      const auto descs = chunk_stream(want, FixedScheme{kChunk});
      bool same = map.total_bytes == want.size() && map.chunks.size() == descs.size();
      for (size_t i = 0; same && i < descs.size(); ++i) {
        same = map.chunks[i].id == descs[i].id && map.chunks[i].length == descs[i].length;
      }
      if (!same) violation(fmt("%s v%llu: chunk map is not the committed one", d.str().c_str(),
                               static_cast<unsigned long long>(map.version)));
      if (h.read_all() != want) violation(d.str() + ": bytes differ from committed version");
      ++observations;
    };

    std::vector<std::thread> readers;
    for (int r = 0; r < kC2Readers; ++r) {
      readers.emplace_back([&, r] {
        std::mt19937_64 rr(static_cast<uint64_t>(it) * 131 + r);
        auto client = c->client(ClientOptions{"reader-" + std::to_string(r)});
        bool last_pass = false;
        while (!last_pass) {
          last_pass = done.load();
          try {
            Version asked = 0;
            if (rr() % 3 == 0) asked = 1 + rr() % 3;
            auto h = client->open_read(d, asked);
            check(*h, asked);
          } catch (const Error& e) {
            if (e.code() != ErrorCode::kNotFound) violation(d.str() + ": read error " + e.what());
          }
          std::this_thread::sleep_for(std::chrono::microseconds(rr() % 2000));
        }
      });
    }

    auto writer = c->client(ClientOptions{"writer"});
    for (Version v = 1; v <= 3; ++v) {
      const uint64_t size = kChunk + rng() % (3 * kMiB);
      auto data = random_bytes(size, rng());
      {
        std::lock_guard lock(mu);
        expected[v] = data;
      }
      WritePolicy p;
      p.protocol = kProtocols[rng() % 3];
      p.stripe_width = 1 + static_cast<uint32_t>(rng() % 4);
      p.chunk_size = kChunk;
      p.buffer_bytes = 4 * kChunk;
      p.temp_file_limit = 2 * kChunk;
      p.sync_temp_files = false;
      try {
        auto s = writer->open_write(d, p);
        for (size_t off = 0; off < data.size();) {
          const size_t n = std::min<size_t>(1 + rng() % (600 * kKiB), data.size() - off);
          s->write(std::span<const uint8_t>(data).subspan(off, n));
          off += n;
          if (rng() % 4 == 0) std::this_thread::sleep_for(std::chrono::microseconds(rng() % 1500));
        }
        const auto r = s->close_commit();
        if (r.version != v) violation(d.str() + ": version not dense");
      } catch (const Error& e) {
        violation(d.str() + ": write failed: " + e.what());
      }
    }
    done = true;
    for (auto& t : readers) t.join();
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = fmt("%d interleavings, %llu observed maps, %llu violations", kC2Interleavings,
                 static_cast<unsigned long long>(observations.load()),
                 static_cast<unsigned long long>(violations.load()));
  if (!first.empty()) o.detail += "; first: " + first;
  return o;
}

Outcome c3_durability() {
  std::mt19937_64 rng(3);
  int read_ok = 0;
  std::string first;
  {
    auto c = cluster(4);
    for (int t = 0; t < kC3Trials; ++t) {
      WritePolicy p;
      p.protocol = kProtocols[rng() % 3];
      p.semantics = CommitSemantics::kPessimistic;
      p.replication = 2;
      p.stripe_width = std::array<uint32_t, 3>{1, 2, 4}[rng() % 3];
      p.buffer_bytes = 8 * kMiB;
      p.temp_file_limit = 4 * kMiB;
      p.sync_temp_files = false;
      const DatasetName d{"c3", "pess", static_cast<uint64_t>(t)};
      const auto data = random_bytes(4 * kMiB + rng() % (4 * kMiB), rng());
      const size_t victim = rng() % 4;
      try {
        auto w = c->client();
        const auto r = put(*w, d, p, data);
        if (r.replication_state != ReplicationState::kSatisfied) {
          if (first.empty()) first = d.str() + ": pessimistic commit not satisfied";
        } else {
          c->kill_benefactor(victim);
          auto reader = c->client(ClientOptions{"c3", Millis(3000)});
          if (reader->open_read(d)->read_all() == data) {
            ++read_ok;
          } else if (first.empty()) {
            first = d.str() + ": wrong bytes";
          }
        }
      } catch (const Error& e) {
        if (first.empty()) first = d.str() + ": " + e.what();
      }
      if (!c->running(victim)) c->restart_benefactor(victim);
      c->wait_online(4, Millis(20000));
    }
  }

  int detected = 0, silent = 0;
  {
    auto c = cluster(3);
    c->manager().set_replication_paused(true);
    for (int t = 0; t < kC3Trials; ++t) {
      WritePolicy p;
      p.protocol = kProtocols[rng() % 3];
      p.replication = 2;
      p.stripe_width = 1;
      p.buffer_bytes = 8 * kMiB;
      p.temp_file_limit = 4 * kMiB;
      p.sync_temp_files = false;
      const DatasetName d{"c3", "opt", static_cast<uint64_t>(t)};
      const auto data = random_bytes(1 * kMiB + rng() % (3 * kMiB), rng());
      std::optional<size_t> holder;
      try {
        auto w = c->client(ClientOptions{"c3w", Millis(3000)});
        put(*w, d, p, data);
        holder = c->index_of(w->manager().get_chunk_map(d).chunks.at(0).replicas.at(0));
        c->kill_benefactor(holder.value());
        auto reader = c->client(ClientOptions{"c3r", Millis(3000)});
        try {
          const auto got = reader->open_read(d)->read_all();
          ++silent;
          if (first.empty()) first = d.str() + (got == data ? ": read of lost data succeeded"
                                                            : ": silent wrong read");
        } catch (const Error& e) {
          const bool names = std::string(e.what()).find(d.str()) != std::string::npos;
          if (e.code() == ErrorCode::kUnavailable && names) {
            ++detected;
          } else if (first.empty()) {
            first = d.str() + ": loss reported as " + std::string(error_code_name(e.code())) +
                    " " + e.what();
          }
        }
      } catch (const Error& e) {
        if (first.empty()) first = d.str() + ": " + e.what();
      }
      if (holder && !c->running(*holder)) c->restart_benefactor(*holder);
      c->wait_online(3, Millis(20000));
    }
  }
  Outcome o;
  o.pass = read_ok == kC3Trials && detected == kC3Trials && silent == 0;
  o.detail = fmt("pessimistic r=2 reads after a kill %d/%d; optimistic loss reported %d/%d, "
                 "silent %d",
                 read_ok, kC3Trials, detected, kC3Trials, silent);
  if (!first.empty()) o.detail += "; first: " + first;
  return o;
}

Outcome c4_protocol_ordering() {
  auto c = cluster(4);
  SweepSpec s;
  s.protocols = {WriteProtocol::kCompleteLocal, WriteProtocol::kIncremental,
                 WriteProtocol::kSlidingWindow};
  s.stripes = {4};
  s.buffers = {64 * kMiB};
  s.runs = kC4Runs;
  s.workload.image_size = kC4Size;
  s.application = "c4";
  const auto r = bench_write(c->manager_address(), s);
  std::map<WriteProtocol, double> asb, oab;
  for (auto p : s.protocols) {
    std::vector<double> a, b;
    for (const auto* rec : r.select(p, 4, 64 * kMiB, DedupMode::kOff)) {
      a.push_back(rec->asb / 1e6);
      b.push_back(rec->oab / 1e6);
    }
    asb[p] = median(a);
    oab[p] = median(b);
  }
  const double sw = asb[WriteProtocol::kSlidingWindow], inc = asb[WriteProtocol::kIncremental],
               cl = asb[WriteProtocol::kCompleteLocal];
  Outcome o;
  o.pass = r.failures() == 0 && r.oab_violations == 0 && sw >= inc && inc >= cl;
  o.detail = fmt("median ASB MB/s sliding_window %.1f, incremental %.1f, complete_local %.1f; "
                 "median OAB %.1f / %.1f / %.1f; %zu sessions, %zu OAB<ASB, %zu failed",
                 sw, inc, cl, oab[WriteProtocol::kSlidingWindow], oab[WriteProtocol::kIncremental],
                 oab[WriteProtocol::kCompleteLocal], r.sessions.size(), r.oab_violations,
                 r.failures());
  return o;
}

Outcome c5_similarity() {
  bool fixed_ok = true;
  std::string fixed;
  const double q = static_cast<double>(kC5FixedChunk) / static_cast<double>(kC5FixedImage);
  for (double f : {0.0, 0.1, 0.25, 0.5}) {
    double worst = 0.0;
    for (uint64_t seed = 1; seed <= 3; ++seed) {
      WorkloadSpec w;
      w.image_size = kC5FixedImage;
      w.versions = 2;
      w.mutation_fraction = f;
      w.region_size = kC5FixedChunk;
      w.seed = seed;
      const double s = similarity_table(w, FixedScheme{kC5FixedChunk})[0].similarity;
      worst = std::max(worst, std::abs(s - (1.0 - f)));
    }
    fixed_ok = fixed_ok && worst <= q;
    fixed += fmt(" f=%.2f max|err| %.4f", f, worst);
  }

  WorkloadSpec pre;
  pre.image_size = kC5FixedImage;
  pre.versions = 2;
  pre.insert_bytes = 1;
  pre.insert_offset = 0;
  pre.region_size = kC5FixedChunk;
  const double prepend = similarity_table(pre, FixedScheme{kC5FixedChunk})[0].similarity;

  std::vector<double> cb;
  for (uint32_t seed = 1; seed <= kC5CbchSeeds; ++seed) {
    WorkloadSpec w;
    w.image_size = kC5CbchImage;
    w.versions = 2;
    w.insert_bytes = kC5CbchInsert;
    w.insert_offset = kC5CbchImage / 2;
    w.seed = seed;
    cb.push_back(similarity_table(w, CbchParams::no_overlap(20, 14))[0].similarity);
  }
  const double cb_min = *std::min_element(cb.begin(), cb.end());
  const auto below = std::count_if(cb.begin(), cb.end(), [](double s) { return s < kC5CbchMin; });

  Outcome o;
  o.pass = fixed_ok && prepend <= kC5PrependMax && cb_min >= kC5CbchMin;
  o.detail = fmt("fsch (tolerance %.4f):", q) + fixed +
             fmt("; 1-byte prepend %.4f (max %.2f); cbch(20,14,20) 100-byte mid insert over %u "
                 "seeds: min %.3f, median %.3f, %ld below %.2f",
                 prepend, kC5PrependMax, kC5CbchSeeds, cb_min, median(cb), long(below),
                 kC5CbchMin);
  return o;
}

Outcome c6_dedup() {
  auto c = cluster(4);
  SweepSpec s;
  s.dedups = {DedupMode::kFsch};
  s.runs = 1;
  s.base.sync_temp_files = false;
  s.workload.image_size = 64 * kMiB;
  s.workload.versions = 10;
  s.workload.mutation_fraction = 0.25;
  s.workload.region_size = kDefaultChunkSize;
  s.application = "c6";
  const auto r = bench_write(c->manager_address(), s);
  uint64_t logical = 0, uploaded = 0, later_logical = 0, later_uploaded = 0;
  for (size_t i = 0; i < r.sessions.size(); ++i) {
    logical += r.sessions[i].bytes_logical;
    uploaded += r.sessions[i].bytes_uploaded;
    if (i > 0) {
      later_logical += r.sessions[i].bytes_logical;
      later_uploaded += r.sessions[i].bytes_uploaded;
    }
  }
  const double ratio = logical ? static_cast<double>(uploaded) / static_cast<double>(logical) : 0;
  const double later =
      later_logical ? static_cast<double>(later_uploaded) / static_cast<double>(later_logical) : 0;
  Outcome o;
  o.pass = r.failures() == 0 && r.sessions.size() == 10 && ratio >= kC6Low && ratio <= kC6High;
  o.detail = fmt("uploaded/logical over all 10 versions %.4f (bound [%.2f, %.2f]); versions 2-10 "
                 "alone %.4f; %zu failed",
                 ratio, kC6Low, kC6High, later, r.failures());
  return o;
}

Outcome c7_throughput() {
  const auto data = random_bytes(kC7Size, 7);
  auto rate = [&](const ChunkingScheme& s) {
    const auto t0 = SteadyClock::now();
    const auto d = chunk_stream(data, s);
    const double sec = since(t0);
    return d.empty() ? 0.0 : static_cast<double>(kC7Size) / sec / 1e6;
  };
  // Windows start at min_chunk, so min_chunk = m makes every byte pass
  // through the boundary test.
  CbchParams pm = CbchParams::no_overlap(20, 14), p1 = CbchParams::overlap(20, 14);
  pm.min_chunk = p1.min_chunk = 20;
  std::vector<double> fs, a, b, da, db;
  for (int i = 0; i < kC7Runs; ++i) {
    fs.push_back(rate(FixedScheme{}));
    a.push_back(rate(pm));
    b.push_back(rate(p1));
  }
  da.push_back(rate(CbchParams::no_overlap(20, 14)));
  db.push_back(rate(CbchParams::overlap(20, 14)));
  const double f = median(fs), m = median(a), one = median(b);
  Outcome o;
  o.pass = f >= kC7Gap * m && m >= kC7Gap * one;
  o.detail = fmt("median MB/s fsch %.0f, cbch p=m %.0f, cbch p=1 %.0f; ratios %.2fx and %.2fx "
                 "(need %.1fx); with min_chunk 64 KiB p=m %.0f, p=1 %.0f",
                 f, m, one, f / m, m / one, kC7Gap, da[0], db[0]);
  return o;
}

Outcome c8_gc_oracle() {
  const auto dir = std::filesystem::temp_directory_path() / "ckpool-acceptance-gc";
  int failed = 0, exchanges = 0, restarts = 0, commits = 0, purges = 0;
  uint64_t orphans = 0;
  std::string first;
  for (int seed = 1; seed <= kC8Histories; ++seed) {
    const auto r = model::run_gc_history(static_cast<uint64_t>(seed), dir);
    exchanges += r.gc_exchanges;
    restarts += r.restarts;
    commits += r.commits;
    purges += r.purges;
    orphans += r.orphan_bytes;
    if (!r.ok()) {
      ++failed;
      if (first.empty()) first = fmt("seed %d: %s", seed, r.first_failure.c_str());
    }
  }
  std::filesystem::remove_all(dir);
  Outcome o;
  o.pass = failed == 0;
  o.detail = fmt("%d histories (%d commits, %d purges, %d gc exchanges, %d restarts), %d "
                 "mismatched, orphan bytes after quiescence %llu",
                 kC8Histories, commits, purges, exchanges, restarts, failed,
                 static_cast<unsigned long long>(orphans));
  if (!first.empty()) o.detail += "; first: " + first;
  return o;
}

Outcome c9_lifecycle() {
  int bad_replace = 0, bad_purge = 0;
  std::string first;
  for (int seed = 1; seed <= kC9Histories; ++seed) {
    const auto a = model::check_replace_history(static_cast<uint64_t>(seed), 60);
    const auto b = model::check_purge_history(static_cast<uint64_t>(seed), 60);
    bad_replace += !a.empty();
    bad_purge += !b.empty();
    if (first.empty() && !(a + b).empty()) first = fmt("seed %d: %s", seed, (a + b).c_str());
  }
  Outcome o;
  o.pass = bad_replace == 0 && bad_purge == 0;
  o.detail = fmt("%d replace and %d purge histories of 60 out-of-order commits; %d and %d wrong",
                 kC9Histories, kC9Histories, bad_replace, bad_purge);
  if (!first.empty()) o.detail += "; first: " + first;
  return o;
}

Outcome c10_scale() {
  const auto t0 = SteadyClock::now();
  auto c = cluster(20, Millis(500));
  StressSpec s;
  s.policy.sync_temp_files = false;
  const auto r = bench_stress(c->manager_address(), s);
  const double wall = since(t0);
  Outcome o;
  o.pass = r.failed_commits == 0 && r.report.sessions.size() == 70 && r.aggregate_throughput > 0 &&
           wall < kC10MaxSeconds;
  o.detail = fmt("%zu sessions, %u failed commits, aggregate %.1f MB/s, peak second %.1f MB/s, "
                 "%.0f s including cluster start (limit %.0f s)",
                 r.report.sessions.size(), r.failed_commits, r.aggregate_throughput / 1e6,
                 r.throughput_series.empty()
                     ? 0.0
                     : *std::max_element(r.throughput_series.begin(), r.throughput_series.end()) /
                           1e6,
                 wall, kC10MaxSeconds);
  return o;
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "round-trip integrity", c1_round_trip},
    {2, "session semantics", c2_session_semantics},
    {3, "durability", c3_durability},
    {4, "protocol ordering", c4_protocol_ordering},
    {5, "similarity", c5_similarity},
    {6, "dedup network savings", c6_dedup},
    {7, "chunking throughput ordering", c7_throughput},
    {8, "gc oracle", c8_gc_oracle},
    {9, "lifecycle", c9_lifecycle},
    {10, "scalability smoke", c10_scale},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = SteadyClock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = Outcome{false, std::string("aborted: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s C%d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
