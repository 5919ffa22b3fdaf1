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

#include "ckpool/harness/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>
#include <tuple>

#include "ckpool/error.hpp"

namespace ckpool::harness {

namespace {

using SteadyClock = std::chrono::steady_clock;

constexpr size_t kAppWriteSize = 1 << 20;
constexpr Millis kStoreWait{120000};

double since(SteadyClock::time_point t0) {
  return std::chrono::duration<double>(SteadyClock::now() - t0).count();
}

std::string node_tag(WriteProtocol p, uint32_t stripe, uint64_t buffer, DedupMode d) {
  std::string tag = std::string(protocol_name(p)) + "-s" + std::to_string(stripe) + "-b" +
                    std::to_string(buffer >> 20) + "m-" + std::string(dedup_name(d));
  std::replace(tag.begin(), tag.end(), '_', '-');
  return tag;
}

// One session: writes `image` in application-sized pieces and waits for the
// replication target so ASB is defined.
void run_session(Client& client, const DatasetName& name, const WritePolicy& policy,
                 std::span<const uint8_t> image, SessionRecord& rec,
                 SteadyClock::time_point bench_start) {
  rec.started_s = since(bench_start);
  try {
    auto session = client.open_write(name, policy);
    for (size_t pos = 0; pos < image.size(); pos += kAppWriteSize) {
      session->write(image.subspan(pos, std::min(kAppWriteSize, image.size() - pos)));
    }
    session->close_commit();
    if (!session->await_fully_stored(kStoreWait)) rec.outcome = "timeout";
    const TransferMetrics m = session->metrics();
    rec.bytes_logical = m.bytes_logical;
    rec.bytes_uploaded = m.bytes_uploaded;
    rec.oab = m.oab;
    rec.asb = m.asb;
  } catch (const Error& e) {
    rec.outcome = std::string(error_code_name(e.code()));
    rec.bytes_logical = image.size();
  }
  rec.finished_s = since(bench_start);
}

}  // namespace

Summary summarize(std::vector<double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  s.median = n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = n > 1 ? std::sqrt(sq / static_cast<double>(n - 1)) : 0.0;
  return s;
}

const char* BenchReport::csv_header() {
  return "protocol,stripe,buffer,dedup,bytes_logical,bytes_uploaded,oab,asb,outcome";
}

void BenchReport::write_csv(std::ostream& out) const {
  out << csv_header() << "\n";
  for (const auto& r : sessions) {
    out << protocol_name(r.protocol) << ',' << r.stripe << ',' << r.buffer << ','
        << dedup_name(r.dedup) << ',' << r.bytes_logical << ',' << r.bytes_uploaded << ','
        << std::fixed << std::setprecision(1) << r.oab << ',' << r.asb << ','
        << std::defaultfloat << r.outcome << "\n";
  }
}

void BenchReport::print_table(std::ostream& out) const {
  using Key = std::tuple<int, uint32_t, uint64_t, int>;
  std::map<Key, std::vector<const SessionRecord*>> groups;
  for (const auto& r : sessions) {
    groups[{static_cast<int>(r.protocol), r.stripe, r.buffer, static_cast<int>(r.dedup)}].push_back(&r);
  }
  out << std::left << std::setw(16) << "protocol" << std::setw(8) << "stripe" << std::setw(10)
      << "buffer" << std::setw(7) << "dedup" << std::right << std::setw(6) << "runs"
      << std::setw(6) << "fail" << std::setw(12) << "OAB MB/s" << std::setw(9) << "sd"
      << std::setw(12) << "ASB MB/s" << std::setw(9) << "sd" << std::setw(10) << "upload"
      << "\n";
  out << std::fixed << std::setprecision(1);
  for (const auto& [key, recs] : groups) {
    std::vector<double> oab, asb;
    uint64_t logical = 0, uploaded = 0;
    size_t failed = 0;
    for (const auto* r : recs) {
      if (!r->ok()) {
        ++failed;
        continue;
      }
      oab.push_back(r->oab / 1e6);
      asb.push_back(r->asb / 1e6);
      logical += r->bytes_logical;
      uploaded += r->bytes_uploaded;
    }
    const Summary so = summarize(oab), sa = summarize(asb);
    const auto* first = recs.front();
    out << std::left << std::setw(16) << protocol_name(first->protocol) << std::setw(8)
        << first->stripe << std::setw(10) << (std::to_string(first->buffer >> 20) + "M")
        << std::setw(7) << dedup_name(first->dedup) << std::right << std::setw(6)
        << recs.size() << std::setw(6) << failed << std::setw(12) << so.median << std::setw(9)
        << so.stddev << std::setw(12) << sa.median << std::setw(9) << sa.stddev << std::setw(9)
        << (logical ? 100.0 * static_cast<double>(uploaded) / static_cast<double>(logical) : 0.0)
        << "%\n";
  }
  out << std::defaultfloat;
}

size_t BenchReport::failures() const {
  return static_cast<size_t>(std::count_if(sessions.begin(), sessions.end(),
                                           [](const SessionRecord& r) { return !r.ok(); }));
}

uint64_t BenchReport::bytes_logical() const {
  uint64_t n = 0;
  for (const auto& r : sessions) n += r.bytes_logical;
  return n;
}

uint64_t BenchReport::bytes_uploaded() const {
  uint64_t n = 0;
  for (const auto& r : sessions) n += r.bytes_uploaded;
  return n;
}

double BenchReport::aggregate_throughput() const {
  uint64_t committed = 0;
  for (const auto& r : sessions) {
    if (r.ok()) committed += r.bytes_logical;
  }
  return wall_s > 0 ? static_cast<double>(committed) / wall_s : 0.0;
}

std::vector<const SessionRecord*> BenchReport::select(WriteProtocol p, uint32_t stripe,
                                                      uint64_t buffer, DedupMode dedup) const {
  std::vector<const SessionRecord*> out;
  for (const auto& r : sessions) {
    if (r.protocol == p && r.stripe == stripe && r.buffer == buffer && r.dedup == dedup) {
      out.push_back(&r);
    }
  }
  return out;
}

BenchReport bench_write(const std::string& manager_address, const SweepSpec& spec,
                        const ClientOptions& options) {
  struct Point {
    WriteProtocol protocol;
    uint32_t stripe;
    uint64_t buffer;
    DedupMode dedup;
  };
  std::vector<Point> points;
  for (auto p : spec.protocols)
    for (auto s : spec.stripes)
      for (auto b : spec.buffers)
        for (auto d : spec.dedups) points.push_back({p, s, b, d});

  Client client(manager_address, options);
  BenchReport report;
  const auto start = SteadyClock::now();

  auto run_point = [&](size_t pi, uint32_t run) {
    const Point& pt = points[pi];
    WritePolicy policy = spec.base;
    policy.protocol = pt.protocol;
    policy.stripe_width = pt.stripe;
    policy.buffer_bytes = pt.buffer;
    policy.dedup = pt.dedup;
    // Distinct content per (run, point) so global dedup never sees bytes
    // from another sweep point.
    WorkloadSpec w = spec.workload;
    w.seed = spec.workload.seed + static_cast<uint64_t>(run) * points.size() + pi;
    VersionGenerator gen(w);
    const std::string node = node_tag(pt.protocol, pt.stripe, pt.buffer, pt.dedup);
    while (auto image = gen.next()) {
      SessionRecord rec;
      rec.protocol = pt.protocol;
      rec.semantics = policy.semantics;
      rec.stripe = pt.stripe;
      rec.buffer = pt.buffer;
      rec.dedup = pt.dedup;
      rec.replication = policy.replication;
      rec.run = run;
      const DatasetName name{spec.application, node,
                             static_cast<uint64_t>(run) * w.versions + gen.produced()};
      run_session(client, name, policy, *image, rec, start);
      if (rec.ok() && rec.asb > rec.oab * (1.0 + 1e-9)) ++report.oab_violations;
      report.sessions.push_back(std::move(rec));
    }
  };

  if (spec.interleave) {
    for (uint32_t run = 0; run < spec.runs; ++run)
      for (size_t pi = 0; pi < points.size(); ++pi) run_point(pi, run);
  } else {
    for (size_t pi = 0; pi < points.size(); ++pi)
      for (uint32_t run = 0; run < spec.runs; ++run) run_point(pi, run);
  }
  report.wall_s = since(start);
  return report;
}

StressReport bench_stress(const std::string& manager_address, const StressSpec& spec,
                          const ClientOptions& options) {
  StressReport out;
  std::mutex mu;
  std::atomic<uint32_t> commits{0};
  std::atomic<bool> hook_fired{false};
  const auto start = SteadyClock::now();

  std::vector<std::thread> threads;
  for (uint32_t c = 0; c < spec.clients; ++c) {
    threads.emplace_back([&, c] {
      std::this_thread::sleep_until(start + c * spec.stagger);
      ClientOptions opts = options;
      opts.client_id = spec.application + "-client-" + std::to_string(c);
      Client client(manager_address, opts);
      for (uint32_t f = 0; f < spec.files; ++f) {
        const auto image =
            random_bytes(spec.file_size, spec.seed + static_cast<uint64_t>(c) * spec.files + f);
        SessionRecord rec;
        rec.protocol = spec.policy.protocol;
        rec.semantics = spec.policy.semantics;
        rec.stripe = spec.policy.stripe_width;
        rec.buffer = spec.policy.buffer_bytes;
        rec.dedup = spec.policy.dedup;
        rec.replication = spec.policy.replication;
        rec.client = c;
        rec.run = f;
        const DatasetName name{spec.application, "c" + std::to_string(c), f + 1ULL};
        run_session(client, name, spec.policy, image, rec, start);
        const uint32_t done = rec.ok() ? commits.fetch_add(1) + 1 : commits.load();
        if (spec.hook && spec.hook_after_commits > 0 && done >= spec.hook_after_commits &&
            !hook_fired.exchange(true)) {
          spec.hook();
        }
        std::lock_guard lock(mu);
        out.report.sessions.push_back(std::move(rec));
      }
    });
  }
  for (auto& t : threads) t.join();
  out.report.wall_s = since(start);

  for (const auto& r : out.report.sessions) {
    if (!r.ok()) ++out.failed_commits;
    if (r.ok() && r.asb > r.oab * (1.0 + 1e-9)) ++out.report.oab_violations;
  }
  // Spread each session's bytes evenly over its lifetime.
  const auto buckets = static_cast<size_t>(std::ceil(out.report.wall_s)) + 1;
  out.throughput_series.assign(buckets, 0.0);
  for (const auto& r : out.report.sessions) {
    if (!r.ok() || r.finished_s <= r.started_s) continue;
    const double rate = static_cast<double>(r.bytes_logical) / (r.finished_s - r.started_s);
    for (size_t b = static_cast<size_t>(r.started_s); b < buckets && b < r.finished_s; ++b) {
      const double lo = std::max<double>(b, r.started_s);
      const double hi = std::min<double>(b + 1.0, r.finished_s);
      if (hi > lo) out.throughput_series[b] += rate * (hi - lo);
    }
  }
  out.aggregate_throughput = out.report.aggregate_throughput();
  return out;
}

std::vector<SimilarityRow> similarity_table(const WorkloadSpec& spec,
                                            const ChunkingScheme& scheme) {
  std::vector<SimilarityRow> rows;
  VersionGenerator gen(spec);
  auto prev = gen.next();
  if (!prev) return rows;
  while (auto cur = gen.next()) {
    const SimilarityReport r = measure_similarity(*prev, *cur, scheme);
    rows.push_back({gen.produced() - 1, gen.produced(), r.ratio, r.heuristic_throughput});
    prev = std::move(cur);
  }
  return rows;
}

}  // namespace ckpool::harness
