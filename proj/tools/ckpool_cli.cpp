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

#include <signal.h>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ckpool/client.hpp"
#include "ckpool/harness/bench.hpp"
#include "ckpool/harness/cluster.hpp"

using namespace ckpool;
namespace fs = std::filesystem;

namespace {

std::string human_bytes(uint64_t n) {
  static const char* units[] = {"B", "KiB", "MiB", "GiB", "TiB"};
  double v = static_cast<double>(n);
  int u = 0;
  while (v >= 1024.0 && u < 4) {
    v /= 1024.0;
    ++u;
  }
  std::ostringstream out;
  if (u == 0) {
    out << n << " B";
  } else {
    out << std::fixed << std::setprecision(1) << v << " " << units[u];
  }
  return out.str();
}

std::string iso_time(TimePoint t) {
  const std::time_t s = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&s, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

KeyValueConfig settings_from(const std::string& file, const std::vector<std::string>& sets) {
  KeyValueConfig kv = file.empty() ? KeyValueConfig{} : KeyValueConfig::load(file);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kUsage, "--set expects key=value: " + s);
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
  return kv;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& text, Parse parse, const char* what) {
  std::vector<T> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    auto v = parse(item);
    if (!v) fail(ErrorCode::kUsage, std::string("bad ") + what + ": " + item);
    out.push_back(*v);
  }
  return out;
}

void print_namespace(const NamespaceListing& ns, std::ostream& out) {
  for (const auto& folder : ns.folders) {
    out << folder.application << "/  lifecycle=" << lifecycle_mode_name(folder.policy.mode);
    if (folder.policy.mode == LifecycleMode::kPurge) {
      out << " purge_after=" << folder.policy.purge_after.count() << "ms";
    }
    out << "\n";
    for (const auto& d : folder.datasets) {
      out << "  " << d.name.str() << "\n";
      for (const auto& v : d.versions) {
        out << "    v" << v.version << "  " << std::setw(10) << human_bytes(v.total_bytes) << "  "
            << v.chunk_count << " chunks  r=" << v.replication << " "
            << replication_state_name(v.replication_state) << "  " << iso_time(v.committed_at)
            << "\n";
      }
    }
  }
}

struct PutArgs {
  std::string file, dataset, policy_file;
  std::vector<std::string> sets;
  std::string protocol, semantics, dedup;
  uint32_t stripe = 0, replication = 0;
  bool wait = false;
};

int cmd_put(Client& client, const PutArgs& a) {
  KeyValueConfig kv = settings_from(a.policy_file, a.sets);
  if (!a.protocol.empty()) kv.set("protocol", a.protocol);
  if (!a.semantics.empty()) kv.set("semantics", a.semantics);
  if (!a.dedup.empty()) kv.set("dedup", a.dedup);
  if (a.stripe) kv.set("stripe_width", std::to_string(a.stripe));
  if (a.replication) kv.set("replication", std::to_string(a.replication));
  const WritePolicy policy = WritePolicy::from(kv);
  const DatasetName name = DatasetName::must_parse(a.dataset);

  std::ifstream in(a.file, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + a.file);
  auto session = client.open_write(name, policy);
  std::vector<uint8_t> buf(1 << 20);
  while (in) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    const auto n = static_cast<size_t>(in.gcount());
    if (n > 0) session->write(std::span<const uint8_t>(buf.data(), n));
  }
  if (in.bad()) fail(ErrorCode::kIo, "read " + a.file);
  const CommitResult r = session->close_commit();
  bool stored = r.replication_state == ReplicationState::kSatisfied;
  if (a.wait && !stored) stored = session->await_fully_stored(policy.pessimistic_timeout);
  const TransferMetrics m = session->metrics();
  std::cout << name.str() << " v" << r.version << " "
            << replication_state_name(stored ? ReplicationState::kSatisfied : r.replication_state)
            << (r.downgraded ? " (downgraded)" : "") << "  " << human_bytes(m.bytes_logical)
            << " logical, " << human_bytes(m.bytes_uploaded) << " uploaded, OAB "
            << std::fixed << std::setprecision(1) << m.oab / 1e6 << " MB/s\n";
  return 0;
}

int cmd_get(Client& client, const std::string& target, const std::string& out, Version version) {
  if (version == 0) {
    const DatasetName got = client.restart_fetch(target, out);
    std::cout << "fetched " << got.str() << " -> " << out << "\n";
    return 0;
  }
  const DatasetName name = DatasetName::must_parse(target);
  auto handle = client.open_read(name, version);
  const fs::path part = out + ".part";
  {
    std::ofstream f(part, std::ios::binary | std::ios::trunc);
    std::vector<uint8_t> buf(1 << 20);
    for (;;) {
      const size_t n = handle->read(std::span<uint8_t>(buf));
      if (n == 0) break;
      f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(n));
    }
    if (!f) fail(ErrorCode::kIo, "write " + part.string());
  }
  fs::rename(part, out);
  std::cout << "fetched " << name.str() << " v" << handle->map().version << " -> " << out << "\n";
  return 0;
}

int cmd_stat(Client& client, const std::string& target, Version version) {
  if (target.empty()) {
    std::cout << std::left << std::setw(5) << "id" << std::setw(24) << "address" << std::setw(9)
              << "status" << "free\n";
    for (const auto& b : client.manager().list_benefactors()) {
      std::cout << std::setw(5) << b.id << std::setw(24) << b.address << std::setw(9)
                << (b.status == BenefactorStatus::kOnline ? "online" : "offline")
                << human_bytes(b.free_space) << "\n";
    }
    return 0;
  }
  const ChunkMap map = client.manager().get_chunk_map(DatasetName::must_parse(target), version);
  std::cout << map.dataset.str() << " v" << map.version << "  " << human_bytes(map.total_bytes)
            << "  " << map.chunks.size() << " chunks  r=" << map.replication << " "
            << replication_state_name(map.replication_state) << "  "
            << iso_time(map.committed_at) << "\n";
  uint64_t offset = 0;
  for (const auto& c : map.chunks) {
    std::cout << "  " << c.id.hex() << "  @" << offset << "  " << c.length << "  on";
    for (auto b : c.replicas) std::cout << " " << b;
    std::cout << "\n";
    offset += c.length;
  }
  return 0;
}

int cmd_gc(Client& client) {
  const auto purged = client.manager().apply_lifecycle();
  for (const auto& p : purged) std::cout << "purged " << p.dataset.str() << " v" << p.version << "\n";
  uint32_t total = 0;
  for (const auto& b : client.manager().list_benefactors()) {
    if (b.status != BenefactorStatus::kOnline) continue;
    try {
      const uint32_t n = client.benefactors().run_gc_round(b.address);
      std::cout << "benefactor " << b.id << " (" << b.address << "): deleted " << n << " chunks\n";
      total += n;
    } catch (const Error& e) {
      std::cout << "benefactor " << b.id << " (" << b.address << "): " << e.what() << "\n";
    }
  }
  std::cout << "deleted " << total << " chunks\n";
  return 0;
}

struct BenchArgs {
  uint32_t cluster = 0;
  std::string protocols = "sliding_window";
  std::string stripes = "4";
  std::string buffers = "64M";
  std::string dedups = "off";
  std::string semantics = "optimistic";
  uint32_t replication = 1;
  uint32_t runs = 5;
  std::string image_size = "64M";
  uint32_t versions = 1;
  double mutation = 0.0;
  std::string insert = "0";
  uint64_t seed = 1;
  std::string csv;
  bool stress = false;
  uint32_t clients = 7, files = 10;
  std::string file_size = "16M", stagger = "1s";
};

int cmd_bench(const std::string& manager_address, const BenchArgs& a) {
  std::unique_ptr<harness::LocalCluster> cluster;
  std::string address = manager_address;
  if (a.cluster > 0) {
    harness::ClusterOptions o;
    o.benefactors = a.cluster;
    cluster = harness::LocalCluster::up(o);
    address = cluster->manager_address();
    std::cerr << "local cluster: manager " << address << ", " << a.cluster << " benefactors\n";
  }
  WritePolicy base;
  base.semantics = *parse_semantics(a.semantics);
  base.replication = a.replication;

  harness::BenchReport report;
  if (a.stress) {
    harness::StressSpec s;
    s.clients = a.clients;
    s.files = a.files;
    s.file_size = parse_bytes(a.file_size);
    s.stagger = parse_duration(a.stagger);
    s.policy = base;
    s.seed = a.seed;
    const auto r = harness::bench_stress(address, s);
    report = r.report;
    std::cout << "failed commits: " << r.failed_commits << "\n"
              << "aggregate throughput: " << std::fixed << std::setprecision(1)
              << r.aggregate_throughput / 1e6 << " MB/s\nper-second MB/s:";
    for (double v : r.throughput_series) std::cout << " " << v / 1e6;
    std::cout << std::defaultfloat << "\n";
  } else {
    harness::SweepSpec s;
    s.protocols = parse_list<WriteProtocol>(a.protocols, parse_protocol, "protocol");
    s.stripes = parse_list<uint32_t>(a.stripes, [](const std::string& x) -> std::optional<uint32_t> {
      try {
        return static_cast<uint32_t>(std::stoul(x));
      } catch (...) {
        return std::nullopt;
      }
    }, "stripe");
    s.buffers = parse_list<uint64_t>(a.buffers, [](const std::string& x) -> std::optional<uint64_t> {
      return parse_bytes(x);
    }, "buffer");
    s.dedups = parse_list<DedupMode>(a.dedups, parse_dedup, "dedup mode");
    s.runs = a.runs;
    s.base = base;
    s.workload.image_size = parse_bytes(a.image_size);
    s.workload.versions = a.versions;
    s.workload.mutation_fraction = a.mutation;
    s.workload.insert_bytes = parse_bytes(a.insert);
    s.workload.region_size = base.chunk_size;
    s.workload.seed = a.seed;
    report = harness::bench_write(address, s);
  }
  report.print_table(std::cout);
  std::cout << "OAB<ASB violations: " << report.oab_violations << "\n";
  if (!a.csv.empty()) {
    std::ofstream out(a.csv);
    report.write_csv(out);
  }
  return report.failures() == 0 && report.oab_violations == 0 ? 0 : 1;
}

int cmd_cluster(uint32_t n, const std::string& work_dir) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  harness::ClusterOptions o;
  o.benefactors = n;
  if (!work_dir.empty()) {
    o.work_dir = work_dir;
    o.keep_work_dir = true;
  }
  auto cluster = harness::LocalCluster::up(o);
  std::cout << "manager " << cluster->manager_address() << "\n";
  for (size_t i = 0; i < cluster->size(); ++i) {
    std::cout << "benefactor " << cluster->benefactor_id(i) << " " << cluster->benefactor_address(i)
              << " " << cluster->benefactor_root(i).string() << "\n";
  }
  std::cout << "work dir " << cluster->work_dir().string() << "\nctrl-c to stop" << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ckpool checkpoint storage client"};
  app.require_subcommand(1);
  std::string manager = "127.0.0.1:7070";
  std::string client_config;
  app.add_option("-m,--manager", manager, "manager host:port");
  app.add_option("--client-config", client_config, "client key=value settings file");

  PutArgs put;
  auto* put_cmd = app.add_subcommand("put", "store a local file as a new version");
  put_cmd->add_option("file", put.file)->required();
  put_cmd->add_option("dataset", put.dataset, "A.N.T")->required();
  put_cmd->add_option("--policy", put.policy_file, "write policy key=value file");
  put_cmd->add_option("--set", put.sets, "policy override key=value");
  put_cmd->add_option("--protocol", put.protocol, "sliding_window|incremental|complete_local");
  put_cmd->add_option("--semantics", put.semantics, "optimistic|pessimistic");
  put_cmd->add_option("--dedup", put.dedup, "off|fsch|cbch");
  put_cmd->add_option("--stripe", put.stripe);
  put_cmd->add_option("-r,--replication", put.replication);
  put_cmd->add_flag("--wait", put.wait, "wait until the replication target is met");

  std::string get_target, get_out;
  Version get_version = 0;
  auto* get_cmd = app.add_subcommand("get", "fetch a version to a local file");
  get_cmd->add_option("dataset", get_target, "A.N.T, or A.N for the newest timestep")->required();
  get_cmd->add_option("out", get_out)->required();
  get_cmd->add_option("-v,--version", get_version, "version (default latest)");

  std::string ls_prefix;
  auto* ls_cmd = app.add_subcommand("ls", "list the namespace");
  ls_cmd->add_option("prefix", ls_prefix);

  std::string rm_target;
  bool rm_folder = false;
  auto* rm_cmd = app.add_subcommand("rm", "delete a dataset or a whole application folder");
  rm_cmd->add_option("target", rm_target)->required();
  rm_cmd->add_flag("--folder", rm_folder, "target names an application");

  std::string stat_target;
  Version stat_version = 0;
  auto* stat_cmd = app.add_subcommand("stat", "show a chunk map, or the benefactor registry");
  stat_cmd->add_option("dataset", stat_target);
  stat_cmd->add_option("-v,--version", stat_version);

  std::string pol_app, pol_mode, pol_after = "0";
  auto* pol_cmd = app.add_subcommand("policy-set", "set an application's lifecycle policy");
  pol_cmd->add_option("application", pol_app)->required();
  pol_cmd->add_option("mode", pol_mode, "none|replace|purge")->required();
  pol_cmd->add_option("--purge-after", pol_after, "age limit for purge mode");

  auto* gc_cmd = app.add_subcommand("gc-now", "apply lifecycle policies and run one GC round everywhere");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "write benchmark sweep or multi-client stress");
  bench_cmd->add_option("--cluster", bench.cluster, "spawn a local cluster with N benefactors");
  bench_cmd->add_option("--protocols", bench.protocols);
  bench_cmd->add_option("--stripes", bench.stripes);
  bench_cmd->add_option("--buffers", bench.buffers);
  bench_cmd->add_option("--dedup", bench.dedups);
  bench_cmd->add_option("--semantics", bench.semantics);
  bench_cmd->add_option("-r,--replication", bench.replication);
  bench_cmd->add_option("--runs", bench.runs);
  bench_cmd->add_option("--image-size", bench.image_size);
  bench_cmd->add_option("--versions", bench.versions);
  bench_cmd->add_option("--mutation", bench.mutation);
  bench_cmd->add_option("--insert", bench.insert);
  bench_cmd->add_option("--seed", bench.seed);
  bench_cmd->add_option("--csv", bench.csv, "write per-session records here");
  bench_cmd->add_flag("--stress", bench.stress, "staggered multi-client load instead of a sweep");
  bench_cmd->add_option("--clients", bench.clients);
  bench_cmd->add_option("--files", bench.files);
  bench_cmd->add_option("--file-size", bench.file_size);
  bench_cmd->add_option("--stagger", bench.stagger);

  uint32_t cluster_n = 4;
  std::string cluster_dir;
  auto* cluster_cmd = app.add_subcommand("cluster", "run a local cluster until interrupted");
  cluster_cmd->add_option("-n,--benefactors", cluster_n);
  cluster_cmd->add_option("--work-dir", cluster_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bench_cmd) return cmd_bench(manager, bench);
    if (*cluster_cmd) return cmd_cluster(cluster_n, cluster_dir);

    ClientOptions options;
    if (!client_config.empty()) options = ClientOptions::from(KeyValueConfig::load(client_config));
    Client client(manager, options);
    if (*put_cmd) return cmd_put(client, put);
    if (*get_cmd) return cmd_get(client, get_target, get_out, get_version);
    if (*ls_cmd) {
      print_namespace(client.manager().list_namespace(ls_prefix), std::cout);
      return 0;
    }
    if (*rm_cmd) {
      const uint32_t n = rm_folder ? client.manager().delete_folder(rm_target)
                                   : client.manager().delete_dataset(DatasetName::must_parse(rm_target));
      std::cout << "deleted " << n << " versions\n";
      return 0;
    }
    if (*stat_cmd) return cmd_stat(client, stat_target, stat_version);
    if (*pol_cmd) {
      const auto mode = parse_lifecycle_mode(pol_mode);
      if (!mode) fail(ErrorCode::kUsage, "bad lifecycle mode: " + pol_mode);
      const auto purged =
          client.manager().set_policy(pol_app, LifecyclePolicy{*mode, parse_duration(pol_after)});
      for (const auto& p : purged) std::cout << "purged " << p.dataset.str() << " v" << p.version << "\n";
      return 0;
    }
    if (*gc_cmd) return cmd_gc(client);
  } catch (const Error& e) {
    std::cerr << "ckpool: " << error_code_name(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "ckpool: " << e.what() << "\n";
    return exit_code_for(ErrorCode::kInternal);
  }
  return 0;
}
