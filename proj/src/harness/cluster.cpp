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

#include "ckpool/harness/cluster.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "ckpool/chunk_store.hpp"
#include "ckpool/error.hpp"

extern char** environ;

namespace fs = std::filesystem;

namespace ckpool::harness {

namespace {

using SteadyClock = std::chrono::steady_clock;

fs::path self_dir() {
  std::error_code ec;
  const fs::path exe = fs::read_symlink("/proc/self/exe", ec);
  return ec ? fs::current_path() : exe.parent_path();
}

std::string ms(Millis d) { return std::to_string(d.count()) + "ms"; }

void append_settings(std::vector<std::string>& args, const KeyValueConfig& kv) {
  for (const auto& [k, v] : kv.values()) {
    args.push_back("--set");
    args.push_back(k + "=" + v);
  }
}

bool reap(pid_t pid, bool block) {
  int status = 0;
  const pid_t r = ::waitpid(pid, &status, block ? 0 : WNOHANG);
  return r == pid || (r < 0 && errno == ECHILD);
}

}  // namespace

ClusterOptions ClusterOptions::from(const KeyValueConfig& kv) {
  ClusterOptions o;
  o.benefactors = static_cast<uint32_t>(kv.get_u64("benefactors", o.benefactors));
  o.capacity = kv.get_bytes("capacity", o.capacity);
  o.heartbeat_interval = kv.get_duration("heartbeat_interval", o.heartbeat_interval);
  o.liveness_timeout = kv.get_duration("liveness_timeout", o.liveness_timeout);
  o.gc_interval = kv.get_duration("gc_interval", o.gc_interval);
  o.start_timeout = kv.get_duration("start_timeout", o.start_timeout);
  if (auto w = kv.get("work_dir")) o.work_dir = *w;
  if (auto b = kv.get("bin_dir")) o.bin_dir = *b;
  o.keep_work_dir = kv.get_bool("keep_work_dir", o.keep_work_dir);
  for (const auto& [k, v] : kv.values()) {
    if (k.rfind("manager.", 0) == 0) o.manager_settings.set(k.substr(8), v);
    if (k.rfind("benefactor.", 0) == 0) o.benefactor_settings.set(k.substr(11), v);
  }
  return o;
}

LocalCluster::LocalCluster(ClusterOptions options) : options_(std::move(options)) {
  if (options_.bin_dir.empty()) options_.bin_dir = self_dir();
  if (options_.work_dir.empty()) {
    std::random_device rd;
    std::ostringstream name;
    name << "ckpool-cluster-" << ::getpid() << "-" << std::hex << rd();
    work_dir_ = fs::temp_directory_path() / name.str();
    owns_work_dir_ = !options_.keep_work_dir;
  } else {
    work_dir_ = options_.work_dir;
  }
  fs::create_directories(work_dir_);
  benefactor_client_ = std::make_unique<BenefactorClient>(std::chrono::seconds(10));
}

std::unique_ptr<LocalCluster> LocalCluster::up(ClusterOptions options) {
  std::unique_ptr<LocalCluster> c(new LocalCluster(std::move(options)));
  c->start_manager("127.0.0.1:0");
  c->manager_client_ = std::make_unique<ManagerClient>(c->manager_.address, std::chrono::seconds(10));
  c->benefactors_.resize(c->options_.benefactors);
  for (size_t i = 0; i < c->benefactors_.size(); ++i) c->start_benefactor(i, "127.0.0.1:0");
  c->wait_online(c->benefactors_.size(), c->options_.start_timeout);
  c->resolve_ids();
  return c;
}

LocalCluster::~LocalCluster() {
  for (auto& b : benefactors_) stop_daemon(b, SIGTERM);
  stop_daemon(manager_, SIGTERM);
  if (owns_work_dir_) {
    std::error_code ec;
    fs::remove_all(work_dir_, ec);
  }
}

std::string LocalCluster::spawn(const std::string& program, std::vector<std::string> args,
                                const fs::path& port_file, const std::string& log_name,
                                pid_t* pid) {
  const fs::path exe = options_.bin_dir / program;
  if (!fs::exists(exe)) fail(ErrorCode::kUsage, "daemon executable not found: " + exe.string());
  std::error_code ec;
  fs::remove(port_file, ec);
  args.insert(args.begin(), exe.string());
  args.push_back("--port-file");
  args.push_back(port_file.string());

  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  const fs::path log = work_dir_ / log_name;
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_addopen(&fa, 0, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_addopen(&fa, 1, log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  posix_spawn_file_actions_adddup2(&fa, 1, 2);
  const int rc = posix_spawn(pid, exe.c_str(), &fa, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  if (rc != 0) fail(ErrorCode::kIo, "spawn " + exe.string() + ": " + std::strerror(rc));

  const auto deadline = SteadyClock::now() + options_.start_timeout;
  while (SteadyClock::now() < deadline) {
    std::ifstream in(port_file);
    std::string line;
    if (in && std::getline(in, line) && !line.empty() && !in.fail()) return line;
    if (reap(*pid, false)) {
      *pid = -1;
      fail(ErrorCode::kUnavailable, program + " exited during startup; see " + log.string());
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ::kill(*pid, SIGKILL);
  reap(*pid, true);
  *pid = -1;
  fail(ErrorCode::kUnavailable, program + " did not report its port; see " + log.string());
}

void LocalCluster::start_manager(const std::string& listen) {
  std::vector<std::string> args = {"--listen", listen,
                                   "--journal", (work_dir_ / "manager.journal").string(),
                                   "--heartbeat-interval", ms(options_.heartbeat_interval)};
  if (options_.liveness_timeout.count() > 0) {
    args.push_back("--liveness-timeout");
    args.push_back(ms(options_.liveness_timeout));
  }
  append_settings(args, options_.manager_settings);
  manager_.address =
      spawn("ckpool-manager", args, work_dir_ / "manager.port", "manager.log", &manager_.pid);
}

void LocalCluster::start_benefactor(size_t i, const std::string& listen) {
  const std::string tag = "benefactor-" + std::to_string(i);
  std::vector<std::string> args = {"--manager-address", manager_.address,
                                   "--root", benefactor_root(i).string(),
                                   "--capacity", std::to_string(options_.capacity),
                                   "--listen", listen,
                                   "--heartbeat-interval", ms(options_.heartbeat_interval),
                                   "--gc-interval", ms(options_.gc_interval)};
  append_settings(args, options_.benefactor_settings);
  Daemon& d = benefactors_.at(i);
  d.address = spawn("ckpool-benefactor", args, work_dir_ / (tag + ".port"), tag + ".log", &d.pid);
}

void LocalCluster::stop_daemon(Daemon& d, int signal) {
  if (d.pid <= 0) return;
  ::kill(d.pid, signal);
  if (signal != SIGKILL) {
    const auto deadline = SteadyClock::now() + std::chrono::seconds(3);
    while (!reap(d.pid, false)) {
      if (SteadyClock::now() > deadline) {
        ::kill(d.pid, SIGKILL);
        reap(d.pid, true);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  } else {
    reap(d.pid, true);
  }
  d.pid = -1;
}

void LocalCluster::resolve_ids() {
  for (const auto& rec : manager_client_->list_benefactors()) {
    for (auto& b : benefactors_) {
      if (b.address == rec.address) b.id = rec.id;
    }
  }
}

std::optional<size_t> LocalCluster::index_of(BenefactorId id) const {
  for (size_t i = 0; i < benefactors_.size(); ++i) {
    if (benefactors_[i].id == id) return i;
  }
  return std::nullopt;
}

fs::path LocalCluster::benefactor_root(size_t i) const {
  return work_dir_ / ("benefactor-" + std::to_string(i));
}

size_t LocalCluster::add_benefactor() {
  const size_t i = benefactors_.size();
  benefactors_.emplace_back();
  start_benefactor(i, "127.0.0.1:0");
  const auto deadline = SteadyClock::now() + options_.start_timeout;
  while (benefactors_[i].id == 0) {
    resolve_ids();
    if (benefactors_[i].id != 0) break;
    if (SteadyClock::now() > deadline) fail(ErrorCode::kUnavailable, "benefactor did not register");
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  return i;
}

void LocalCluster::kill_benefactor(size_t i) { stop_daemon(benefactors_.at(i), SIGKILL); }

void LocalCluster::restart_benefactor(size_t i) {
  Daemon& d = benefactors_.at(i);
  stop_daemon(d, SIGKILL);
  start_benefactor(i, d.address);
}

void LocalCluster::kill_manager() { stop_daemon(manager_, SIGKILL); }

void LocalCluster::restart_manager() {
  stop_daemon(manager_, SIGKILL);
  start_manager(manager_.address);
  manager_client_->ping();
}

bool LocalCluster::corrupt_chunk(size_t i, const ChunkId& id) {
  const fs::path p = benefactor_root(i) / ChunkStore::relative_path(id);
  std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
  if (!f) return false;
  f.seekg(0, std::ios::end);
  const auto size = static_cast<std::streamoff>(f.tellg());
  if (size <= 0) return false;
  const std::streamoff at = size / 2;
  char b = 0;
  f.seekg(at);
  f.read(&b, 1);
  b = static_cast<char>(b ^ 0x5A);
  f.seekp(at);
  f.write(&b, 1);
  return static_cast<bool>(f);
}

std::vector<size_t> LocalCluster::holders_of(const ChunkId& id) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < benefactors_.size(); ++i) {
    if (fs::exists(benefactor_root(i) / ChunkStore::relative_path(id))) out.push_back(i);
  }
  return out;
}

std::string LocalCluster::fault_inject(FaultAction action, size_t target,
                                       std::optional<ChunkId> chunk) {
  const std::string who =
      target == kManagerTarget ? std::string("manager") : "benefactor " + std::to_string(target);
  switch (action) {
    case FaultAction::kKill:
      target == kManagerTarget ? kill_manager() : kill_benefactor(target);
      return "killed " + who;
    case FaultAction::kRestart:
      target == kManagerTarget ? restart_manager() : restart_benefactor(target);
      return "restarted " + who;
    case FaultAction::kCorruptChunk:
      if (target == kManagerTarget || !chunk) {
        fail(ErrorCode::kUsage, "corrupt_chunk needs a benefactor and a chunk id");
      }
      if (!corrupt_chunk(target, *chunk)) {
        fail(ErrorCode::kNotFound, who + " does not hold chunk " + chunk->hex());
      }
      return "corrupted chunk " + chunk->short_hex() + " on " + who;
  }
  fail(ErrorCode::kUsage, "unknown fault action");
}

void LocalCluster::wait_online(size_t count, Millis timeout) {
  const auto deadline = SteadyClock::now() + timeout;
  for (;;) {
    size_t online = 0;
    try {
      for (const auto& rec : manager_client_->list_benefactors()) {
        if (rec.status == BenefactorStatus::kOnline) ++online;
      }
    } catch (const Error&) {
    }
    if (online >= count) return;
    if (SteadyClock::now() > deadline) {
      fail(ErrorCode::kUnavailable, std::to_string(online) + " of " + std::to_string(count) +
                                        " benefactors online after " + ms(timeout));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

void LocalCluster::wait_offline(size_t i, Millis timeout) {
  const BenefactorId id = benefactors_.at(i).id;
  const auto deadline = SteadyClock::now() + timeout;
  for (;;) {
    for (const auto& rec : manager_client_->list_benefactors()) {
      if (rec.id == id && rec.status == BenefactorStatus::kOffline) return;
    }
    if (SteadyClock::now() > deadline) {
      fail(ErrorCode::kTimeout, "benefactor " + std::to_string(i) + " still online");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

std::vector<ChunkId> LocalCluster::disk_chunks(size_t i) const {
  std::vector<ChunkId> out;
  const fs::path dir = benefactor_root(i) / "chunks";
  std::error_code ec;
  if (!fs::exists(dir, ec)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir, ec)) {
    if (!e.is_regular_file()) continue;
    if (auto id = ChunkId::from_hex(e.path().filename().string())) out.push_back(*id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

uint64_t LocalCluster::disk_chunk_bytes() const {
  uint64_t total = 0;
  for (size_t i = 0; i < benefactors_.size(); ++i) {
    const fs::path dir = benefactor_root(i) / "chunks";
    std::error_code ec;
    if (!fs::exists(dir, ec)) continue;
    for (const auto& e : fs::recursive_directory_iterator(dir, ec)) {
      if (e.is_regular_file()) total += e.file_size();
    }
  }
  return total;
}

uint32_t LocalCluster::gc_all() {
  uint32_t deleted = 0;
  for (auto& b : benefactors_) {
    if (b.pid > 0) deleted += benefactor_client_->run_gc_round(b.address);
  }
  return deleted;
}

std::unique_ptr<Client> LocalCluster::client(ClientOptions options) const {
  return std::make_unique<Client>(manager_.address, std::move(options));
}

}  // namespace ckpool::harness
