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

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "ckpool/client.hpp"
#include "ckpool/error.hpp"

namespace fs = std::filesystem;

namespace ckpool {

namespace {

using SteadyClock = std::chrono::steady_clock;

constexpr size_t kStagingBytes = 1 << 20;
constexpr size_t kJobsPerMember = 2;
constexpr int kMaxReplacements = 3;

std::atomic<uint64_t> temp_counter{0};

double seconds_between(SteadyClock::time_point a, SteadyClock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

}  // namespace

struct WriteSession::Impl {
  struct Item {
    std::vector<uint8_t> bytes;
    fs::path file;
    bool end = false;
  };
  struct Job {
    size_t index;
    ChunkId id;
    std::vector<uint8_t> payload;
  };
  struct Member {
    StripeMember info;
    std::deque<Job> jobs;
    bool end = false;
    std::thread thread;
  };

  Impl(Client& c, DatasetName d, WritePolicy p)
      : client(c), dataset(std::move(d)), policy(std::move(p)) {}

  Client& client;
  DatasetName dataset;
  WritePolicy policy;
  ReservationGrant grant;
  SteadyClock::time_point opened_at{};
  SteadyClock::time_point close_returned_at{};
  SteadyClock::time_point fully_stored_at{};
  bool fully_stored = false;
  Version version = 0;
  ReplicationState replication_state = ReplicationState::kPending;

  // Producer side; touched only by the writing thread.
  uint64_t accepted = 0;
  std::vector<uint8_t> staging;
  int temp_fd = -1;
  fs::path temp_path;
  uint64_t temp_size = 0;
  std::atomic<uint64_t> temp_bytes{0};

  mutable std::mutex mu;
  std::condition_variable cv;
  SessionState state = SessionState::kOpen;
  std::deque<Item> items;
  uint64_t credits = 0;
  bool failed = false;
  std::string failure;
  std::thread pipeline;
  std::vector<std::unique_ptr<Member>> members;
  std::vector<BenefactorId> tried;
  std::vector<ReservationId> extra_reservations;
  std::vector<ChunkRef> refs;
  size_t rr = 0;
  uint64_t bytes_uploaded = 0;
  uint64_t chunks_uploaded = 0;
  std::map<BenefactorId, uint64_t> per_member;
  std::vector<fs::path> leftover_files;

  // Pipeline-thread state.
  uint64_t reserved = 0;
  uint64_t processed = 0;

  void start();
  void fail_session(const std::string& why);
  void throw_if_failed();
  void push_item(Item item);
  void acquire_credits(uint64_t n);
  void release_credits(uint64_t n);

  void open_temp();
  void flush_staging();
  void seal_temp();

  void run_pipeline();
  void on_chunk(const ChunkDescriptor& d, std::span<const uint8_t> payload);
  void run_member(Member* m);
  bool try_put(const StripeMember& target, const Job& job);
  bool replace_member(Member* m);

  void finish_pipeline();
  void cleanup();
  TransferMetrics metrics() const;
};

void WriteSession::Impl::start() {
  opened_at = SteadyClock::now();
  grant = client.manager().reserve_space(client.options().client_id, policy.reservation_hint,
                                         policy.stripe_width);
  reserved = policy.reservation_hint;
  for (const auto& m : grant.members) {
    auto member = std::make_unique<Member>();
    member->info = m;
    tried.push_back(m.id);
    members.push_back(std::move(member));
  }
  if (policy.protocol != WriteProtocol::kSlidingWindow) open_temp();
  for (auto& m : members) {
    Member* raw = m.get();
    raw->thread = std::thread([this, raw] { run_member(raw); });
  }
  pipeline = std::thread([this] { run_pipeline(); });
}

void WriteSession::Impl::fail_session(const std::string& why) {
  {
    std::lock_guard lock(mu);
    if (!failed) {
      failed = true;
      failure = why;
    }
  }
  cv.notify_all();
}

void WriteSession::Impl::throw_if_failed() {
  std::lock_guard lock(mu);
  if (failed) fail(ErrorCode::kSessionFailed, "session failed: " + failure);
}

void WriteSession::Impl::push_item(Item item) {
  {
    std::lock_guard lock(mu);
    items.push_back(std::move(item));
  }
  cv.notify_all();
}

void WriteSession::Impl::acquire_credits(uint64_t n) {
  std::unique_lock lock(mu);
  cv.wait(lock, [&] { return failed || credits + n <= policy.buffer_bytes; });
  if (failed) fail(ErrorCode::kSessionFailed, "session failed: " + failure);
  credits += n;
}

void WriteSession::Impl::release_credits(uint64_t n) {
  if (policy.protocol != WriteProtocol::kSlidingWindow) return;
  credits -= std::min(credits, n);
  cv.notify_all();
}

// ---- local temp files ------------------------------------------------------

void WriteSession::Impl::open_temp() {
  temp_path = policy.temp_dir / ("ckpool-" + std::to_string(::getpid()) + "-" +
                                 std::to_string(temp_counter.fetch_add(1)) + ".spill");
  temp_fd = ::open(temp_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
  if (temp_fd < 0) {
    fail(ErrorCode::kIo, "create " + temp_path.string() + ": " + std::strerror(errno));
  }
  temp_size = 0;
  std::lock_guard lock(mu);
  leftover_files.push_back(temp_path);
}

void WriteSession::Impl::flush_staging() {
  size_t pos = 0;
  while (pos < staging.size()) {
    size_t n = staging.size() - pos;
    if (policy.protocol == WriteProtocol::kIncremental) {
      n = std::min<size_t>(n, policy.temp_file_limit - temp_size);
    }
    size_t done = 0;
    while (done < n) {
      const ssize_t w = ::write(temp_fd, staging.data() + pos + done, n - done);
      if (w < 0) {
        if (errno == EINTR) continue;
        fail(ErrorCode::kIo, "write " + temp_path.string() + ": " + std::strerror(errno));
      }
      done += static_cast<size_t>(w);
    }
    pos += n;
    temp_size += n;
    temp_bytes += n;
    if (policy.protocol == WriteProtocol::kIncremental && temp_size >= policy.temp_file_limit) {
      seal_temp();
      open_temp();
    }
  }
  staging.clear();
}

// Closes the current temp file and hands it to the uploader.
void WriteSession::Impl::seal_temp() {
  if (temp_fd < 0) return;
  if (policy.sync_temp_files && temp_size > 0) ::fdatasync(temp_fd);
  ::close(temp_fd);
  temp_fd = -1;
  if (temp_size == 0) {
    std::error_code ec;
    fs::remove(temp_path, ec);
    return;
  }
  Item item;
  item.file = temp_path;
  push_item(std::move(item));
}

// ---- upload pipeline -------------------------------------------------------

void WriteSession::Impl::run_pipeline() {
  try {
    auto chunker = Chunker::make(policy.scheme(), [this](const ChunkDescriptor& d,
                                                         std::span<const uint8_t> payload) {
      on_chunk(d, payload);
    });
    std::vector<uint8_t> buf;
    for (;;) {
      Item item;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return failed || !items.empty(); });
        if (failed) break;
        item = std::move(items.front());
        items.pop_front();
      }
      if (item.end) {
        chunker->finish();
        break;
      }
      if (!item.file.empty()) {
        const int fd = ::open(item.file.c_str(), O_RDONLY | O_CLOEXEC);
        if (fd < 0) fail(ErrorCode::kIo, "open " + item.file.string());
        buf.resize(kStagingBytes);
        for (;;) {
          const ssize_t n = ::read(fd, buf.data(), buf.size());
          if (n < 0) {
            if (errno == EINTR) continue;
            ::close(fd);
            fail(ErrorCode::kIo, "read " + item.file.string());
          }
          if (n == 0) break;
          chunker->feed(std::span<const uint8_t>(buf.data(), static_cast<size_t>(n)));
        }
        ::close(fd);
        std::error_code ec;
        fs::remove(item.file, ec);
      } else {
        chunker->feed(item.bytes);
      }
    }
  } catch (const std::exception& e) {
    fail_session(e.what());
  }
  {
    std::lock_guard lock(mu);
    for (auto& m : members) m->end = true;
  }
  cv.notify_all();
  for (auto& m : members) {
    if (m->thread.joinable()) m->thread.join();
  }
}

void WriteSession::Impl::on_chunk(const ChunkDescriptor& d, std::span<const uint8_t> payload) {
  processed += d.length;
  if (processed > reserved) {
    try {
      client.manager().extend_reservation(grant.id, policy.reservation_hint);
    } catch (const Error&) {
      // A lapsed reservation surfaces as a rejected commit.
    }
    reserved += policy.reservation_hint;
  }

  size_t index;
  {
    std::lock_guard lock(mu);
    index = refs.size();
    refs.push_back(ChunkRef{d.id, d.length, {}});
  }
  std::vector<ChunkLocation> found;
  try {
    const ChunkAnnouncement a{d.id, d.length};
    found = client.manager().announce_chunks(grant.id, std::span(&a, 1));
  } catch (const Error&) {
    // Without the lookup every chunk is uploaded.
    found.clear();
  }
  if (policy.dedup != DedupMode::kOff && !found.empty() && !found.front().replicas.empty()) {
    std::lock_guard lock(mu);
    for (const auto& r : found.front().replicas) refs[index].replicas.push_back(r.id);
    release_credits(d.length);
    return;
  }

  Job job{index, d.id, std::vector<uint8_t>(payload.begin(), payload.end())};
  std::unique_lock lock(mu);
  Member* m = members[rr++ % members.size()].get();
  cv.wait(lock, [&] { return failed || m->jobs.size() < kJobsPerMember; });
  if (failed) fail(ErrorCode::kSessionFailed, failure);
  m->jobs.push_back(std::move(job));
  lock.unlock();
  cv.notify_all();
}

bool WriteSession::Impl::try_put(const StripeMember& target, const Job& job) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      client.benefactors().put_chunk(target.address, job.id, job.payload);
      return true;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kUnavailable || e.code() == ErrorCode::kTimeout) {
        client.benefactors().forget(target.address);
      }
    }
  }
  return false;
}

bool WriteSession::Impl::replace_member(Member* m) {
  std::vector<BenefactorId> exclude;
  {
    std::lock_guard lock(mu);
    exclude = tried;
  }
  ReservationGrant g;
  try {
    g = client.manager().reserve_space(client.options().client_id, policy.reservation_hint, 1,
                                       exclude);
  } catch (const Error&) {
    return false;
  }
  if (g.members.empty()) return false;
  std::lock_guard lock(mu);
  m->info = g.members.front();
  tried.push_back(m->info.id);
  extra_reservations.push_back(g.id);
  return true;
}

void WriteSession::Impl::run_member(Member* m) {
  for (;;) {
    Job job;
    StripeMember target;
    {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return failed || !m->jobs.empty() || m->end; });
      if (failed || m->jobs.empty()) return;
      job = std::move(m->jobs.front());
      m->jobs.pop_front();
      target = m->info;
    }
    cv.notify_all();

    bool ok = try_put(target, job);
    for (int i = 0; !ok && i < kMaxReplacements; ++i) {
      if (!replace_member(m)) break;
      {
        std::lock_guard lock(mu);
        target = m->info;
      }
      ok = try_put(target, job);
    }
    if (!ok) {
      fail_session("chunk " + job.id.short_hex() + " could not be stored on any benefactor");
      return;
    }
    {
      std::lock_guard lock(mu);
      refs[job.index].replicas = {target.id};
      bytes_uploaded += job.payload.size();
      ++chunks_uploaded;
      ++per_member[target.id];
      release_credits(job.payload.size());
    }
    cv.notify_all();
  }
}

void WriteSession::Impl::finish_pipeline() {
  Item end;
  end.end = true;
  push_item(std::move(end));
  if (pipeline.joinable()) pipeline.join();
}

void WriteSession::Impl::cleanup() {
  if (temp_fd >= 0) {
    ::close(temp_fd);
    temp_fd = -1;
  }
  std::vector<fs::path> files;
  std::vector<ReservationId> reservations;
  {
    std::lock_guard lock(mu);
    files = leftover_files;
    reservations = extra_reservations;
    extra_reservations.clear();
  }
  for (const auto& f : files) {
    std::error_code ec;
    fs::remove(f, ec);
  }
  for (ReservationId id : reservations) {
    try {
      client.manager().release_reservation(id);
    } catch (const Error&) {
    }
  }
}

TransferMetrics WriteSession::Impl::metrics() const {
  std::lock_guard lock(mu);
  TransferMetrics m;
  m.bytes_logical = accepted;
  m.bytes_uploaded = bytes_uploaded;
  m.chunks = refs.size();
  m.chunks_uploaded = chunks_uploaded;
  m.temp_bytes = temp_bytes.load();
  if (state == SessionState::kCommitted) {
    m.open_to_close_s = seconds_between(opened_at, close_returned_at);
    if (m.open_to_close_s > 0) m.oab = static_cast<double>(accepted) / m.open_to_close_s;
    if (fully_stored) {
      m.fully_stored = true;
      m.open_to_stored_s = seconds_between(opened_at, fully_stored_at);
      if (m.open_to_stored_s > 0) m.asb = static_cast<double>(accepted) / m.open_to_stored_s;
    }
  }
  return m;
}

// ---- public surface ---------------------------------------------------------

WriteSession::WriteSession(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

WriteSession::~WriteSession() {
  if (!impl_) return;
  SessionState s;
  {
    std::lock_guard lock(impl_->mu);
    s = impl_->state;
  }
  if (s == SessionState::kOpen || s == SessionState::kClosing) abort();
  if (impl_->pipeline.joinable()) {
    impl_->fail_session("session destroyed");
    impl_->pipeline.join();
  }
  impl_->cleanup();
}

size_t WriteSession::write(std::span<const uint8_t> data) {
  Impl& s = *impl_;
  {
    std::lock_guard lock(s.mu);
    if (s.state != SessionState::kOpen) fail(ErrorCode::kUsage, "write on a session that is not open");
  }
  s.throw_if_failed();
  const size_t total = data.size();
  if (s.policy.protocol == WriteProtocol::kSlidingWindow) {
    while (!data.empty()) {
      const size_t room = s.policy.chunk_size - s.staging.size();
      const size_t n = std::min(room, data.size());
      s.acquire_credits(n);
      s.staging.insert(s.staging.end(), data.begin(), data.begin() + static_cast<ptrdiff_t>(n));
      data = data.subspan(n);
      if (s.staging.size() >= s.policy.chunk_size) {
        Impl::Item item;
        item.bytes = std::move(s.staging);
        s.staging = {};
        s.push_item(std::move(item));
      }
    }
  } else {
    while (!data.empty()) {
      const size_t n = std::min(kStagingBytes - s.staging.size(), data.size());
      s.staging.insert(s.staging.end(), data.begin(), data.begin() + static_cast<ptrdiff_t>(n));
      data = data.subspan(n);
      if (s.staging.size() >= kStagingBytes) s.flush_staging();
    }
  }
  s.accepted += total;
  return total;
}

CommitResult WriteSession::close_commit() {
  Impl& s = *impl_;
  {
    std::lock_guard lock(s.mu);
    if (s.state != SessionState::kOpen) fail(ErrorCode::kUsage, "close on a session that is not open");
    s.state = SessionState::kClosing;
  }
  CommitResult result;
  try {
    if (s.policy.protocol == WriteProtocol::kSlidingWindow) {
      if (!s.staging.empty()) {
        Impl::Item item;
        item.bytes = std::move(s.staging);
        s.staging = {};
        s.push_item(std::move(item));
      }
    } else {
      s.flush_staging();
      s.seal_temp();
    }
    s.finish_pipeline();
    s.throw_if_failed();

    std::vector<ChunkRef> refs;
    {
      std::lock_guard lock(s.mu);
      refs = s.refs;
    }
    const auto reply = s.client.manager().commit_chunk_map(s.dataset, refs, s.grant.id,
                                                           s.policy.replication);
    s.version = reply.version;
    s.replication_state = reply.replication_state;
    result.version = reply.version;
    result.replication_state = reply.replication_state;
    s.cleanup();

    if (s.policy.semantics == CommitSemantics::kPessimistic &&
        reply.replication_state != ReplicationState::kSatisfied) {
      if (s.client.await_replication(s.dataset, s.version, s.policy.pessimistic_timeout)) {
        result.replication_state = ReplicationState::kSatisfied;
      } else if (s.policy.downgrade_on_timeout) {
        result.downgraded = true;
      } else {
        fail(ErrorCode::kTimeout, "replication target " + std::to_string(s.policy.replication) +
                                      " not reached for " + s.dataset.str());
      }
    }
    const auto now = SteadyClock::now();
    std::lock_guard lock(s.mu);
    s.close_returned_at = now;
    s.replication_state = result.replication_state;
    if (result.replication_state == ReplicationState::kSatisfied) {
      s.fully_stored = true;
      s.fully_stored_at = now;
    }
    s.state = SessionState::kCommitted;
  } catch (...) {
    {
      std::lock_guard lock(s.mu);
      s.state = SessionState::kFailed;
    }
    s.fail_session("close failed");
    if (s.pipeline.joinable()) s.pipeline.join();
    if (s.version == 0) {
      try {
        s.client.manager().release_reservation(s.grant.id);
      } catch (const Error&) {
      }
    }
    s.cleanup();
    throw;
  }
  result.metrics = s.metrics();
  return result;
}

bool WriteSession::await_fully_stored(Millis timeout) {
  Impl& s = *impl_;
  {
    std::lock_guard lock(s.mu);
    if (s.state != SessionState::kCommitted) fail(ErrorCode::kUsage, "session is not committed");
    if (s.fully_stored) return true;
  }
  if (!s.client.await_replication(s.dataset, s.version, timeout)) return false;
  std::lock_guard lock(s.mu);
  s.fully_stored = true;
  s.fully_stored_at = std::max(SteadyClock::now(), s.close_returned_at);
  s.replication_state = ReplicationState::kSatisfied;
  return true;
}

void WriteSession::abort() {
  Impl& s = *impl_;
  {
    std::lock_guard lock(s.mu);
    if (s.state == SessionState::kCommitted || s.state == SessionState::kFailed) return;
    s.state = SessionState::kFailed;
  }
  s.fail_session("aborted");
  if (s.pipeline.joinable()) s.pipeline.join();
  try {
    s.client.manager().release_reservation(s.grant.id);
  } catch (const Error&) {
  }
  s.cleanup();
}

SessionState WriteSession::state() const {
  std::lock_guard lock(impl_->mu);
  return impl_->state;
}

const DatasetName& WriteSession::dataset() const { return impl_->dataset; }
const WritePolicy& WriteSession::policy() const { return impl_->policy; }
uint64_t WriteSession::bytes_accepted() const { return impl_->accepted; }
TransferMetrics WriteSession::metrics() const { return impl_->metrics(); }

std::vector<StripeMember> WriteSession::stripe() const {
  std::lock_guard lock(impl_->mu);
  std::vector<StripeMember> out;
  for (const auto& m : impl_->members) out.push_back(m->info);
  return out;
}

std::map<BenefactorId, uint64_t> WriteSession::chunks_per_member() const {
  std::lock_guard lock(impl_->mu);
  return impl_->per_member;
}

std::unique_ptr<WriteSession> Client::open_write(const DatasetName& dataset,
                                                 const WritePolicy& policy) {
  policy.validate();
  auto impl = std::make_unique<WriteSession::Impl>(*this, dataset, policy);
  impl->start();
  return std::unique_ptr<WriteSession>(new WriteSession(std::move(impl)));
}

}  // namespace ckpool
