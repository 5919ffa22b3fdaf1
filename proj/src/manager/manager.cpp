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

#include "ckpool/manager.hpp"

#include <algorithm>
#include <mutex>
#include <random>

#include "ckpool/error.hpp"
#include "ckpool/messages.hpp"

namespace ckpool {

namespace {

constexpr int kEpochShift = 40;
constexpr uint64_t kSeqMask = (uint64_t{1} << kEpochShift) - 1;

bool same_content(const std::vector<ChunkRef>& a, std::span<const ChunkRef> b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].id != b[i].id || a[i].length != b[i].length) return false;
  }
  return true;
}

}  // namespace

ManagerConfig ManagerConfig::from(const KeyValueConfig& kv) {
  ManagerConfig c;
  c.listen = kv.get_string("listen", c.listen);
  c.heartbeat_interval = kv.get_duration("heartbeat_interval", c.heartbeat_interval);
  c.liveness_timeout = kv.get_duration("liveness_timeout", c.liveness_timeout);
  c.reservation_ttl = kv.get_duration("reservation_ttl", c.reservation_ttl);
  c.default_replication =
      static_cast<uint32_t>(kv.get_u64("replication", c.default_replication));
  if (auto mode = kv.get("lifecycle_mode")) {
    auto m = parse_lifecycle_mode(*mode);
    if (!m) fail(ErrorCode::kUsage, "bad lifecycle_mode: " + *mode);
    c.default_policy.mode = *m;
  }
  c.default_policy.purge_after = kv.get_duration("purge_after", c.default_policy.purge_after);
  c.lifecycle_interval = kv.get_duration("lifecycle_interval", c.lifecycle_interval);
  c.replication_interval = kv.get_duration("replication_interval", c.replication_interval);
  c.replication_retry = kv.get_duration("replication_retry", c.replication_retry);
  c.failed_target_backoff = kv.get_duration("failed_target_backoff", c.failed_target_backoff);
  c.journal = kv.get_string("journal", c.journal);
  c.journal_fsync = kv.get_bool("journal_fsync", c.journal_fsync);
  if (c.default_replication == 0) fail(ErrorCode::kUsage, "replication must be >= 1");
  if (c.default_policy.mode == LifecycleMode::kPurge && c.default_policy.purge_after.count() <= 0) {
    fail(ErrorCode::kUsage, "purge mode needs purge_after");
  }
  return c;
}

bool Manager::ChunkEntry::holds(BenefactorId b) const {
  return std::any_of(replicas.begin(), replicas.end(),
                     [b](const Replica& r) { return r.id == b; });
}

Manager::Manager(ManagerConfig config, Clock clock)
    : config_(std::move(config)), clock_(std::move(clock)) {
  std::random_device rd;
  gc_epoch_ = (uint64_t{rd()} % ((uint64_t{1} << 23) - 1)) + 1;
  if (!config_.journal.empty()) {
    journal_ = std::make_unique<Journal>(config_.journal, config_.journal_fsync);
    for (const auto& rec : journal_->replay()) {
      try {
        replay(rec);
      } catch (const Error& e) {
        fail(ErrorCode::kIo, std::string("corrupt journal record: ") + e.what());
      }
    }
  }
}

Manager::~Manager() = default;

// ---- journal -------------------------------------------------------------

void Manager::log(RecordType type, WireWriter& w, bool durable) {
  if (journal_) journal_->append(type, w.bytes(), durable);
}

void Manager::replay(const JournalRecord& rec) {
  WireReader r(rec.payload);
  switch (rec.type) {
    case RecordType::kRegisterBenefactor: {
      const BenefactorId id = r.u64();
      apply_register(id, r.str());
      break;
    }
    case RecordType::kSetPolicy: {
      const std::string app = r.str();
      apply_policy(app, wire::get_policy(r));
      break;
    }
    case RecordType::kCommit: {
      const DatasetName d = wire::get_dataset(r);
      const Version v = r.u64();
      const uint32_t repl = r.u32();
      const TimePoint at = wire::get_time(r);
      const auto chunks = r.list<ChunkRef>(wire::get_chunk_ref, 44);
      apply_commit(d, v, repl, at, chunks);
      break;
    }
    case RecordType::kAddReplica: {
      const ChunkId c = r.id();
      apply_add_replica(c, r.u64());
      break;
    }
    case RecordType::kDropReplica: {
      const ChunkId c = r.id();
      apply_drop_replica(c, r.u64());
      break;
    }
    case RecordType::kDeleteDataset:
      apply_delete_dataset(wire::get_dataset(r));
      break;
    case RecordType::kDeleteFolder:
      apply_delete_folder(r.str());
      break;
    case RecordType::kPurge: {
      const DatasetName d = wire::get_dataset(r);
      apply_purge(d, r.u64());
      break;
    }
    case RecordType::kSetReplication: {
      const DatasetName d = wire::get_dataset(r);
      const Version v = r.u64();
      apply_set_replication(d, v, r.u32());
      break;
    }
    default:
      fail(ErrorCode::kMalformed, "unknown record type");
  }
  r.expect_end();
}

void Manager::apply_register(BenefactorId id, const std::string& address) {
  auto& b = benefactors_[id];
  b.record.id = id;
  b.record.address = address;
  b.record.status = BenefactorStatus::kOffline;
  by_address_[address] = id;
  next_benefactor_ = std::max(next_benefactor_, id + 1);
}

void Manager::apply_policy(const std::string& app, const LifecyclePolicy& policy) {
  auto& f = folders_[app];
  f.policy = policy;
  f.explicit_policy = true;
}

void Manager::apply_commit(const DatasetName& d, Version v, uint32_t r, TimePoint at,
                           const std::vector<ChunkRef>& chunks) {
  auto [fit, fresh] = folders_.try_emplace(d.application);
  if (fresh) fit->second.policy = config_.default_policy;
  auto& ds = fit->second.datasets[{d.node, d.timestep}];
  VersionRecord rec;
  rec.committed_at = at;
  rec.replication = r;
  rec.chunks.reserve(chunks.size());
  for (const auto& c : chunks) {
    auto& e = chunks_[c.id];
    e.length = c.length;
    ++e.refs;
    for (BenefactorId b : c.replicas) add_replica_locked(c.id, b);
    rec.chunks.push_back(ChunkRef{c.id, c.length, {}});
    rec.total_bytes += c.length;
  }
  ds.versions[v] = std::move(rec);
  auto& counter = version_counter_[d.application];
  counter = std::max(counter, v);
}

void Manager::apply_add_replica(const ChunkId& c, BenefactorId b) {
  if (chunks_.count(c)) add_replica_locked(c, b);
}

void Manager::apply_drop_replica(const ChunkId& c, BenefactorId b) {
  drop_replica_locked(c, b);
  maybe_erase_chunk(c);
}

uint32_t Manager::apply_delete_dataset(const DatasetName& d) {
  auto* f = find_folder(d.application);
  if (!f) return 0;
  auto it = f->datasets.find({d.node, d.timestep});
  if (it == f->datasets.end()) return 0;
  const auto n = static_cast<uint32_t>(it->second.versions.size());
  for (const auto& [v, rec] : it->second.versions) release_chunk_refs(rec);
  f->datasets.erase(it);
  if (f->datasets.empty() && !f->explicit_policy) folders_.erase(d.application);
  return n;
}

uint32_t Manager::apply_delete_folder(const std::string& app) {
  auto it = folders_.find(app);
  if (it == folders_.end()) return 0;
  uint32_t n = 0;
  for (const auto& [key, ds] : it->second.datasets) {
    for (const auto& [v, rec] : ds.versions) {
      release_chunk_refs(rec);
      ++n;
    }
  }
  folders_.erase(it);
  return n;
}

void Manager::apply_purge(const DatasetName& d, Version v) {
  auto* ds = find_dataset(d);
  if (!ds) return;
  auto it = ds->versions.find(v);
  if (it == ds->versions.end()) return;
  release_chunk_refs(it->second);
  ds->versions.erase(it);
  ds->purged.insert(v);
}

void Manager::apply_set_replication(const DatasetName& d, Version v, uint32_t r) {
  auto* ds = find_dataset(d);
  if (!ds) return;
  auto it = ds->versions.find(v);
  if (it != ds->versions.end()) it->second.replication = r;
}

// ---- helpers -------------------------------------------------------------

void Manager::add_replica_locked(const ChunkId& c, BenefactorId b) {
  auto& e = chunks_[c];
  for (auto& r : e.replicas) {
    if (r.id == b) {
      // A fresh report means the copy exists now, whatever an older
      // inventory said.
      r.seq = gc_seq_;
      return;
    }
  }
  e.replicas.push_back(Replica{b, gc_seq_});
}

void Manager::drop_replica_locked(const ChunkId& c, BenefactorId b) {
  auto it = chunks_.find(c);
  if (it == chunks_.end()) return;
  auto& reps = it->second.replicas;
  reps.erase(std::remove_if(reps.begin(), reps.end(), [b](const Replica& r) { return r.id == b; }),
             reps.end());
}

void Manager::release_chunk_refs(const VersionRecord& v) {
  for (const auto& c : v.chunks) {
    auto it = chunks_.find(c.id);
    if (it == chunks_.end()) continue;
    if (it->second.refs > 0) --it->second.refs;
    maybe_erase_chunk(c.id);
  }
}

void Manager::maybe_erase_chunk(const ChunkId& c) {
  auto it = chunks_.find(c);
  if (it != chunks_.end() && it->second.refs == 0 && it->second.replicas.empty()) {
    chunks_.erase(it);
  }
}

void Manager::collect_expired_locked(TimePoint now) {
  for (auto it = reservations_.begin(); it != reservations_.end();) {
    if (it->second.expiry < now) {
      const ReservationId id = it->first;
      ++it;
      drop_reservation_locked(id);
    } else {
      ++it;
    }
  }
}

void Manager::drop_reservation_locked(ReservationId id) {
  auto it = reservations_.find(id);
  if (it == reservations_.end()) return;
  for (const auto& c : it->second.announced) {
    auto a = announced_.find(c);
    if (a != announced_.end() && --a->second == 0) announced_.erase(a);
  }
  reservations_.erase(it);
}

bool Manager::online(const BenefactorRecord& b, TimePoint now) const {
  if (b.last_heartbeat.time_since_epoch().count() == 0) return false;
  return now - b.last_heartbeat <= config_.effective_liveness_timeout();
}

uint64_t Manager::allocatable(BenefactorId id) const {
  auto it = benefactors_.find(id);
  if (it == benefactors_.end()) return 0;
  uint64_t reserved = 0;
  for (const auto& [rid, res] : reservations_) {
    for (const auto& m : res.members) {
      if (m.id == id) reserved += m.reserved_bytes;
    }
  }
  const uint64_t free = it->second.record.free_space;
  return free > reserved ? free - reserved : 0;
}

Manager::Folder* Manager::find_folder(const std::string& app) {
  auto it = folders_.find(app);
  return it == folders_.end() ? nullptr : &it->second;
}

const Manager::Folder* Manager::find_folder(const std::string& app) const {
  auto it = folders_.find(app);
  return it == folders_.end() ? nullptr : &it->second;
}

Manager::Dataset* Manager::find_dataset(const DatasetName& d) {
  auto* f = find_folder(d.application);
  if (!f) return nullptr;
  auto it = f->datasets.find({d.node, d.timestep});
  return it == f->datasets.end() ? nullptr : &it->second;
}

const Manager::Dataset* Manager::find_dataset(const DatasetName& d) const {
  const auto* f = find_folder(d.application);
  if (!f) return nullptr;
  auto it = f->datasets.find({d.node, d.timestep});
  return it == f->datasets.end() ? nullptr : &it->second;
}

const Manager::VersionRecord& Manager::version_locked(const DatasetName& d, Version v,
                                                      Version* resolved) const {
  const auto* ds = find_dataset(d);
  if (!ds) fail(ErrorCode::kNotFound, "no such dataset: " + d.str());
  if (v == 0) {
    if (ds->versions.empty()) {
      if (!ds->purged.empty()) fail(ErrorCode::kPurged, d.str() + " was purged");
      fail(ErrorCode::kNotFound, "no committed version of " + d.str());
    }
    *resolved = ds->versions.rbegin()->first;
    return ds->versions.rbegin()->second;
  }
  auto it = ds->versions.find(v);
  if (it == ds->versions.end()) {
    if (ds->purged.count(v)) {
      fail(ErrorCode::kPurged, d.str() + " version " + std::to_string(v) + " was purged");
    }
    fail(ErrorCode::kNotFound, d.str() + " has no version " + std::to_string(v));
  }
  *resolved = v;
  return it->second;
}

ReplicationState Manager::replication_state(const VersionRecord& v) const {
  for (const auto& c : v.chunks) {
    auto it = chunks_.find(c.id);
    if (it == chunks_.end() || it->second.replicas.size() < v.replication) {
      return ReplicationState::kPending;
    }
  }
  return ReplicationState::kSatisfied;
}

ChunkLocation Manager::location_locked(const ChunkId& id, const ChunkEntry& e) const {
  ChunkLocation loc;
  loc.id = id;
  loc.length = e.length;
  for (const auto& r : e.replicas) {
    auto b = benefactors_.find(r.id);
    loc.replicas.push_back(
        StripeMember{r.id, b == benefactors_.end() ? std::string() : b->second.record.address, 0});
  }
  return loc;
}

bool Manager::inflight_to(const ChunkId& c, BenefactorId target) const {
  auto it = inflight_.find(c);
  if (it == inflight_.end()) return false;
  return std::any_of(it->second.begin(), it->second.end(),
                     [target](const Inflight& f) { return f.target == target; });
}

void Manager::expire_inflight_locked(TimePoint now) {
  for (auto it = inflight_.begin(); it != inflight_.end();) {
    auto& v = it->second;
    v.erase(std::remove_if(v.begin(), v.end(), [now](const Inflight& f) { return f.deadline < now; }),
            v.end());
    it = v.empty() ? inflight_.erase(it) : std::next(it);
  }
  for (auto it = failed_targets_.begin(); it != failed_targets_.end();) {
    it = it->second < now ? failed_targets_.erase(it) : std::next(it);
  }
}

// ---- membership ----------------------------------------------------------

RegisterReply Manager::register_benefactor(const std::string& address, uint64_t free_space) {
  std::unique_lock lock(mu_);
  const TimePoint now = clock_();
  BenefactorId id;
  auto it = by_address_.find(address);
  if (it != by_address_.end()) {
    id = it->second;
  } else {
    id = next_benefactor_;
    WireWriter w;
    w.u64(id).str(address);
    log(RecordType::kRegisterBenefactor, w, true);
    apply_register(id, address);
  }
  auto& rec = benefactors_[id].record;
  rec.free_space = free_space;
  rec.last_heartbeat = now;
  rec.status = BenefactorStatus::kOnline;
  return RegisterReply{id, config_.heartbeat_interval};
}

void Manager::heartbeat(BenefactorId id, uint64_t free_space) {
  std::unique_lock lock(mu_);
  auto it = benefactors_.find(id);
  if (it == benefactors_.end()) {
    fail(ErrorCode::kUnknownBenefactor, "unknown benefactor " + std::to_string(id));
  }
  it->second.record.free_space = free_space;
  it->second.record.last_heartbeat = clock_();
  it->second.record.status = BenefactorStatus::kOnline;
}

std::vector<BenefactorRecord> Manager::list_benefactors() const {
  std::shared_lock lock(mu_);
  const TimePoint now = clock_();
  std::vector<BenefactorRecord> out;
  for (const auto& [id, b] : benefactors_) {
    BenefactorRecord r = b.record;
    r.status = online(r, now) ? BenefactorStatus::kOnline : BenefactorStatus::kOffline;
    out.push_back(std::move(r));
  }
  return out;
}

// ---- reservations --------------------------------------------------------

ReservationGrant Manager::reserve_space(const std::string& client_id, uint64_t bytes_hint,
                                        uint32_t stripe_width,
                                        std::span<const BenefactorId> exclude) {
  std::unique_lock lock(mu_);
  const TimePoint now = clock_();
  collect_expired_locked(now);

  std::vector<std::pair<uint64_t, BenefactorId>> candidates;
  for (const auto& [id, b] : benefactors_) {
    if (!online(b.record, now)) continue;
    if (std::find(exclude.begin(), exclude.end(), id) != exclude.end()) continue;
    candidates.emplace_back(allocatable(id), id);
  }
  if (candidates.empty()) fail(ErrorCode::kAllocationUnavailable, "no online benefactors");

  const size_t width = std::min<size_t>(std::max<uint32_t>(stripe_width, 1), candidates.size());
  const uint64_t share = (bytes_hint + width - 1) / width;
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  candidates.erase(std::remove_if(candidates.begin(), candidates.end(),
                                  [share](const auto& c) { return c.first == 0 || c.first < share; }),
                   candidates.end());
  if (candidates.empty()) {
    fail(ErrorCode::kAllocationUnavailable, "no online benefactor has enough free space");
  }
  candidates.resize(std::min(width, candidates.size()));

  const ReservationId rid = next_reservation_++;
  Reservation res;
  res.client_id = client_id;
  res.expiry = now + config_.reservation_ttl;
  for (const auto& [space, id] : candidates) {
    res.members.push_back(StripeMember{id, benefactors_.at(id).record.address, share});
  }
  ReservationGrant grant{rid, res.members, res.expiry};
  reservations_.emplace(rid, std::move(res));
  return grant;
}

ReservationGrant Manager::extend_reservation(ReservationId id, uint64_t additional_bytes) {
  std::unique_lock lock(mu_);
  const TimePoint now = clock_();
  collect_expired_locked(now);
  auto it = reservations_.find(id);
  if (it == reservations_.end()) {
    fail(ErrorCode::kRejected, "unknown or expired reservation " + std::to_string(id));
  }
  auto& res = it->second;
  if (!res.members.empty()) {
    const uint64_t share = (additional_bytes + res.members.size() - 1) / res.members.size();
    for (auto& m : res.members) m.reserved_bytes += share;
  }
  res.expiry = now + config_.reservation_ttl;
  return ReservationGrant{id, res.members, res.expiry};
}

void Manager::release_reservation(ReservationId id) {
  std::unique_lock lock(mu_);
  drop_reservation_locked(id);
}

size_t Manager::active_reservations() const {
  std::shared_lock lock(mu_);
  const TimePoint now = clock_();
  return static_cast<size_t>(std::count_if(reservations_.begin(), reservations_.end(),
                                           [now](const auto& r) { return r.second.expiry >= now; }));
}

std::vector<ChunkLocation> Manager::announce_chunks(ReservationId id,
                                                    std::span<const ChunkAnnouncement> chunks) {
  std::unique_lock lock(mu_);
  const TimePoint now = clock_();
  collect_expired_locked(now);
  auto it = reservations_.find(id);
  if (it == reservations_.end()) {
    fail(ErrorCode::kRejected, "unknown or expired reservation " + std::to_string(id));
  }
  auto& res = it->second;
  res.expiry = now + config_.reservation_ttl;
  std::vector<ChunkLocation> found;
  for (const auto& a : chunks) {
    if (res.announced.insert(a.id).second) ++announced_[a.id];
    auto e = chunks_.find(a.id);
    if (e != chunks_.end() && e->second.refs > 0 && !e->second.replicas.empty() &&
        e->second.length == a.length) {
      found.push_back(location_locked(a.id, e->second));
    }
  }
  return found;
}

std::vector<ChunkLocation> Manager::lookup_chunks(std::span<const ChunkId> ids) const {
  std::shared_lock lock(mu_);
  std::vector<ChunkLocation> found;
  std::unordered_set<ChunkId, ChunkIdHash> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) continue;
    auto e = chunks_.find(id);
    if (e != chunks_.end() && e->second.refs > 0 && !e->second.replicas.empty()) {
      found.push_back(location_locked(id, e->second));
    }
  }
  return found;
}

// ---- commit and read -----------------------------------------------------

CommitReply Manager::commit_chunk_map(const DatasetName& dataset, std::span<const ChunkRef> chunks,
                                      ReservationId reservation, uint32_t replication) {
  std::unique_lock lock(mu_);
  const TimePoint now = clock_();
  collect_expired_locked(now);
  if (!valid_name_component(dataset.application) || !valid_name_component(dataset.node)) {
    fail(ErrorCode::kUsage, "bad dataset name");
  }
  const Reservation* res = nullptr;
  if (reservation != 0) {
    auto it = reservations_.find(reservation);
    if (it == reservations_.end()) {
      fail(ErrorCode::kRejected, "unknown or expired reservation " + std::to_string(reservation));
    }
    res = &it->second;
  }
  const uint32_t r = replication == 0 ? config_.default_replication : replication;

  std::vector<ChunkRef> refs;
  refs.reserve(chunks.size());
  for (const auto& c : chunks) {
    if (c.length == 0) fail(ErrorCode::kMalformed, "zero-length chunk in map");
    ChunkRef ref{c.id, c.length, {}};
    for (BenefactorId b : c.replicas) {
      if (!benefactors_.count(b)) {
        fail(ErrorCode::kUnknownBenefactor, "chunk " + c.id.short_hex() +
                                                " names unknown benefactor " + std::to_string(b));
      }
      if (std::find(ref.replicas.begin(), ref.replicas.end(), b) == ref.replicas.end()) {
        ref.replicas.push_back(b);
      }
    }
    auto e = chunks_.find(c.id);
    const bool live = e != chunks_.end() && e->second.refs > 0 && !e->second.replicas.empty();
    const bool announced = res && res->announced.count(c.id);
    if (!live && !(announced && !ref.replicas.empty())) {
      fail(ErrorCode::kUnknownChunk, "chunk " + c.id.short_hex() + " is not stored");
    }
    if (e != chunks_.end() && e->second.length != c.length) {
      fail(ErrorCode::kRejected, "chunk " + c.id.short_hex() + " length mismatch");
    }
    refs.push_back(std::move(ref));
  }

  if (const auto* ds = find_dataset(dataset); ds && !ds->versions.empty()) {
    const auto& [latest, rec] = *ds->versions.rbegin();
    if (same_content(rec.chunks, refs)) {
      for (const auto& c : refs) {
        for (BenefactorId b : c.replicas) {
          if (!chunks_[c.id].holds(b)) {
            WireWriter w;
            w.id(c.id).u64(b);
            log(RecordType::kAddReplica, w, false);
          }
          add_replica_locked(c.id, b);
        }
      }
      if (reservation != 0) drop_reservation_locked(reservation);
      return CommitReply{latest, replication_state(rec)};
    }
  }

  const Version version = version_counter_[dataset.application] + 1;
  WireWriter w;
  wire::put(w, dataset);
  w.u64(version).u32(r);
  wire::put_time(w, now);
  w.list(refs, [](WireWriter& w, const ChunkRef& c) { wire::put(w, c); });
  log(RecordType::kCommit, w, true);
  apply_commit(dataset, version, r, now, refs);
  if (reservation != 0) drop_reservation_locked(reservation);

  ReplicationState state = ReplicationState::kPending;
  if (const auto* ds = find_dataset(dataset)) {
    auto it = ds->versions.find(version);
    if (it != ds->versions.end()) state = replication_state(it->second);
  }
  lifecycle_locked(now);
  return CommitReply{version, state};
}

ChunkMap Manager::get_chunk_map(const DatasetName& dataset, Version version) const {
  std::shared_lock lock(mu_);
  Version v = 0;
  const auto& rec = version_locked(dataset, version, &v);
  ChunkMap m;
  m.dataset = dataset;
  m.version = v;
  m.total_bytes = rec.total_bytes;
  m.committed_at = rec.committed_at;
  m.replication = rec.replication;
  m.replication_state = replication_state(rec);
  std::set<BenefactorId> involved;
  m.chunks.reserve(rec.chunks.size());
  for (const auto& c : rec.chunks) {
    ChunkRef ref{c.id, c.length, {}};
    auto e = chunks_.find(c.id);
    if (e != chunks_.end()) {
      for (const auto& r : e->second.replicas) {
        ref.replicas.push_back(r.id);
        involved.insert(r.id);
      }
    }
    m.chunks.push_back(std::move(ref));
  }
  for (BenefactorId b : involved) {
    auto it = benefactors_.find(b);
    if (it != benefactors_.end()) m.locations.push_back(StripeMember{b, it->second.record.address, 0});
  }
  return m;
}

// ---- replication ---------------------------------------------------------

ShadowChunkMap Manager::plan_locked(const DatasetName& d, Version v, const VersionRecord& rec,
                                    uint32_t r, TimePoint now,
                                    std::map<BenefactorId, uint64_t>& planned_bytes) {
  ShadowChunkMap plan;
  plan.dataset = d;
  plan.version = v;

  std::vector<BenefactorId> live;
  for (const auto& [id, b] : benefactors_) {
    if (online(b.record, now)) live.push_back(id);
  }
  std::unordered_set<ChunkId, ChunkIdHash> seen;
  size_t rotation = 0;
  for (const auto& c : rec.chunks) {
    if (!seen.insert(c.id).second) continue;
    auto eit = chunks_.find(c.id);
    if (eit == chunks_.end()) continue;
    const ChunkEntry& e = eit->second;
    auto fit = inflight_.find(c.id);
    const size_t pending = fit == inflight_.end() ? 0 : fit->second.size();
    const size_t have = e.replicas.size() + pending;
    if (have >= r) continue;

    std::vector<BenefactorId> sources;
    for (const auto& rep : e.replicas) {
      if (std::find(live.begin(), live.end(), rep.id) != live.end()) sources.push_back(rep.id);
    }
    if (sources.empty()) continue;

    std::vector<std::pair<uint64_t, BenefactorId>> targets;
    for (BenefactorId t : live) {
      if (e.holds(t) || inflight_to(c.id, t)) continue;
      if (failed_targets_.count({c.id, t})) continue;
      const uint64_t space = allocatable(t);
      const uint64_t used = planned_bytes[t];
      if (space < used + e.length) continue;
      targets.emplace_back(space - used, t);
    }
    std::sort(targets.begin(), targets.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const size_t need = std::min<size_t>(r - have, targets.size());
    for (size_t i = 0; i < need; ++i) {
      const BenefactorId target = targets[i].second;
      const BenefactorId source = sources[rotation++ % sources.size()];
      ReplicaAssignment a;
      a.chunk = c.id;
      a.source = source;
      a.target = target;
      a.source_address = benefactors_.at(source).record.address;
      a.target_address = benefactors_.at(target).record.address;
      a.length = e.length;
      plan.assignments.push_back(std::move(a));
      inflight_[c.id].push_back(Inflight{source, target, now + config_.replication_retry});
      planned_bytes[target] += e.length;
    }
  }
  return plan;
}

ShadowChunkMap Manager::plan_replication(const DatasetName& dataset, Version version, uint32_t r) {
  if (r == 0) fail(ErrorCode::kUsage, "replication target must be >= 1");
  std::unique_lock lock(mu_);
  const TimePoint now = clock_();
  expire_inflight_locked(now);
  Version v = 0;
  const auto& rec = version_locked(dataset, version, &v);
  if (rec.replication != r) {
    WireWriter w;
    wire::put(w, dataset);
    w.u64(v).u32(r);
    log(RecordType::kSetReplication, w, false);
    apply_set_replication(dataset, v, r);
  }
  std::map<BenefactorId, uint64_t> planned;
  return plan_locked(dataset, v, rec, r, now, planned);
}

std::optional<std::vector<ShadowChunkMap>> Manager::next_replication_batch() {
  if (replication_paused_ || queued_reservations_.load() > 0) return std::nullopt;
  std::unique_lock lock(mu_);
  const TimePoint now = clock_();
  expire_inflight_locked(now);
  std::vector<ShadowChunkMap> out;
  std::map<BenefactorId, uint64_t> planned;
  for (const auto& [app, folder] : folders_) {
    for (const auto& [key, ds] : folder.datasets) {
      for (const auto& [v, rec] : ds.versions) {
        if (replication_state(rec) == ReplicationState::kSatisfied) continue;
        DatasetName name{app, key.first, key.second};
        auto plan = plan_locked(name, v, rec, rec.replication, now, planned);
        if (!plan.assignments.empty()) out.push_back(std::move(plan));
      }
    }
  }
  return out;
}

void Manager::commit_replica(const DatasetName& dataset, Version version, const ChunkId& chunk,
                             BenefactorId benefactor) {
  std::unique_lock lock(mu_);
  auto fit = inflight_.find(chunk);
  if (fit != inflight_.end()) {
    auto& v = fit->second;
    v.erase(std::remove_if(v.begin(), v.end(),
                           [benefactor](const Inflight& f) { return f.target == benefactor; }),
            v.end());
    if (v.empty()) inflight_.erase(fit);
  }
  if (!benefactors_.count(benefactor)) {
    fail(ErrorCode::kRejected, "unknown benefactor " + std::to_string(benefactor));
  }
  Version v = 0;
  const VersionRecord* rec = nullptr;
  try {
    rec = &version_locked(dataset, version, &v);
  } catch (const Error&) {
    fail(ErrorCode::kRejected, "no live version " + dataset.str() + " v" + std::to_string(version));
  }
  const bool member = std::any_of(rec->chunks.begin(), rec->chunks.end(),
                                  [&](const ChunkRef& c) { return c.id == chunk; });
  if (!member) {
    fail(ErrorCode::kRejected, "chunk " + chunk.short_hex() + " is not part of " + dataset.str());
  }
  if (!chunks_[chunk].holds(benefactor)) {
    WireWriter w;
    w.id(chunk).u64(benefactor);
    log(RecordType::kAddReplica, w, false);
  }
  add_replica_locked(chunk, benefactor);
}

void Manager::replica_failed(const ChunkId& chunk, BenefactorId /*source*/, BenefactorId target) {
  std::unique_lock lock(mu_);
  auto fit = inflight_.find(chunk);
  if (fit != inflight_.end()) {
    auto& v = fit->second;
    v.erase(std::remove_if(v.begin(), v.end(),
                           [target](const Inflight& f) { return f.target == target; }),
            v.end());
    if (v.empty()) inflight_.erase(fit);
  }
  failed_targets_[{chunk, target}] = clock_() + config_.failed_target_backoff;
}

// ---- garbage collection --------------------------------------------------

uint64_t Manager::gc_begin(BenefactorId id) {
  std::unique_lock lock(mu_);
  if (!benefactors_.count(id)) {
    fail(ErrorCode::kUnknownBenefactor, "unknown benefactor " + std::to_string(id));
  }
  return (gc_epoch_ << kEpochShift) | (gc_seq_++ & kSeqMask);
}

std::vector<ChunkId> Manager::gc_exchange(BenefactorId id, uint64_t snapshot,
                                          std::span<const ChunkId> inventory) {
  std::unique_lock lock(mu_);
  if (!benefactors_.count(id)) {
    fail(ErrorCode::kUnknownBenefactor, "unknown benefactor " + std::to_string(id));
  }
  const TimePoint now = clock_();
  collect_expired_locked(now);
  expire_inflight_locked(now);

  // Replica records stamped at or before this sequence predate the inventory.
  uint64_t loss_limit = 0;
  if (snapshot == 0) {
    loss_limit = gc_seq_;
  } else if ((snapshot >> kEpochShift) == gc_epoch_) {
    loss_limit = snapshot & kSeqMask;
  }

  std::unordered_set<ChunkId, ChunkIdHash> held(inventory.begin(), inventory.end());
  std::vector<ChunkId> doomed;
  std::vector<ChunkId> drops;
  for (const auto& c : held) {
    auto e = chunks_.find(c);
    const bool recorded = e != chunks_.end() && e->second.holds(id);
    if (recorded && e->second.refs > 0) continue;
    if (announced_.count(c) || inflight_to(c, id)) continue;
    doomed.push_back(c);
    if (recorded) drops.push_back(c);
  }
  if (loss_limit > 0) {
    for (const auto& [c, e] : chunks_) {
      if (held.count(c)) continue;
      for (const auto& r : e.replicas) {
        if (r.id == id && r.seq <= loss_limit) {
          drops.push_back(c);
          break;
        }
      }
    }
  }
  for (const auto& c : drops) {
    WireWriter w;
    w.id(c).u64(id);
    log(RecordType::kDropReplica, w, false);
    apply_drop_replica(c, id);
  }
  std::sort(doomed.begin(), doomed.end());
  return doomed;
}

std::vector<ChunkId> Manager::live_chunks_on(BenefactorId id) const {
  std::shared_lock lock(mu_);
  std::vector<ChunkId> out;
  for (const auto& [c, e] : chunks_) {
    if (e.refs > 0 && e.holds(id)) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---- lifecycle and namespace ---------------------------------------------

void Manager::purge_locked(const DatasetName& d, Version v) {
  WireWriter w;
  wire::put(w, d);
  w.u64(v);
  log(RecordType::kPurge, w, false);
  apply_purge(d, v);
}

std::vector<PurgedVersion> Manager::lifecycle_locked(TimePoint now) {
  std::vector<PurgedVersion> purged;
  for (auto& [app, folder] : folders_) {
    if (folder.policy.mode == LifecycleMode::kReplace) {
      std::map<std::string, uint64_t> newest;  // node -> max live timestep
      for (const auto& [key, ds] : folder.datasets) {
        if (ds.versions.empty()) continue;
        auto [it, fresh] = newest.try_emplace(key.first, key.second);
        if (!fresh) it->second = std::max(it->second, key.second);
      }
      for (const auto& [key, ds] : folder.datasets) {
        if (ds.versions.empty()) continue;
        const bool keep_dataset = newest.at(key.first) == key.second;
        const Version keep = keep_dataset ? ds.versions.rbegin()->first : 0;
        for (const auto& [v, rec] : ds.versions) {
          if (v != keep) purged.push_back(PurgedVersion{DatasetName{app, key.first, key.second}, v});
        }
      }
    } else if (folder.policy.mode == LifecycleMode::kPurge) {
      for (const auto& [key, ds] : folder.datasets) {
        for (const auto& [v, rec] : ds.versions) {
          if (rec.committed_at + folder.policy.purge_after < now) {
            purged.push_back(PurgedVersion{DatasetName{app, key.first, key.second}, v});
          }
        }
      }
    }
  }
  for (const auto& p : purged) purge_locked(p.dataset, p.version);
  if (!purged.empty() && journal_) journal_->sync();
  return purged;
}

std::vector<PurgedVersion> Manager::apply_lifecycle() {
  std::unique_lock lock(mu_);
  return lifecycle_locked(clock_());
}

uint32_t Manager::delete_dataset(const DatasetName& dataset) {
  std::unique_lock lock(mu_);
  if (!find_dataset(dataset)) fail(ErrorCode::kNotFound, "no such dataset: " + dataset.str());
  WireWriter w;
  wire::put(w, dataset);
  log(RecordType::kDeleteDataset, w, true);
  return apply_delete_dataset(dataset);
}

uint32_t Manager::delete_folder(const std::string& application) {
  std::unique_lock lock(mu_);
  if (!find_folder(application)) fail(ErrorCode::kNotFound, "no such application: " + application);
  WireWriter w;
  w.str(application);
  log(RecordType::kDeleteFolder, w, true);
  return apply_delete_folder(application);
}

std::vector<PurgedVersion> Manager::set_policy(const std::string& application,
                                               const LifecyclePolicy& policy) {
  if (!valid_name_component(application)) fail(ErrorCode::kUsage, "bad application name");
  if (policy.mode == LifecycleMode::kPurge && policy.purge_after.count() <= 0) {
    fail(ErrorCode::kUsage, "purge mode needs a positive purge_after");
  }
  std::unique_lock lock(mu_);
  WireWriter w;
  w.str(application);
  wire::put(w, policy);
  log(RecordType::kSetPolicy, w, true);
  apply_policy(application, policy);
  return lifecycle_locked(clock_());
}

NamespaceListing Manager::list_namespace(const std::string& prefix) const {
  std::shared_lock lock(mu_);
  NamespaceListing out;
  for (const auto& [app, folder] : folders_) {
    const bool folder_match = prefix.empty() || app.starts_with(prefix) ||
                              (app + ".").starts_with(prefix);
    FolderInfo info;
    info.application = app;
    info.policy = folder.policy;
    for (const auto& [key, ds] : folder.datasets) {
      if (ds.versions.empty()) continue;
      DatasetName name{app, key.first, key.second};
      const std::string s = name.str();
      if (!prefix.empty() && !s.starts_with(prefix) && !app.starts_with(prefix)) continue;
      DatasetInfo di;
      di.name = name;
      for (const auto& [v, rec] : ds.versions) {
        di.versions.push_back(VersionInfo{v, rec.total_bytes, rec.chunks.size(), rec.committed_at,
                                          rec.replication, replication_state(rec)});
      }
      info.datasets.push_back(std::move(di));
    }
    if (folder_match || !info.datasets.empty()) out.folders.push_back(std::move(info));
  }
  return out;
}

}  // namespace ckpool
