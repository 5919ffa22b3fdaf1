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

// Randomized histories against an in-process manager. A brute-force model
// tracks which benefactor physically holds which chunk, which placements were
// reported in commits, and which versions are live; after every event the
// manager must agree with it exactly.

#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "ckpool/chunking.hpp"
#include "ckpool/error.hpp"
#include "ckpool/manager.hpp"

namespace ckpool::model {

struct HistoryOptions {
  int events = 60;
  int benefactors = 3;
  int universe = 10;
  bool crashes = true;
  bool losses = true;
};

struct HistoryResult {
  int gc_exchanges = 0;
  int restarts = 0;
  int commits = 0;
  int purges = 0;
  int mismatches = 0;
  uint64_t orphan_bytes = 0;
  std::string first_failure;
  bool ok() const { return mismatches == 0 && orphan_bytes == 0; }
};

inline const char* kApps[] = {"keep", "rep", "pur"};
inline constexpr Millis kPurgeAfter{50};

class GcHistory {
 public:
  GcHistory(uint64_t seed, std::filesystem::path dir, HistoryOptions opt)
      : rng_(seed), dir_(std::move(dir)), opt_(opt) {
    std::filesystem::create_directories(dir_);
    journal_ = dir_ / ("journal-" + std::to_string(seed));
    std::filesystem::remove(journal_);
    now_ = TimePoint(Millis(1'700'000'000'000LL));
    cfg_.journal = journal_.string();
    cfg_.journal_fsync = false;
    start_manager();
    for (int b = 0; b < opt_.benefactors; ++b) {
      ids_.push_back(mgr_->register_benefactor("b" + std::to_string(b) + ":1", uint64_t{1} << 40).id);
    }
    physical_.resize(opt_.benefactors);
    mgr_->set_policy("rep", LifecyclePolicy{LifecycleMode::kReplace, Millis(0)});
    mgr_->set_policy("pur", LifecyclePolicy{LifecycleMode::kPurge, kPurgeAfter});
    for (int c = 0; c < opt_.universe; ++c) {
      const std::string tag = "chunk-" + std::to_string(c);
      chunk_ids_.push_back(content_address(
          {reinterpret_cast<const uint8_t*>(tag.data()), tag.size()}));
      lengths_.push_back(1000 + 17 * c);
    }
  }

  ~GcHistory() {
    mgr_.reset();
    std::error_code ec;
    std::filesystem::remove(journal_, ec);
  }

  HistoryResult run() {
    for (int e = 0; e < opt_.events && result_.mismatches == 0; ++e) {
      step();
      check_namespace();
    }
    quiesce();
    return result_;
  }

 private:
  using Key = std::tuple<std::string, std::string, uint64_t>;
  struct OVersion {
    Version v;
    std::vector<int> chunks;
    TimePoint at;
  };
  struct Session {
    ReservationId rid;
    DatasetName name;
    std::vector<int> chunks;
    std::vector<std::vector<BenefactorId>> replicas;
  };

  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }

  void start_manager() {
    mgr_.reset();
    mgr_ = std::make_unique<Manager>(cfg_, [this] { return now_; });
  }

  void mismatch(const std::string& what) {
    if (result_.mismatches++ == 0) result_.first_failure = what;
  }

  int index_of(BenefactorId id) const {
    return static_cast<int>(std::find(ids_.begin(), ids_.end(), id) - ids_.begin());
  }

  bool live(int c) const {
    for (const auto& [k, vs] : versions_) {
      for (const auto& v : vs) {
        if (std::count(v.chunks.begin(), v.chunks.end(), c)) return true;
      }
    }
    return false;
  }
  bool reported_anywhere(int c) const {
    for (const auto& [key, tick] : reported_) {
      if (key.first == c) return true;
    }
    return false;
  }
  bool announced(int c) const {
    for (const auto& s : sessions_) {
      if (std::count(s.chunks.begin(), s.chunks.end(), c)) return true;
    }
    return false;
  }
  std::vector<BenefactorId> replicas_of(int c) const {
    std::vector<BenefactorId> out;
    for (const auto& [key, tick] : reported_) {
      if (key.first == c) out.push_back(ids_[key.second]);
    }
    return out;
  }

  std::vector<ChunkRef> refs_of(const std::vector<int>& chunks,
                                const std::vector<std::vector<BenefactorId>>& reps) const {
    std::vector<ChunkRef> out;
    for (size_t i = 0; i < chunks.size(); ++i) {
      out.push_back(ChunkRef{chunk_ids_[chunks[i]], lengths_[chunks[i]], reps[i]});
    }
    return out;
  }

  DatasetName random_name() {
    return DatasetName{kApps[pick(3)], "n" + std::to_string(pick(2)),
                       static_cast<uint64_t>(pick(4))};
  }

  void heartbeat_all() {
    for (auto id : ids_) mgr_->heartbeat(id, uint64_t{1} << 40);
  }

  // ---- the model's lifecycle rules ---------------------------------------

  using PurgeKey = std::tuple<std::string, std::string, uint64_t, Version>;
  static PurgeKey purge_key(const PurgedVersion& p) {
    return {p.dataset.application, p.dataset.node, p.dataset.timestep, p.version};
  }

  std::set<PurgeKey> lifecycle(TimePoint now) {
    std::set<PurgeKey> purged;
    std::map<std::pair<std::string, std::string>, uint64_t> newest;
    for (const auto& [k, vs] : versions_) {
      if (vs.empty() || std::get<0>(k) != "rep") continue;
      auto node = std::make_pair(std::get<0>(k), std::get<1>(k));
      auto [it, fresh] = newest.try_emplace(node, std::get<2>(k));
      if (!fresh) it->second = std::max(it->second, std::get<2>(k));
    }
    for (auto& [k, vs] : versions_) {
      const auto& [app, node, ts] = k;
      const DatasetName name{app, node, ts};
      std::vector<OVersion> kept;
      for (size_t i = 0; i < vs.size(); ++i) {
        bool drop = false;
        if (app == "rep") {
          drop = newest.at({app, node}) != ts || i + 1 != vs.size();
        } else if (app == "pur") {
          drop = vs[i].at + kPurgeAfter < now;
        }
        if (drop) {
          purged.insert(purge_key(PurgedVersion{name, vs[i].v}));
        } else {
          kept.push_back(vs[i]);
        }
      }
      vs = std::move(kept);
    }
    result_.purges += static_cast<int>(purged.size());
    return purged;
  }

  // ---- events --------------------------------------------------------------

  void step() {
    ++tick_;
    const int r = pick(100);
    if (r < 20) {
      if (sessions_.size() < 2) open_session();
    } else if (r < 38) {
      if (!sessions_.empty()) commit_session(pick(static_cast<int>(sessions_.size())));
    } else if (r < 42) {
      if (!sessions_.empty()) abort_session(pick(static_cast<int>(sessions_.size())));
    } else if (r < 48) {
      cow_commit();
    } else if (r < 54) {
      delete_random();
    } else if (r < 62) {
      now_ += Millis(pick(40));
      if (coin(0.5)) run_lifecycle();
    } else if (r < 82) {
      gc(pick(opt_.benefactors), false);
    } else if (r < 88) {
      gc(pick(opt_.benefactors), true);
    } else if (r < 94) {
      if (opt_.losses) lose_chunk();
    } else {
      if (opt_.crashes) restart();
    }
  }

  void open_session() {
    heartbeat_all();
    Session s;
    s.name = random_name();
    const auto grant = mgr_->reserve_space("model", 4096, 1 + pick(opt_.benefactors));
    s.rid = grant.id;
    const int n = 1 + pick(4);
    for (int i = 0; i < n; ++i) {
      const int c = pick(opt_.universe);
      const ChunkAnnouncement a{chunk_ids_[c], lengths_[c]};
      const auto found = mgr_->announce_chunks(s.rid, std::span(&a, 1));
      const bool expect_found = live(c) && reported_anywhere(c);
      if (found.empty() == expect_found) {
        mismatch("announce of chunk " + std::to_string(c) + " disagrees with the model");
      }
      s.chunks.push_back(c);
      if (!found.empty() && coin(0.5)) {
        std::vector<BenefactorId> reps;
        for (const auto& m : found.front().replicas) reps.push_back(m.id);
        s.replicas.push_back(reps);
      } else {
        const auto& m = grant.members[i % grant.members.size()];
        physical_[index_of(m.id)].insert(c);
        s.replicas.push_back({m.id});
      }
    }
    sessions_.push_back(std::move(s));
  }

  void record_commit(const DatasetName& name, const std::vector<int>& chunks,
                     const std::vector<std::vector<BenefactorId>>& reps, Version got) {
    ++result_.commits;
    for (size_t i = 0; i < chunks.size(); ++i) {
      for (auto b : reps[i]) reported_[{chunks[i], index_of(b)}] = tick_;
    }
    auto& vs = versions_[Key{name.application, name.node, name.timestep}];
    if (!vs.empty() && vs.back().chunks == chunks) {
      if (got != vs.back().v) mismatch("idempotent commit returned a new version");
    } else {
      const Version expect = ++counters_[name.application];
      if (got != expect) {
        mismatch("commit of " + name.str() + " got v" + std::to_string(got) + ", model v" +
                 std::to_string(expect));
        counters_[name.application] = got;
      }
      vs.push_back(OVersion{got, chunks, now_});
      lifecycle(now_);
    }
  }

  void commit_session(int i) {
    Session s = sessions_[i];
    sessions_.erase(sessions_.begin() + i);
    const auto refs = refs_of(s.chunks, s.replicas);
    try {
      const auto reply = mgr_->commit_chunk_map(s.name, refs, s.rid, 1);
      record_commit(s.name, s.chunks, s.replicas, reply.version);
    } catch (const Error& e) {
      mismatch(std::string("session commit rejected: ") + e.what());
    }
  }

  void abort_session(int i) {
    mgr_->release_reservation(sessions_[i].rid);
    sessions_.erase(sessions_.begin() + i);
  }

  void cow_commit() {
    std::vector<const OVersion*> all;
    for (const auto& [k, vs] : versions_) {
      for (const auto& v : vs) all.push_back(&v);
    }
    if (all.empty()) return;
    const OVersion src = *all[pick(static_cast<int>(all.size()))];
    std::vector<std::vector<BenefactorId>> reps;
    bool expect_ok = true;
    for (int c : src.chunks) {
      reps.push_back(replicas_of(c));
      if (reps.back().empty()) expect_ok = false;
    }
    const DatasetName name = random_name();
    try {
      const auto reply = mgr_->commit_chunk_map(name, refs_of(src.chunks, reps), 0, 1);
      if (!expect_ok) mismatch("commit of an unstored chunk accepted");
      record_commit(name, src.chunks, reps, reply.version);
    } catch (const Error& e) {
      if (expect_ok || e.code() != ErrorCode::kUnknownChunk) {
        mismatch(std::string("copy-on-write commit rejected: ") + e.what());
      }
    }
  }

  void delete_random() {
    std::vector<Key> keys;
    for (const auto& [k, vs] : versions_) {
      if (!vs.empty()) keys.push_back(k);
    }
    if (keys.empty()) return;
    const Key k = keys[pick(static_cast<int>(keys.size()))];
    mgr_->delete_dataset(DatasetName{std::get<0>(k), std::get<1>(k), std::get<2>(k)});
    versions_.erase(k);
  }

  void run_lifecycle() {
    const auto got = mgr_->apply_lifecycle();
    const auto expect = lifecycle(now_);
    std::set<PurgeKey> got_set;
    for (const auto& p : got) got_set.insert(purge_key(p));
    if (got_set != expect) mismatch("lifecycle sweep purged a different set");
  }

  void gc(int b, bool split) {
    heartbeat_all();
    const uint64_t snapshot = mgr_->gc_begin(ids_[b]);
    const uint64_t snap_tick = tick_++;
    const std::set<int> inventory = physical_[b];
    if (split) {
      // A whole session lands between the inventory and the exchange.
      open_session();
      commit_session(static_cast<int>(sessions_.size()) - 1);
    }
    std::vector<ChunkId> inv;
    for (int c : inventory) inv.push_back(chunk_ids_[c]);
    const auto doomed = mgr_->gc_exchange(ids_[b], snapshot, inv);
    ++result_.gc_exchanges;

    std::set<ChunkId> expect;
    for (int c : inventory) {
      const bool keep = live(c) && reported_.count({c, b});
      if (!keep && !announced(c)) expect.insert(chunk_ids_[c]);
    }
    const std::set<ChunkId> got(doomed.begin(), doomed.end());
    if (got != expect) {
      std::ostringstream os;
      os << "gc on benefactor " << b << " returned " << got.size() << " chunks, model "
         << expect.size();
      mismatch(os.str());
    }
    for (int c = 0; c < opt_.universe; ++c) {
      if (expect.count(chunk_ids_[c])) {
        physical_[b].erase(c);
        reported_.erase({c, b});
      } else if (!inventory.count(c)) {
        auto it = reported_.find({c, b});
        if (it != reported_.end() && it->second <= snap_tick) reported_.erase(it);
      }
    }
  }

  void lose_chunk() {
    const int b = pick(opt_.benefactors);
    if (physical_[b].empty()) return;
    auto it = physical_[b].begin();
    std::advance(it, pick(static_cast<int>(physical_[b].size())));
    physical_[b].erase(it);
  }

  void restart() {
    ++result_.restarts;
    start_manager();
    sessions_.clear();
    heartbeat_all();
  }

  // ---- checks --------------------------------------------------------------

  void check_namespace() {
    std::map<Key, std::vector<Version>> got, expect;
    for (const auto& f : mgr_->list_namespace().folders) {
      for (const auto& d : f.datasets) {
        auto& vs = got[Key{d.name.application, d.name.node, d.name.timestep}];
        for (const auto& v : d.versions) vs.push_back(v.version);
      }
    }
    for (const auto& [k, vs] : versions_) {
      if (vs.empty()) continue;
      auto& out = expect[k];
      for (const auto& v : vs) out.push_back(v.v);
    }
    if (got != expect) mismatch("namespace listing disagrees with the model");
  }

  void quiesce() {
    while (!sessions_.empty()) abort_session(0);
    for (int round = 0; round < 2; ++round) {
      for (int b = 0; b < opt_.benefactors; ++b) gc(b, false);
    }
    for (int b = 0; b < opt_.benefactors; ++b) {
      for (int c : physical_[b]) {
        if (!(live(c) && reported_.count({c, b}))) result_.orphan_bytes += lengths_[c];
      }
      const auto held = mgr_->live_chunks_on(ids_[b]);
      for (const auto& id : held) {
        const int c = static_cast<int>(std::find(chunk_ids_.begin(), chunk_ids_.end(), id) -
                                       chunk_ids_.begin());
        if (!reported_.count({c, b})) mismatch("manager records a placement the model lacks");
      }
    }
  }

  std::mt19937_64 rng_;
  std::filesystem::path dir_;
  std::filesystem::path journal_;
  HistoryOptions opt_;
  ManagerConfig cfg_;
  TimePoint now_;
  std::unique_ptr<Manager> mgr_;
  HistoryResult result_;
  uint64_t tick_ = 0;

  std::vector<BenefactorId> ids_;
  std::vector<ChunkId> chunk_ids_;
  std::vector<uint64_t> lengths_;
  std::vector<std::set<int>> physical_;
  std::map<std::pair<int, int>, uint64_t> reported_;  // (chunk, benefactor) -> tick
  std::map<Key, std::vector<OVersion>> versions_;
  std::map<std::string, Version> counters_;
  std::vector<Session> sessions_;
};

inline HistoryResult run_gc_history(uint64_t seed, const std::filesystem::path& dir,
                                    HistoryOptions opt = {}) {
  return GcHistory(seed, dir, opt).run();
}

}  // namespace ckpool::model
