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

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "ckpool/benefactor.hpp"
#include "ckpool/chunk_store.hpp"
#include "ckpool/chunking.hpp"
#include "ckpool/error.hpp"
#include "ckpool/manager_server.hpp"
#include "ckpool/work_queue.hpp"
#include "oracles.hpp"

using namespace ckpool;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> n{0};
    path_ = fs::temp_directory_path() /
            ("ckpool-bt-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::vector<uint8_t> payload(size_t n, uint64_t seed) { return oracle::random_data(n, seed); }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

}  // namespace

TEST(ChunkStore, PutGetRoundTripAndLayout) {
  TempDir dir;
  ChunkStore store(dir.path(), 64 << 20);
  const auto data = payload(1 << 20, 1);
  const auto id = content_address(data);
  EXPECT_TRUE(store.put(id, data));
  EXPECT_EQ(store.get(id), data);
  const auto hex = id.hex();
  EXPECT_EQ(store.path_for(id),
            dir.path() / "chunks" / hex.substr(0, 2) / hex.substr(2, 2) / hex);
  EXPECT_TRUE(fs::exists(store.path_for(id)));
  EXPECT_EQ(store.used_bytes(), data.size());
  EXPECT_FALSE(store.put(id, data));
  EXPECT_EQ(store.used_bytes(), data.size());
  EXPECT_EQ(store.scan_disk_bytes(), store.used_bytes());
}

TEST(ChunkStore, TamperedPayloadIsRejected) {
  TempDir dir;
  ChunkStore store(dir.path(), 64 << 20);
  auto data = payload(4096, 2);
  const auto id = content_address(data);
  data[100] ^= 1;
  EXPECT_EQ(code_of([&] { store.put(id, data); }), ErrorCode::kIntegrity);
  EXPECT_FALSE(store.contains(id));
  EXPECT_EQ(store.used_bytes(), 0u);
  EXPECT_EQ(code_of([&] { store.get(id); }), ErrorCode::kNotFound);
}

TEST(ChunkStore, CapacityIsEnforced) {
  TempDir dir;
  ChunkStore store(dir.path(), 10000);
  const auto a = payload(6000, 3), b = payload(6000, 4);
  store.put(content_address(a), a);
  EXPECT_EQ(code_of([&] { store.put(content_address(b), b); }), ErrorCode::kNoSpace);
  EXPECT_EQ(store.free_bytes(), 4000u);
}

TEST(ChunkStore, CorruptFileIsQuarantined) {
  TempDir dir;
  ChunkStore store(dir.path(), 1 << 20);
  const auto data = payload(5000, 5);
  const auto id = content_address(data);
  store.put(id, data);
  {
    std::fstream f(store.path_for(id), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(2500);
    f.put('x');
  }
  EXPECT_EQ(code_of([&] { store.get(id); }), ErrorCode::kIntegrity);
  EXPECT_TRUE(store.inventory().empty());
  EXPECT_EQ(store.quarantined(), 1u);
  EXPECT_EQ(store.used_bytes(), 0u);
  EXPECT_TRUE(fs::exists(dir.path() / "quarantine"));
}

TEST(ChunkStore, ScrubFindsSilentCorruption) {
  TempDir dir;
  ChunkStore store(dir.path(), 1 << 20);
  std::vector<ChunkId> ids;
  for (int i = 0; i < 4; ++i) {
    const auto d = payload(1000, 10 + i);
    ids.push_back(content_address(d));
    store.put(ids.back(), d);
  }
  {
    std::fstream f(store.path_for(ids[2]), std::ios::in | std::ios::out | std::ios::binary);
    f.put('!');
  }
  EXPECT_EQ(store.scrub(), 1u);
  EXPECT_EQ(store.inventory().size(), 3u);
}

TEST(ChunkStore, DeleteCountsAndInventory) {
  TempDir dir;
  ChunkStore store(dir.path(), 1 << 20);
  std::vector<ChunkId> ids;
  for (int i = 0; i < 10; ++i) {
    const auto d = payload(100 + i, 20 + i);
    ids.push_back(content_address(d));
    store.put(ids.back(), d);
  }
  auto inv = store.inventory();
  EXPECT_EQ(std::set<ChunkId>(inv.begin(), inv.end()), std::set<ChunkId>(ids.begin(), ids.end()));
  EXPECT_EQ(store.remove(std::vector<ChunkId>{}), 0u);
  EXPECT_EQ(store.remove(std::vector<ChunkId>(ids.begin(), ids.begin() + 4)), 4u);
  EXPECT_EQ(store.inventory().size(), 6u);
  const std::vector<ChunkId> mixed{ids[4], ids[5], ids[6], ids[0], ids[1]};
  EXPECT_EQ(store.remove(mixed), 3u);
  EXPECT_EQ(store.scan_disk_bytes(), store.used_bytes());
}

TEST(ChunkStore, RestartRescansAndDropsTempFiles) {
  TempDir dir;
  const auto d = payload(3000, 30);
  const auto id = content_address(d);
  {
    ChunkStore store(dir.path(), 1 << 20);
    store.put(id, d);
  }
  std::ofstream(dir.path() / "tmp" / "half.partial") << "partial";
  ChunkStore again(dir.path(), 1 << 20);
  EXPECT_TRUE(again.contains(id));
  EXPECT_EQ(again.used_bytes(), d.size());
  EXPECT_TRUE(fs::is_empty(dir.path() / "tmp"));
}

TEST(ChunkStore, EveryStoredFileHashesToItsName) {
  TempDir dir;
  ChunkStore store(dir.path(), 8 << 20);
  for (int i = 0; i < 50; ++i) {
    const auto d = payload(1 + i * 397, 40 + i);
    store.put(content_address(d), d);
  }
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir.path() / "chunks")) {
    if (!e.is_regular_file()) continue;
    std::ifstream f(e.path(), std::ios::binary);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), {});
    EXPECT_EQ(content_address(bytes).hex(), e.path().filename().string());
    ++files;
  }
  EXPECT_EQ(files, 50);
}

TEST(ChunkStore, RemoveUntouchedSparesRacingPut) {
  TempDir dir;
  ChunkStore store(dir.path(), 1 << 20);
  const auto a = payload(200, 50), b = payload(200, 51);
  const auto ia = content_address(a), ib = content_address(b);
  store.put(ia, a);
  store.put(ib, b);
  const uint64_t gen = store.generation();
  store.put(ib, b);  // re-put after the inventory was read
  EXPECT_EQ(store.remove_untouched(std::vector<ChunkId>{ia, ib}, gen), 1u);
  EXPECT_FALSE(store.contains(ia));
  EXPECT_TRUE(store.contains(ib));
}

TEST(ChunkStore, ConcurrentPutGetNeverSeesPartialChunk) {
  TempDir dir;
  ChunkStore store(dir.path(), 256 << 20);
  std::vector<std::vector<uint8_t>> data;
  std::vector<ChunkId> ids;
  for (int i = 0; i < 40; ++i) {
    data.push_back(payload(256 * 1024, 60 + i));
    ids.push_back(content_address(data.back()));
  }
  std::atomic<int> bad{0};
  std::atomic<bool> done{false};
  std::thread writer([&] {
    for (int round = 0; round < 3; ++round) {
      for (size_t i = 0; i < ids.size(); ++i) store.put(ids[i], data[i]);
      if (round < 2) store.remove(ids);
    }
    done = true;
  });
  std::vector<std::thread> readers;
  for (int t = 0; t < 3; ++t) {
    readers.emplace_back([&, t] {
      std::mt19937 rng(t);
      while (!done) {
        const size_t i = rng() % ids.size();
        try {
          if (store.get(ids[i]) != data[i]) ++bad;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kNotFound) ++bad;
        }
      }
    });
  }
  writer.join();
  for (auto& r : readers) r.join();
  EXPECT_EQ(bad.load(), 0);
  EXPECT_EQ(store.quarantined(), 0u);
}

TEST(WorkQueue, ClientLaneIsDrainedFirst) {
  PriorityWorkQueue q(1, 1);
  std::mutex mu;
  std::vector<int> order;
  q.pause();
  for (int i = 0; i < 3; ++i) {
    q.submit(PriorityWorkQueue::Lane::kReplication, [&, i] {
      std::lock_guard l(mu);
      order.push_back(100 + i);
    });
  }
  for (int i = 0; i < 3; ++i) {
    q.submit(PriorityWorkQueue::Lane::kClient, [&, i] {
      std::lock_guard l(mu);
      order.push_back(i);
    });
  }
  q.resume();
  q.run(PriorityWorkQueue::Lane::kReplication, [] {}).get();
  EXPECT_EQ(order, (std::vector<int>{0, 1, 2, 100, 101, 102}));
}

TEST(WorkQueue, ReplicationSlotsAreBounded) {
  PriorityWorkQueue q(4, 1);
  std::atomic<int> running{0}, peak{0};
  std::vector<std::future<void>> fs;
  for (int i = 0; i < 8; ++i) {
    fs.push_back(q.run(PriorityWorkQueue::Lane::kReplication, [&] {
      const int now = ++running;
      int p = peak.load();
      while (now > p && !peak.compare_exchange_weak(p, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --running;
    }));
  }
  // Client work still flows while replication occupies its slot.
  EXPECT_EQ(q.run(PriorityWorkQueue::Lane::kClient, [] { return 7; }).get(), 7);
  for (auto& f : fs) f.get();
  EXPECT_EQ(peak.load(), 1);
}

namespace {

class Node : public ::testing::Test {
 protected:
  void SetUp() override {
    ManagerConfig mc;
    mc.listen = "127.0.0.1:0";
    mc.heartbeat_interval = Millis(200);
    mc.replication_interval = Millis(50);
    server_ = std::make_unique<ManagerServer>(mc);
    server_->start();
    for (int i = 0; i < 3; ++i) add_benefactor();
  }
  void TearDown() override {
    bens_.clear();
    server_.reset();
  }

  Benefactor& add_benefactor() {
    BenefactorConfig bc;
    bc.manager_address = server_->address();
    bc.root = dir_.path() / ("b" + std::to_string(bens_.size()));
    bc.capacity = 64 << 20;
    bc.heartbeat_interval = Millis(200);
    bc.gc_interval = Millis(0);
    bens_.push_back(std::make_unique<Benefactor>(bc));
    bens_.back()->start();
    return *bens_.back();
  }

  // Stores a chunk on bens_[b] and commits a one-chunk dataset.
  ChunkId commit_one(const DatasetName& d, size_t b, uint64_t seed, uint32_t r = 1) {
    const auto data = payload(10000, seed);
    const auto id = content_address(data);
    auto& m = server_->manager();
    const auto grant = m.reserve_space("t", data.size(), 1);
    const ChunkAnnouncement a{id, data.size()};
    m.announce_chunks(grant.id, std::span(&a, 1));
    BenefactorClient bc;
    bc.put_chunk(bens_[b]->address(), id, data);
    const ChunkRef ref{id, data.size(), {bens_[b]->id()}};
    m.commit_chunk_map(d, std::span(&ref, 1), grant.id, r);
    return id;
  }

  TempDir dir_;
  std::unique_ptr<ManagerServer> server_;
  std::vector<std::unique_ptr<Benefactor>> bens_;
};

}  // namespace

TEST_F(Node, RegistersWithManager) {
  EXPECT_EQ(server_->manager().list_benefactors().size(), 3u);
  for (const auto& b : bens_) EXPECT_NE(b->id(), 0u);
}

TEST_F(Node, ServesChunksOverTheWire) {
  BenefactorClient bc;
  const auto data = payload(1 << 20, 70);
  const auto id = content_address(data);
  EXPECT_TRUE(bc.put_chunk(bens_[0]->address(), id, data));
  EXPECT_FALSE(bc.put_chunk(bens_[0]->address(), id, data));
  EXPECT_EQ(bc.get_chunk(bens_[0]->address(), id), data);
  EXPECT_EQ(code_of([&] { bc.get_chunk(bens_[1]->address(), id); }), ErrorCode::kNotFound);
  auto bad = data;
  bad[0] ^= 1;
  EXPECT_EQ(code_of([&] { bc.put_chunk(bens_[1]->address(), id, bad); }), ErrorCode::kIntegrity);
  EXPECT_EQ(bc.inventory(bens_[0]->address()), std::vector<ChunkId>{id});
  EXPECT_EQ(bc.delete_chunks(bens_[0]->address(), std::vector<ChunkId>{id, ChunkId{}}), 1u);
  const auto stats = bc.store_stats(bens_[0]->address());
  EXPECT_EQ(stats.chunk_count, 0u);
  EXPECT_EQ(stats.id, bens_[0]->id());
}

TEST_F(Node, DrainRejectsWritesButServesReads) {
  BenefactorClient bc;
  const auto data = payload(500, 71);
  const auto id = content_address(data);
  bc.put_chunk(bens_[0]->address(), id, data);
  bc.drain(bens_[0]->address(), true);
  const auto other = payload(500, 72);
  EXPECT_EQ(code_of([&] { bc.put_chunk(bens_[0]->address(), content_address(other), other); }),
            ErrorCode::kDraining);
  EXPECT_EQ(bc.get_chunk(bens_[0]->address(), id), data);
  bc.drain(bens_[0]->address(), false);
  EXPECT_TRUE(bc.put_chunk(bens_[0]->address(), content_address(other), other));
}

TEST_F(Node, ReplicateToLiveTargetCommitsReplica) {
  server_->manager().set_replication_paused(true);
  const DatasetName d{"A", "n", 1};
  const auto id = commit_one(d, 0, 80, 2);
  auto plan = server_->manager().plan_replication(d, 0, 2);
  ASSERT_EQ(plan.assignments.size(), 1u);
  BenefactorClient bc;
  const auto res = bc.replicate_to(bens_[0]->address(), plan, true);
  ASSERT_EQ(res.size(), 1u);
  EXPECT_TRUE(res[0].ok) << res[0].reason;
  const auto target = plan.assignments[0].target_address;
  EXPECT_EQ(bc.inventory(target), std::vector<ChunkId>{id});
  EXPECT_EQ(server_->manager().get_chunk_map(d).replication_state, ReplicationState::kSatisfied);
}

TEST_F(Node, ReplicateFailuresAreReported) {
  server_->manager().set_replication_paused(true);
  const DatasetName d{"A", "n", 1};
  const auto id = commit_one(d, 0, 81, 2);
  ShadowChunkMap plan{d, 1, {}};
  ReplicaAssignment a;
  a.chunk = id;
  a.source = bens_[0]->id();
  a.target = bens_[2]->id();
  a.target_address = "127.0.0.1:1";  // nothing listens here
  a.length = 10000;
  plan.assignments.push_back(a);
  ReplicaAssignment missing = a;
  missing.chunk = ChunkId{};
  plan.assignments.push_back(missing);
  BenefactorClient bc;
  const auto res = bc.replicate_to(bens_[0]->address(), plan, true);
  ASSERT_EQ(res.size(), 2u);
  int source_missing = 0, unreachable = 0;
  for (const auto& r : res) {
    EXPECT_FALSE(r.ok);
    if (r.reason == "source-missing") ++source_missing; else ++unreachable;
  }
  EXPECT_EQ(source_missing, 1);
  EXPECT_EQ(unreachable, 1);
}

TEST_F(Node, BackgroundReplicationSatisfiesTarget) {
  const DatasetName d{"A", "n", 1};
  commit_one(d, 1, 82, 3);
  for (int i = 0; i < 200; ++i) {
    if (server_->manager().get_chunk_map(d).replication_state == ReplicationState::kSatisfied) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(25));
  }
  const auto m = server_->manager().get_chunk_map(d);
  EXPECT_EQ(m.replication_state, ReplicationState::kSatisfied);
  EXPECT_EQ(m.chunks[0].replicas.size(), 3u);
}

TEST_F(Node, GcRoundDeletesOrphansOnly) {
  server_->manager().set_replication_paused(true);
  const DatasetName keep{"A", "n", 1}, drop{"A", "n", 2};
  const auto kept = commit_one(keep, 0, 90);
  commit_one(drop, 0, 91);
  EXPECT_EQ(bens_[0]->run_gc_round(), 0u);
  server_->manager().delete_dataset(drop);
  EXPECT_EQ(bens_[0]->run_gc_round(), 1u);
  EXPECT_EQ(bens_[0]->store().inventory(), std::vector<ChunkId>{kept});
  EXPECT_EQ(bens_[0]->run_gc_round(), 0u);
}

TEST_F(Node, GcPreservesInflightSessionChunks) {
  auto& m = server_->manager();
  const auto grant = m.reserve_space("t", 100, 1);
  const auto data = payload(100, 92);
  const auto id = content_address(data);
  const ChunkAnnouncement a{id, data.size()};
  m.announce_chunks(grant.id, std::span(&a, 1));
  BenefactorClient bc;
  bc.put_chunk(bens_[0]->address(), id, data);
  EXPECT_EQ(bens_[0]->run_gc_round(), 0u);
  const ChunkRef ref{id, data.size(), {bens_[0]->id()}};
  m.commit_chunk_map(DatasetName{"A", "n", 1}, std::span(&ref, 1), grant.id, 1);
  EXPECT_EQ(bens_[0]->run_gc_round(), 0u);
  EXPECT_TRUE(bens_[0]->store().contains(id));
}

TEST_F(Node, CorruptChunkIsReplicatedElsewhere) {
  const DatasetName d{"A", "n", 1};
  const auto id = commit_one(d, 0, 93, 2);
  for (int i = 0; i < 200; ++i) {
    if (server_->manager().get_chunk_map(d).replication_state == ReplicationState::kSatisfied) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(25));
  }
  ASSERT_EQ(server_->manager().get_chunk_map(d).chunks[0].replicas.size(), 2u);
  const auto holders = server_->manager().get_chunk_map(d).chunks[0].replicas;
  Benefactor* victim = nullptr;
  for (auto& b : bens_) {
    if (b->id() == holders[0]) victim = b.get();
  }
  ASSERT_NE(victim, nullptr);
  {
    std::fstream f(victim->store().path_for(id), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(10);
    f.put('z');
  }
  BenefactorClient bc;
  EXPECT_EQ(code_of([&] { bc.get_chunk(victim->address(), id); }), ErrorCode::kIntegrity);
  // Checked before the GC round: repair may legitimately land back on the
  // victim as soon as the manager learns of the loss.
  EXPECT_FALSE(victim->store().contains(id));
  victim->run_gc_round();
  ChunkMap m;
  for (int i = 0; i < 200; ++i) {
    m = server_->manager().get_chunk_map(d);
    if (m.replication_state == ReplicationState::kSatisfied) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(25));
  }
  ASSERT_EQ(m.replication_state, ReplicationState::kSatisfied);
  ASSERT_EQ(m.chunks[0].replicas.size(), 2u);
  // Every recorded holder serves an intact copy, wherever the repair landed.
  for (auto r : m.chunks[0].replicas) {
    EXPECT_EQ(content_address(bc.get_chunk(*m.address_of(r), id)), id);
  }
}
