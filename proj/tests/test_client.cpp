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

#include <filesystem>
#include <fstream>
#include <set>

#include "ckpool/client.hpp"
#include "ckpool/error.hpp"
#include "ckpool/harness/cluster.hpp"
#include "ckpool/harness/workload.hpp"

using namespace ckpool;
using harness::LocalCluster;

namespace {

std::unique_ptr<LocalCluster> make_cluster(uint32_t n) {
  harness::ClusterOptions o;
  o.benefactors = n;
  o.capacity = 2ULL << 30;
  o.heartbeat_interval = Millis(200);
  return LocalCluster::up(o);
}

WritePolicy policy(WriteProtocol p, uint32_t stripe = 4) {
  WritePolicy w;
  w.protocol = p;
  w.stripe_width = stripe;
  w.buffer_bytes = 8 * kMiB;
  w.temp_file_limit = 4 * kMiB;
  w.sync_temp_files = false;
  return w;
}

CommitResult write_all(Client& c, const DatasetName& d, const WritePolicy& p,
                       std::span<const uint8_t> data, size_t piece = 1 << 20) {
  auto s = c.open_write(d, p);
  for (size_t off = 0; off < data.size(); off += piece) {
    s->write(data.subspan(off, std::min(piece, data.size() - off)));
  }
  return s->close_commit();
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

const WriteProtocol kProtocols[] = {WriteProtocol::kCompleteLocal, WriteProtocol::kIncremental,
                                    WriteProtocol::kSlidingWindow};

}  // namespace

class Shared : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { cluster_ = make_cluster(4).release(); }
  static void TearDownTestSuite() {
    delete cluster_;
    cluster_ = nullptr;
  }
  void SetUp() override { client_ = cluster_->client(); }

  DatasetName fresh(const std::string& app = "app") {
    static int n = 0;
    return DatasetName{app, "node", static_cast<uint64_t>(n++)};
  }

  static LocalCluster* cluster_;
  std::unique_ptr<Client> client_;
};
LocalCluster* Shared::cluster_ = nullptr;

TEST_F(Shared, RoundTripEveryProtocolAndSemantics) {
  const auto data = harness::random_bytes(6 * kMiB + 12345, 1);
  for (auto proto : kProtocols) {
    for (auto sem : {CommitSemantics::kOptimistic, CommitSemantics::kPessimistic}) {
      auto p = policy(proto);
      p.semantics = sem;
      p.replication = sem == CommitSemantics::kPessimistic ? 2 : 1;
      const auto d = fresh();
      const auto r = write_all(*client_, d, p, data, 7777);
      EXPECT_EQ(r.metrics.bytes_logical, data.size());
      EXPECT_EQ(client_->open_read(d)->read_all(), data)
          << protocol_name(proto) << "/" << semantics_name(sem);
      if (sem == CommitSemantics::kPessimistic) {
        EXPECT_EQ(r.replication_state, ReplicationState::kSatisfied);
      }
    }
  }
}

TEST_F(Shared, SmallWritesCoalesceIntoChunks) {
  const auto data = harness::random_bytes(4 * kMiB, 2);
  auto r = write_all(*client_, fresh(), policy(WriteProtocol::kSlidingWindow), data, 1024);
  EXPECT_EQ(r.metrics.chunks, 4u);
  const auto ten = harness::random_bytes(10 * kMiB, 3);
  r = write_all(*client_, fresh(), policy(WriteProtocol::kSlidingWindow), ten, ten.size());
  EXPECT_EQ(r.metrics.chunks, 10u);
}

TEST_F(Shared, WriteAfterCloseIsUsageError) {
  auto s = client_->open_write(fresh(), policy(WriteProtocol::kSlidingWindow));
  const auto data = harness::random_bytes(100, 4);
  s->write(data);
  s->close_commit();
  EXPECT_EQ(s->state(), SessionState::kCommitted);
  EXPECT_EQ(code_of([&] { s->write(data); }), ErrorCode::kUsage);
  EXPECT_EQ(code_of([&] { s->close_commit(); }), ErrorCode::kUsage);
}

TEST_F(Shared, RoundRobinSpreadsChunksEvenly) {
  const auto data = harness::random_bytes(10 * kMiB + 1, 5);
  for (auto proto : kProtocols) {
    for (uint32_t w : {1u, 2u, 3u, 4u}) {
      auto s = client_->open_write(fresh(), policy(proto, w));
      s->write(data);
      s->close_commit();
      const auto per = s->chunks_per_member();
      ASSERT_EQ(s->stripe().size(), w);
      uint64_t total = 0;
      for (const auto& [id, n] : per) {
        total += n;
        EXPECT_TRUE(n == 11 / w || n == (11 + w - 1) / w) << n << " chunks with width " << w;
      }
      EXPECT_EQ(total, 11u);
    }
  }
}

TEST_F(Shared, DegradedStripeUsesWhatIsOnline) {
  auto s = client_->open_write(fresh(), policy(WriteProtocol::kSlidingWindow, 8));
  EXPECT_EQ(s->stripe().size(), 4u);
  s->abort();
}

TEST_F(Shared, OnlyFileProtocolsTouchLocalDisk) {
  const auto data = harness::random_bytes(9 * kMiB, 6);
  for (auto proto : kProtocols) {
    const auto r = write_all(*client_, fresh(), policy(proto), data);
    if (proto == WriteProtocol::kSlidingWindow) {
      EXPECT_EQ(r.metrics.temp_bytes, 0u);
    } else {
      EXPECT_EQ(r.metrics.temp_bytes, data.size()) << protocol_name(proto);
    }
  }
}

TEST_F(Shared, DedupSkipsStoredChunks) {
  const auto d = fresh("dedup");
  auto p = policy(WriteProtocol::kSlidingWindow);
  harness::WorkloadSpec spec;
  spec.image_size = 16 * kMiB;
  spec.mutation_fraction = 0.25;
  spec.seed = 77;
  spec.versions = 2;
  harness::VersionGenerator gen(spec);
  const auto v1 = *gen.next();
  const auto v2 = *gen.next();

  auto off = write_all(*client_, d, p, v1);
  EXPECT_EQ(off.metrics.bytes_uploaded, off.metrics.bytes_logical);
  p.dedup = DedupMode::kFsch;
  const auto same = write_all(*client_, d, p, v1);
  EXPECT_EQ(same.metrics.bytes_uploaded, 0u);
  const auto changed = write_all(*client_, d, p, v2);
  EXPECT_EQ(changed.metrics.bytes_uploaded, 4 * kMiB);
  EXPECT_EQ(client_->open_read(d)->read_all(), v2);
}

TEST_F(Shared, OptimisticReplicatesInBackground) {
  auto p = policy(WriteProtocol::kSlidingWindow, 1);
  p.replication = 2;
  const auto d = fresh();
  const auto r = write_all(*client_, d, p, harness::random_bytes(3 * kMiB, 8));
  EXPECT_EQ(r.replication_state, ReplicationState::kPending);
  EXPECT_TRUE(client_->await_replication(d, r.version, Millis(20000)));
  for (const auto& c : client_->open_read(d)->map().chunks) EXPECT_EQ(c.replicas.size(), 2u);
}

TEST_F(Shared, PessimisticWaitsForReplicas) {
  auto p = policy(WriteProtocol::kIncremental, 2);
  p.semantics = CommitSemantics::kPessimistic;
  p.replication = 2;
  const auto d = fresh();
  const auto r = write_all(*client_, d, p, harness::random_bytes(5 * kMiB, 9));
  EXPECT_EQ(r.replication_state, ReplicationState::kSatisfied);
  EXPECT_TRUE(r.metrics.fully_stored);
  EXPECT_GE(r.metrics.oab, r.metrics.asb);
  for (const auto& c : client_->manager().get_chunk_map(d).chunks) {
    EXPECT_EQ(std::set<BenefactorId>(c.replicas.begin(), c.replicas.end()).size(), 2u);
  }
}

TEST_F(Shared, ReadPastEndAndPartialReads) {
  const auto data = harness::random_bytes(2 * kMiB + 5, 10);
  const auto d = fresh();
  write_all(*client_, d, policy(WriteProtocol::kSlidingWindow), data);
  auto h = client_->open_read(d);
  EXPECT_EQ(h->size(), data.size());
  const auto head = h->read(1000);
  EXPECT_TRUE(std::equal(head.begin(), head.end(), data.begin()));
  const auto rest = h->read(10 * kMiB);
  EXPECT_EQ(rest.size(), data.size() - 1000);
  EXPECT_TRUE(h->read(10).empty());
  EXPECT_EQ(h->position(), data.size());
}

TEST_F(Shared, RestartFetchPicksLatestAndFallsBack) {
  const auto dir = cluster_->work_dir() / "fetch";
  std::filesystem::create_directories(dir);
  const auto read_file = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::vector<uint8_t>((std::istreambuf_iterator<char>(f)), {});
  };
  std::vector<std::vector<uint8_t>> versions;
  for (int v = 0; v < 3; ++v) {
    versions.push_back(harness::random_bytes(kMiB + v, 20 + v));
    write_all(*client_, DatasetName{"rf", "n", 1}, policy(WriteProtocol::kSlidingWindow),
              versions.back());
  }
  EXPECT_EQ(client_->restart_fetch("rf.n.1", dir / "a"), (DatasetName{"rf", "n", 1}));
  EXPECT_EQ(read_file(dir / "a"), versions[2]);
  EXPECT_EQ(code_of([&] { client_->restart_fetch("nope.n.1", dir / "b"); }), ErrorCode::kNotFound);

  client_->manager().set_policy("rfr", LifecyclePolicy{LifecycleMode::kReplace, Millis(0)});
  const auto t2 = harness::random_bytes(kMiB, 30);
  write_all(*client_, DatasetName{"rfr", "n", 2}, policy(WriteProtocol::kSlidingWindow), t2);
  write_all(*client_, DatasetName{"rfr", "n", 1}, policy(WriteProtocol::kSlidingWindow),
            harness::random_bytes(kMiB, 31));
  EXPECT_EQ(client_->restart_fetch("rfr.n.1", dir / "c"), (DatasetName{"rfr", "n", 2}));
  EXPECT_EQ(read_file(dir / "c"), t2);
  EXPECT_EQ(client_->restart_fetch("rfr.n", dir / "d"), (DatasetName{"rfr", "n", 2}));
}

TEST_F(Shared, MetricsAreConsistent) {
  for (auto proto : kProtocols) {
    auto p = policy(proto);
    const auto r = write_all(*client_, fresh(), p, harness::random_bytes(4 * kMiB, 40));
    auto m = r.metrics;
    EXPECT_GT(m.oab, 0.0);
    EXPECT_LE(m.bytes_uploaded, m.bytes_logical);
    if (m.fully_stored) {
      EXPECT_GE(m.open_to_stored_s, m.open_to_close_s);
      EXPECT_GE(m.oab, m.asb);
    }
  }
}

TEST(ClientNoCluster, ManagerDownFailsOpen) {
  Client c("127.0.0.1:1", ClientOptions{"c", Millis(2000), 2, Millis(10)});
  EXPECT_EQ(code_of([&] { c.open_write(DatasetName{"a", "n", 1}, WritePolicy{}); }),
            ErrorCode::kUnavailable);
}

TEST(ClientPolicy, ValidationAndParsing) {
  WritePolicy p;
  p.buffer_bytes = p.chunk_size;
  EXPECT_THROW(p.validate(), Error);
  p = WritePolicy{};
  p.stripe_width = 0;
  EXPECT_THROW(p.validate(), Error);
  auto kv = KeyValueConfig::parse(
      "protocol = incremental\nsemantics = pessimistic\nstripe_width = 2\nreplication = 3\n"
      "dedup = fsch\n");
  const auto q = WritePolicy::from(kv);
  EXPECT_EQ(q.protocol, WriteProtocol::kIncremental);
  EXPECT_EQ(q.semantics, CommitSemantics::kPessimistic);
  EXPECT_EQ(q.stripe_width, 2u);
  EXPECT_EQ(q.replication, 3u);
  EXPECT_EQ(q.dedup, DedupMode::kFsch);
}

TEST(ClientFaults, PessimisticWithTooFewNodesTimesOutOrDowngrades) {
  auto cluster = make_cluster(1);
  auto c = cluster->client();
  auto p = policy(WriteProtocol::kSlidingWindow, 1);
  p.semantics = CommitSemantics::kPessimistic;
  p.replication = 2;
  p.pessimistic_timeout = Millis(800);
  const auto data = harness::random_bytes(kMiB, 50);
  const DatasetName d{"pt", "n", 1};
  EXPECT_EQ(code_of([&] { write_all(*c, d, p, data); }), ErrorCode::kTimeout);
  p.downgrade_on_timeout = true;
  const auto r = write_all(*c, DatasetName{"pt", "n", 2}, p, data);
  EXPECT_TRUE(r.downgraded);
  EXPECT_EQ(r.replication_state, ReplicationState::kPending);
  EXPECT_EQ(c->open_read(DatasetName{"pt", "n", 2})->read_all(), data);
}

TEST(ClientFaults, ReadFailsOverToSurvivingReplica) {
  auto cluster = make_cluster(3);
  auto c = cluster->client();
  auto p = policy(WriteProtocol::kSlidingWindow, 3);
  p.semantics = CommitSemantics::kPessimistic;
  p.replication = 2;
  const auto data = harness::random_bytes(6 * kMiB, 60);
  const DatasetName d{"fo", "n", 1};
  write_all(*c, d, p, data);
  auto h = c->open_read(d);
  auto first = h->read(kMiB);
  cluster->kill_benefactor(0);
  auto rest = h->read_all();
  first.insert(first.end(), rest.begin(), rest.end());
  EXPECT_EQ(first, data);
}

TEST(ClientFaults, StripeMemberLossIsReplaced) {
  auto cluster = make_cluster(4);
  auto c = cluster->client(ClientOptions{"c", Millis(3000), 2, Millis(10)});
  for (auto proto : kProtocols) {
    auto p = policy(proto, 2);
    const auto data = harness::random_bytes(12 * kMiB, 70);
    const DatasetName d{"rep", protocol_name(proto).data(), 1};
    auto s = c->open_write(d, p);
    s->write(std::span(data).first(2 * kMiB));
    const auto victim = cluster->index_of(s->stripe()[0].id);
    ASSERT_TRUE(victim.has_value());
    cluster->kill_benefactor(*victim);
    s->write(std::span(data).subspan(2 * kMiB));
    const auto r = s->close_commit();
    EXPECT_GT(r.version, 0u);
    EXPECT_EQ(c->open_read(d)->read_all(), data) << protocol_name(proto);
    cluster->restart_benefactor(*victim);
    cluster->wait_online(4, Millis(10000));
  }
}

TEST(ClientFaults, OptimisticLossIsReportedNotSilent) {
  auto cluster = make_cluster(3);
  auto c = cluster->client(ClientOptions{"c", Millis(3000), 2, Millis(10)});
  cluster->manager().set_replication_paused(true);
  auto p = policy(WriteProtocol::kSlidingWindow, 1);
  p.replication = 2;
  const DatasetName d{"loss", "n", 1};
  write_all(*c, d, p, harness::random_bytes(2 * kMiB, 80));
  const auto holder = cluster->index_of(c->manager().get_chunk_map(d).chunks[0].replicas[0]);
  ASSERT_TRUE(holder.has_value());
  cluster->kill_benefactor(*holder);
  EXPECT_EQ(c->manager().get_chunk_map(d).replication_state, ReplicationState::kPending);
  auto h = c->open_read(d);
  try {
    h->read_all();
    FAIL() << "read of a lost version succeeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnavailable);
    EXPECT_NE(std::string(e.what()).find(d.str()), std::string::npos);
  }
}
