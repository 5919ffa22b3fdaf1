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

#include "ckpool/messages.hpp"

#include "ckpool/error.hpp"

namespace ckpool::wire {

void put(WireWriter& w, const DatasetName& d) { w.str(d.str()); }

DatasetName get_dataset(WireReader& r) {
  const std::string s = r.str();
  auto d = DatasetName::parse(s);
  if (!d) fail(ErrorCode::kMalformed, "bad dataset name on the wire: " + s);
  return *d;
}

void put(WireWriter& w, const LifecyclePolicy& p) {
  w.u8(static_cast<uint8_t>(p.mode)).u64(static_cast<uint64_t>(p.purge_after.count()));
}

LifecyclePolicy get_policy(WireReader& r) {
  const uint8_t mode = r.u8();
  if (mode > static_cast<uint8_t>(LifecycleMode::kPurge)) {
    fail(ErrorCode::kMalformed, "bad lifecycle mode");
  }
  LifecyclePolicy p;
  p.mode = static_cast<LifecycleMode>(mode);
  p.purge_after = Millis(static_cast<int64_t>(r.u64()));
  return p;
}

void put(WireWriter& w, const StripeMember& m) {
  w.u64(m.id).str(m.address).u64(m.reserved_bytes);
}

StripeMember get_member(WireReader& r) {
  StripeMember m;
  m.id = r.u64();
  m.address = r.str();
  m.reserved_bytes = r.u64();
  return m;
}

void put(WireWriter& w, const ReservationGrant& g) {
  w.u64(g.id);
  put_time(w, g.expiry);
  w.list(g.members, [](WireWriter& w, const StripeMember& m) { put(w, m); });
}

ReservationGrant get_grant(WireReader& r) {
  ReservationGrant g;
  g.id = r.u64();
  g.expiry = get_time(r);
  g.members = r.list<StripeMember>(get_member, 18);
  return g;
}

void put(WireWriter& w, const ChunkRef& c) {
  w.id(c.id).u64(c.length);
  w.list(c.replicas, [](WireWriter& w, BenefactorId b) { w.u64(b); });
}

ChunkRef get_chunk_ref(WireReader& r) {
  ChunkRef c;
  c.id = r.id();
  c.length = r.u64();
  c.replicas = r.list<BenefactorId>([](WireReader& r) { return r.u64(); }, 8);
  return c;
}

void put(WireWriter& w, const ChunkMap& m) {
  put(w, m.dataset);
  w.u64(m.version).u64(m.total_bytes);
  put_time(w, m.committed_at);
  w.u32(m.replication).u8(static_cast<uint8_t>(m.replication_state));
  w.list(m.chunks, [](WireWriter& w, const ChunkRef& c) { put(w, c); });
  w.list(m.locations, [](WireWriter& w, const StripeMember& s) { put(w, s); });
}

ChunkMap get_chunk_map(WireReader& r) {
  ChunkMap m;
  m.dataset = get_dataset(r);
  m.version = r.u64();
  m.total_bytes = r.u64();
  m.committed_at = get_time(r);
  m.replication = r.u32();
  m.replication_state = r.u8() ? ReplicationState::kSatisfied : ReplicationState::kPending;
  m.chunks = r.list<ChunkRef>(get_chunk_ref, 44);
  m.locations = r.list<StripeMember>(get_member, 18);
  return m;
}

void put(WireWriter& w, const ChunkLocation& l) {
  w.id(l.id).u64(l.length);
  w.list(l.replicas, [](WireWriter& w, const StripeMember& s) { put(w, s); });
}

ChunkLocation get_location(WireReader& r) {
  ChunkLocation l;
  l.id = r.id();
  l.length = r.u64();
  l.replicas = r.list<StripeMember>(get_member, 18);
  return l;
}

void put(WireWriter& w, const ChunkAnnouncement& a) { w.id(a.id).u64(a.length); }

ChunkAnnouncement get_announcement(WireReader& r) {
  ChunkAnnouncement a;
  a.id = r.id();
  a.length = r.u64();
  return a;
}

void put(WireWriter& w, const ReplicaAssignment& a) {
  w.id(a.chunk).u64(a.source).u64(a.target).str(a.source_address).str(a.target_address).u64(a.length);
}

ReplicaAssignment get_assignment(WireReader& r) {
  ReplicaAssignment a;
  a.chunk = r.id();
  a.source = r.u64();
  a.target = r.u64();
  a.source_address = r.str();
  a.target_address = r.str();
  a.length = r.u64();
  return a;
}

void put(WireWriter& w, const ShadowChunkMap& s) {
  put(w, s.dataset);
  w.u64(s.version);
  w.list(s.assignments, [](WireWriter& w, const ReplicaAssignment& a) { put(w, a); });
}

ShadowChunkMap get_shadow(WireReader& r) {
  ShadowChunkMap s;
  s.dataset = get_dataset(r);
  s.version = r.u64();
  s.assignments = r.list<ReplicaAssignment>(get_assignment, 60);
  return s;
}

void put(WireWriter& w, const BenefactorRecord& b) {
  w.u64(b.id).str(b.address).u64(b.free_space);
  put_time(w, b.last_heartbeat);
  w.u8(static_cast<uint8_t>(b.status));
}

BenefactorRecord get_benefactor(WireReader& r) {
  BenefactorRecord b;
  b.id = r.u64();
  b.address = r.str();
  b.free_space = r.u64();
  b.last_heartbeat = get_time(r);
  b.status = r.u8() ? BenefactorStatus::kOffline : BenefactorStatus::kOnline;
  return b;
}

void put(WireWriter& w, const NamespaceListing& l) {
  w.list(l.folders, [](WireWriter& w, const FolderInfo& f) {
    w.str(f.application);
    put(w, f.policy);
    w.list(f.datasets, [](WireWriter& w, const DatasetInfo& d) {
      put(w, d.name);
      w.list(d.versions, [](WireWriter& w, const VersionInfo& v) {
        w.u64(v.version).u64(v.total_bytes).u64(v.chunk_count);
        put_time(w, v.committed_at);
        w.u32(v.replication).u8(static_cast<uint8_t>(v.replication_state));
      });
    });
  });
}

NamespaceListing get_listing(WireReader& r) {
  NamespaceListing l;
  l.folders = r.list<FolderInfo>([](WireReader& r) {
    FolderInfo f;
    f.application = r.str();
    f.policy = get_policy(r);
    f.datasets = r.list<DatasetInfo>([](WireReader& r) {
      DatasetInfo d;
      d.name = get_dataset(r);
      d.versions = r.list<VersionInfo>([](WireReader& r) {
        VersionInfo v;
        v.version = r.u64();
        v.total_bytes = r.u64();
        v.chunk_count = r.u64();
        v.committed_at = get_time(r);
        v.replication = r.u32();
        v.replication_state = r.u8() ? ReplicationState::kSatisfied : ReplicationState::kPending;
        return v;
      }, 37);
      return d;
    }, 6);
    return f;
  }, 15);
  return l;
}

void put(WireWriter& w, const PurgedVersion& p) {
  put(w, p.dataset);
  w.u64(p.version);
}

PurgedVersion get_purged(WireReader& r) {
  PurgedVersion p;
  p.dataset = get_dataset(r);
  p.version = r.u64();
  return p;
}

void put_ids(WireWriter& w, std::span<const ChunkId> ids) {
  w.count(ids.size());
  for (const auto& id : ids) w.id(id);
}

std::vector<ChunkId> get_ids(WireReader& r) {
  return r.list<ChunkId>([](WireReader& r) { return r.id(); }, ChunkId::kSize);
}

}  // namespace ckpool::wire
