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

#pragma once

#include "ckpool/types.hpp"
#include "ckpool/wire.hpp"

// Wire encodings of the shared domain types. Each put_X has a matching
// get_X; the journal reuses them for its records.
namespace ckpool::wire {

void put(WireWriter& w, const DatasetName& d);
DatasetName get_dataset(WireReader& r);

void put(WireWriter& w, const LifecyclePolicy& p);
LifecyclePolicy get_policy(WireReader& r);

void put(WireWriter& w, const StripeMember& m);
StripeMember get_member(WireReader& r);

void put(WireWriter& w, const ReservationGrant& g);
ReservationGrant get_grant(WireReader& r);

void put(WireWriter& w, const ChunkRef& c);
ChunkRef get_chunk_ref(WireReader& r);

void put(WireWriter& w, const ChunkMap& m);
ChunkMap get_chunk_map(WireReader& r);

void put(WireWriter& w, const ChunkLocation& l);
ChunkLocation get_location(WireReader& r);

void put(WireWriter& w, const ChunkAnnouncement& a);
ChunkAnnouncement get_announcement(WireReader& r);

void put(WireWriter& w, const ReplicaAssignment& a);
ReplicaAssignment get_assignment(WireReader& r);

void put(WireWriter& w, const ShadowChunkMap& s);
ShadowChunkMap get_shadow(WireReader& r);

void put(WireWriter& w, const BenefactorRecord& b);
BenefactorRecord get_benefactor(WireReader& r);

void put(WireWriter& w, const NamespaceListing& l);
NamespaceListing get_listing(WireReader& r);

void put(WireWriter& w, const PurgedVersion& p);
PurgedVersion get_purged(WireReader& r);

void put_ids(WireWriter& w, std::span<const ChunkId> ids);
std::vector<ChunkId> get_ids(WireReader& r);

inline void put_time(WireWriter& w, TimePoint t) {
  w.u64(static_cast<uint64_t>(t.time_since_epoch().count()));
}
inline TimePoint get_time(WireReader& r) {
  return TimePoint(Millis(static_cast<int64_t>(r.u64())));
}

}  // namespace ckpool::wire
