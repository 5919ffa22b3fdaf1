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

#include "ckpool/wire.hpp"

#include "ckpool/error.hpp"
#include "ckpool/protocol.hpp"

namespace ckpool {

namespace op {

std::string_view name(uint8_t opcode) {
  switch (opcode & ~kReplyBit) {
    case kPing: return "ping";
    case kRegisterBenefactor: return "register-benefactor";
    case kHeartbeat: return "heartbeat";
    case kReserveSpace: return "reserve-space";
    case kExtendReservation: return "extend-reservation";
    case kReleaseReservation: return "release-reservation";
    case kAnnounceChunks: return "announce-chunks";
    case kLookupChunks: return "lookup-chunks";
    case kCommitChunkMap: return "commit-chunk-map";
    case kGetChunkMap: return "get-chunk-map";
    case kPlanReplication: return "plan-replication";
    case kCommitReplica: return "commit-replica";
    case kGcBegin: return "gc-begin";
    case kGcExchange: return "gc-exchange";
    case kApplyLifecycle: return "apply-lifecycle";
    case kDeleteDataset: return "delete-dataset";
    case kListNamespace: return "list-namespace";
    case kSetPolicy: return "set-policy";
    case kListBenefactors: return "list-benefactors";
    case kReplicaFailed: return "replica-failed";
    case kSetReplicationPaused: return "set-replication-paused";
    case kPutChunk: return "put-chunk";
    case kGetChunk: return "get-chunk";
    case kDeleteChunks: return "delete-chunks";
    case kInventory: return "inventory";
    case kReplicateTo: return "replicate-to";
    case kRunGcRound: return "run-gc-round";
    case kDrain: return "drain";
    case kStoreStats: return "store-stats";
    case kScrub: return "scrub";
    default: return "unknown";
  }
}

}  // namespace op

std::vector<uint8_t> encode_frame(const Frame& frame) {
  const uint64_t length = 1 + 8 + frame.payload.size();
  if (length > kMaxFrameLength) fail(ErrorCode::kUsage, "frame too large");
  WireWriter w;
  w.bytes().reserve(4 + length);
  w.u32(static_cast<uint32_t>(length)).u8(frame.opcode).u64(frame.request_id);
  auto out = w.take();
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

WireWriter& WireWriter::u8(uint8_t v) {
  buf_.push_back(v);
  return *this;
}

WireWriter& WireWriter::u16(uint16_t v) {
  buf_.push_back(static_cast<uint8_t>(v >> 8));
  buf_.push_back(static_cast<uint8_t>(v));
  return *this;
}

WireWriter& WireWriter::u32(uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) buf_.push_back(static_cast<uint8_t>(v >> shift));
  return *this;
}

WireWriter& WireWriter::u64(uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) buf_.push_back(static_cast<uint8_t>(v >> shift));
  return *this;
}

WireWriter& WireWriter::str(std::string_view s) {
  if (s.size() > 0xFFFF) fail(ErrorCode::kUsage, "string too long for wire encoding");
  u16(static_cast<uint16_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
  return *this;
}

WireWriter& WireWriter::id(const ChunkId& id) {
  buf_.insert(buf_.end(), id.bytes().begin(), id.bytes().end());
  return *this;
}

WireWriter& WireWriter::blob(std::span<const uint8_t> bytes) {
  if (bytes.size() > kMaxFrameLength) fail(ErrorCode::kUsage, "blob too large");
  u32(static_cast<uint32_t>(bytes.size()));
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
  return *this;
}

WireWriter& WireWriter::count(size_t n) {
  if (n > 0xFFFFFFFFu) fail(ErrorCode::kUsage, "list too long");
  return u32(static_cast<uint32_t>(n));
}

std::span<const uint8_t> WireReader::take(size_t n) {
  if (n > remaining()) fail(ErrorCode::kMalformed, "truncated message");
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

uint8_t WireReader::u8() { return take(1)[0]; }

uint16_t WireReader::u16() {
  const auto b = take(2);
  return static_cast<uint16_t>(b[0] << 8 | b[1]);
}

uint32_t WireReader::u32() {
  const auto b = take(4);
  uint32_t v = 0;
  for (uint8_t x : b) v = v << 8 | x;
  return v;
}

uint64_t WireReader::u64() {
  const auto b = take(8);
  uint64_t v = 0;
  for (uint8_t x : b) v = v << 8 | x;
  return v;
}

std::string WireReader::str() {
  const auto b = take(u16());
  return std::string(b.begin(), b.end());
}

ChunkId WireReader::id() { return ChunkId::from_bytes(take(ChunkId::kSize)); }

std::span<const uint8_t> WireReader::blob() { return take(u32()); }

std::vector<uint8_t> WireReader::blob_copy() {
  const auto b = blob();
  return {b.begin(), b.end()};
}

size_t WireReader::count(size_t min_element_size) {
  const size_t n = u32();
  if (min_element_size > 0 && n > remaining() / min_element_size) {
    fail(ErrorCode::kMalformed, "list count exceeds message size");
  }
  return n;
}

void WireReader::expect_end() const {
  if (remaining() != 0) fail(ErrorCode::kMalformed, "trailing bytes in message");
}

}  // namespace ckpool
