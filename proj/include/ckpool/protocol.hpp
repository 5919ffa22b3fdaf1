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

#include <cstdint>
#include <string_view>

// Opcodes shared by every component. A request's successful reply carries
// `opcode | kReplyBit`; failures are answered with kErrorReply whose payload
// is u16 error code followed by a message string.
namespace ckpool::op {

inline constexpr uint8_t kReplyBit = 0x80;
inline constexpr uint8_t kErrorReply = 0xFF;

// Manager.
inline constexpr uint8_t kPing = 0x01;
inline constexpr uint8_t kRegisterBenefactor = 0x02;
inline constexpr uint8_t kHeartbeat = 0x03;
inline constexpr uint8_t kReserveSpace = 0x04;
inline constexpr uint8_t kExtendReservation = 0x05;
inline constexpr uint8_t kReleaseReservation = 0x06;
inline constexpr uint8_t kAnnounceChunks = 0x07;
inline constexpr uint8_t kLookupChunks = 0x08;
inline constexpr uint8_t kCommitChunkMap = 0x09;
inline constexpr uint8_t kGetChunkMap = 0x0A;
inline constexpr uint8_t kPlanReplication = 0x0B;
inline constexpr uint8_t kCommitReplica = 0x0C;
inline constexpr uint8_t kGcBegin = 0x0D;
inline constexpr uint8_t kGcExchange = 0x0E;
inline constexpr uint8_t kApplyLifecycle = 0x0F;
inline constexpr uint8_t kDeleteDataset = 0x10;
inline constexpr uint8_t kListNamespace = 0x11;
inline constexpr uint8_t kSetPolicy = 0x12;
inline constexpr uint8_t kListBenefactors = 0x13;
inline constexpr uint8_t kReplicaFailed = 0x14;
inline constexpr uint8_t kSetReplicationPaused = 0x15;

// Benefactor.
inline constexpr uint8_t kPutChunk = 0x40;
inline constexpr uint8_t kGetChunk = 0x41;
inline constexpr uint8_t kDeleteChunks = 0x42;
inline constexpr uint8_t kInventory = 0x43;
inline constexpr uint8_t kReplicateTo = 0x44;
inline constexpr uint8_t kRunGcRound = 0x45;
inline constexpr uint8_t kDrain = 0x46;
inline constexpr uint8_t kStoreStats = 0x47;
inline constexpr uint8_t kScrub = 0x48;

std::string_view name(uint8_t opcode);

}  // namespace ckpool::op
