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

#include "ckpool/error.hpp"

namespace ckpool {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kPurged: return "purged";
    case ErrorCode::kIntegrity: return "integrity";
    case ErrorCode::kNoSpace: return "no-space";
    case ErrorCode::kAllocationUnavailable: return "allocation-unavailable";
    case ErrorCode::kUnknownChunk: return "unknown-chunk";
    case ErrorCode::kUnknownBenefactor: return "unknown-benefactor";
    case ErrorCode::kUnknownOpcode: return "unknown-opcode";
    case ErrorCode::kMalformed: return "malformed";
    case ErrorCode::kRejected: return "rejected";
    case ErrorCode::kUsage: return "usage";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kUnavailable: return "unavailable";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kSessionFailed: return "session-failed";
    case ErrorCode::kDraining: return "draining";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return 0;
    case ErrorCode::kUsage: return 2;
    case ErrorCode::kNotFound:
    case ErrorCode::kPurged: return 3;
    case ErrorCode::kUnavailable:
    case ErrorCode::kTimeout:
    case ErrorCode::kAllocationUnavailable: return 4;
    case ErrorCode::kIntegrity: return 5;
    case ErrorCode::kIo:
    case ErrorCode::kNoSpace: return 6;
    default: return 1;
  }
}

}  // namespace ckpool
