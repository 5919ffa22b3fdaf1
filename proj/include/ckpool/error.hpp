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
#include <stdexcept>
#include <string>
#include <string_view>

namespace ckpool {

// Error categories. The numeric values travel on the wire in error replies,
// so never renumber an existing entry.
enum class ErrorCode : uint16_t {
  kOk = 0,
  kNotFound = 1,
  kPurged = 2,
  kIntegrity = 3,
  kNoSpace = 4,
  kAllocationUnavailable = 5,
  kUnknownChunk = 6,
  kUnknownBenefactor = 7,
  kUnknownOpcode = 8,
  kMalformed = 9,
  kRejected = 10,
  kUsage = 11,
  kIo = 12,
  kUnavailable = 13,
  kTimeout = 14,
  kSessionFailed = 15,
  kDraining = 16,
  kInternal = 17,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

// Process exit status for a failure category; used by the CLI tools.
int exit_code_for(ErrorCode code);

}  // namespace ckpool
