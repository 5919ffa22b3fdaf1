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

#include "ckpool/types.hpp"

#include <charconv>

#include "ckpool/error.hpp"

namespace ckpool {

bool valid_name_component(std::string_view s) {
  if (s.empty() || s.size() > 255) return false;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (c == '.' || c == '/' || u < 0x20 || u == 0x7f) return false;
  }
  return true;
}

std::string DatasetName::str() const {
  return application + "." + node + "." + std::to_string(timestep);
}

std::optional<DatasetName> DatasetName::parse(std::string_view text) {
  const size_t first = text.find('.');
  if (first == std::string_view::npos) return std::nullopt;
  const size_t second = text.find('.', first + 1);
  if (second == std::string_view::npos) return std::nullopt;
  if (text.find('.', second + 1) != std::string_view::npos) return std::nullopt;

  DatasetName out;
  out.application = std::string(text.substr(0, first));
  out.node = std::string(text.substr(first + 1, second - first - 1));
  const std::string_view ts = text.substr(second + 1);
  if (!valid_name_component(out.application) || !valid_name_component(out.node)) {
    return std::nullopt;
  }
  // Canonical decimal only, so parse(str(x)) == x and str(parse(s)) == s.
  if (ts.empty() || (ts.size() > 1 && ts[0] == '0')) return std::nullopt;
  const auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), out.timestep);
  if (ec != std::errc() || ptr != ts.data() + ts.size()) return std::nullopt;
  return out;
}

DatasetName DatasetName::must_parse(std::string_view text) {
  auto parsed = parse(text);
  if (!parsed) {
    fail(ErrorCode::kUsage,
         "bad dataset name '" + std::string(text) + "' (expected APP.NODE.TIMESTEP)");
  }
  return *parsed;
}

std::string_view lifecycle_mode_name(LifecycleMode mode) {
  switch (mode) {
    case LifecycleMode::kNone: return "none";
    case LifecycleMode::kReplace: return "replace";
    case LifecycleMode::kPurge: return "purge";
  }
  return "none";
}

std::optional<LifecycleMode> parse_lifecycle_mode(std::string_view text) {
  if (text == "none") return LifecycleMode::kNone;
  if (text == "replace") return LifecycleMode::kReplace;
  if (text == "purge") return LifecycleMode::kPurge;
  return std::nullopt;
}

std::string_view replication_state_name(ReplicationState s) {
  return s == ReplicationState::kSatisfied ? "satisfied" : "pending";
}

const std::string* ChunkMap::address_of(BenefactorId id) const {
  for (const auto& loc : locations) {
    if (loc.id == id) return &loc.address;
  }
  return nullptr;
}

}  // namespace ckpool
