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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace ckpool {

// Plain-text `key = value` settings shared by the daemons, the client and
// cluster scenario files. '#' starts a comment; later keys override earlier
// ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
  bool contains(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;

  std::string get_string(std::string_view key, std::string fallback) const;
  uint64_t get_u64(std::string_view key, uint64_t fallback) const;
  double get_double(std::string_view key, double fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  // Byte sizes accept K/M/G suffixes (powers of 1024).
  uint64_t get_bytes(std::string_view key, uint64_t fallback) const;
  // Durations accept ms/s/m/h suffixes; a bare number is milliseconds.
  std::chrono::milliseconds get_duration(std::string_view key,
                                         std::chrono::milliseconds fallback) const;

  // Overlay `other` on top of this config.
  void merge(const KeyValueConfig& other);
  std::string dump() const;
  const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

uint64_t parse_bytes(std::string_view text);
std::chrono::milliseconds parse_duration(std::string_view text);

}  // namespace ckpool
