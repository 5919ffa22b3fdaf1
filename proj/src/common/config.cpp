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

#include "ckpool/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ckpool/error.hpp"

namespace ckpool {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

uint64_t parse_number(std::string_view digits, std::string_view original) {
  uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size()) {
    fail(ErrorCode::kUsage, "bad number '" + std::string(original) + "'");
  }
  return v;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  size_t lineno = 0;
  while (!text.empty()) {
    ++lineno;
    const size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::kUsage, "config line " + std::to_string(lineno) + ": expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) {
      fail(ErrorCode::kUsage, "config line " + std::to_string(lineno) + ": empty key");
    }
    cfg.set(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool KeyValueConfig::contains(std::string_view key) const {
  return values_.find(key) != values_.end();
}

std::optional<std::string> KeyValueConfig::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(std::string_view key, std::string fallback) const {
  auto v = get(key);
  return v ? *v : std::move(fallback);
}

uint64_t KeyValueConfig::get_u64(std::string_view key, uint64_t fallback) const {
  auto v = get(key);
  return v ? parse_number(*v, *v) : fallback;
}

double KeyValueConfig::get_double(std::string_view key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return d;
  } catch (const std::exception&) {
    fail(ErrorCode::kUsage, "bad number '" + *v + "' for " + std::string(key));
  }
}

bool KeyValueConfig::get_bool(std::string_view key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  fail(ErrorCode::kUsage, "bad boolean '" + *v + "' for " + std::string(key));
}

uint64_t KeyValueConfig::get_bytes(std::string_view key, uint64_t fallback) const {
  auto v = get(key);
  return v ? parse_bytes(*v) : fallback;
}

std::chrono::milliseconds KeyValueConfig::get_duration(
    std::string_view key, std::chrono::milliseconds fallback) const {
  auto v = get(key);
  return v ? parse_duration(*v) : fallback;
}

void KeyValueConfig::merge(const KeyValueConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string KeyValueConfig::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

uint64_t parse_bytes(std::string_view text) {
  std::string_view s = trim(text);
  uint64_t mult = 1;
  if (!s.empty()) {
    char suffix = s.back();
    if (suffix == 'B' || suffix == 'b') {
      s.remove_suffix(1);
      suffix = s.empty() ? '\0' : s.back();
    }
    switch (suffix) {
      case 'K': case 'k': mult = uint64_t{1} << 10; break;
      case 'M': case 'm': mult = uint64_t{1} << 20; break;
      case 'G': case 'g': mult = uint64_t{1} << 30; break;
      case 'T': case 't': mult = uint64_t{1} << 40; break;
      default: break;
    }
    if (mult != 1) s.remove_suffix(1);
  }
  return parse_number(s, text) * mult;
}

std::chrono::milliseconds parse_duration(std::string_view text) {
  std::string_view s = trim(text);
  uint64_t mult = 1;
  if (s.ends_with("ms")) {
    s.remove_suffix(2);
  } else if (s.ends_with("s")) {
    mult = 1000;
    s.remove_suffix(1);
  } else if (s.ends_with("m")) {
    mult = 60 * 1000;
    s.remove_suffix(1);
  } else if (s.ends_with("h")) {
    mult = 3600 * 1000;
    s.remove_suffix(1);
  }
  return std::chrono::milliseconds(parse_number(s, text) * mult);
}

}  // namespace ckpool
