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

#include "ckpool/harness/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "ckpool/error.hpp"

namespace ckpool::harness {

namespace {

void fill_random(std::mt19937_64& rng, uint8_t* out, size_t n) {
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const uint64_t v = rng();
    std::memcpy(out + i, &v, 8);
  }
  if (i < n) {
    const uint64_t v = rng();
    std::memcpy(out + i, &v, n - i);
  }
}

}  // namespace

WorkloadSpec WorkloadSpec::from(const KeyValueConfig& kv) {
  WorkloadSpec s;
  s.image_size = kv.get_bytes("image_size", s.image_size);
  s.versions = static_cast<uint32_t>(kv.get_u64("versions", s.versions));
  s.mutation_fraction = kv.get_double("mutation_fraction", s.mutation_fraction);
  s.insert_bytes = kv.get_bytes("insert_bytes", s.insert_bytes);
  if (kv.contains("insert_offset")) s.insert_offset = kv.get_bytes("insert_offset", 0);
  s.region_size = kv.get_bytes("region_size", s.region_size);
  s.checkpoint_interval = kv.get_duration("checkpoint_interval", s.checkpoint_interval);
  s.clients = static_cast<uint32_t>(kv.get_u64("clients", s.clients));
  s.seed = kv.get_u64("seed", s.seed);
  if (s.mutation_fraction < 0.0 || s.mutation_fraction > 1.0) {
    fail(ErrorCode::kUsage, "mutation_fraction must lie in [0, 1]");
  }
  if (s.region_size == 0) fail(ErrorCode::kUsage, "region_size must be positive");
  return s;
}

std::vector<uint8_t> random_bytes(uint64_t size, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<uint8_t> out(size);
  fill_random(rng, out.data(), out.size());
  return out;
}

VersionGenerator::VersionGenerator(WorkloadSpec spec) : spec_(std::move(spec)), rng_(spec_.seed) {}

std::optional<std::vector<uint8_t>> VersionGenerator::next() {
  if (produced_ >= spec_.versions) return std::nullopt;
  last_mutated_.clear();
  if (produced_ == 0) {
    current_.resize(spec_.image_size);
    fill_random(rng_, current_.data(), current_.size());
  } else {
    const uint64_t regions = (current_.size() + spec_.region_size - 1) / spec_.region_size;
    const auto count = static_cast<uint64_t>(
        std::llround(spec_.mutation_fraction * static_cast<double>(regions)));
    std::vector<uint64_t> order(regions);
    std::iota(order.begin(), order.end(), 0);
    // Partial Fisher-Yates: the first `count` entries are a uniform sample.
    for (uint64_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<uint64_t> pick(i, regions - 1);
      std::swap(order[i], order[pick(rng_)]);
    }
    last_mutated_.assign(order.begin(), order.begin() + static_cast<ptrdiff_t>(count));
    std::sort(last_mutated_.begin(), last_mutated_.end());
    for (uint64_t r : last_mutated_) {
      const uint64_t begin = r * spec_.region_size;
      const uint64_t len = std::min<uint64_t>(spec_.region_size, current_.size() - begin);
      fill_random(rng_, current_.data() + begin, len);
    }
    if (spec_.insert_bytes > 0) {
      uint64_t at;
      if (spec_.insert_offset) {
        at = std::min<uint64_t>(*spec_.insert_offset, current_.size());
      } else {
        at = std::uniform_int_distribution<uint64_t>(0, current_.size())(rng_);
      }
      std::vector<uint8_t> ins(spec_.insert_bytes);
      fill_random(rng_, ins.data(), ins.size());
      current_.insert(current_.begin() + static_cast<ptrdiff_t>(at), ins.begin(), ins.end());
    }
  }
  ++produced_;
  return current_;
}

std::vector<std::vector<uint8_t>> gen_versions(const WorkloadSpec& spec) {
  VersionGenerator gen(spec);
  std::vector<std::vector<uint8_t>> out;
  while (auto v = gen.next()) out.push_back(std::move(*v));
  return out;
}

}  // namespace ckpool::harness
