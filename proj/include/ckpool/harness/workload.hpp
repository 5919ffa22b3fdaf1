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
#include <optional>
#include <random>
#include <vector>

#include "ckpool/config.hpp"
#include "ckpool/types.hpp"

namespace ckpool::harness {

struct WorkloadSpec {
  uint64_t image_size = 64 << 20;
  uint32_t versions = 1;
  // Fraction of region_size-aligned regions rewritten between versions.
  double mutation_fraction = 0.0;
  // Random bytes inserted per version; insert_offset pins where (random when
  // unset).
  uint64_t insert_bytes = 0;
  std::optional<uint64_t> insert_offset;
  uint64_t region_size = 1 << 20;
  Millis checkpoint_interval{0};
  uint32_t clients = 1;
  uint64_t seed = 1;

  static WorkloadSpec from(const KeyValueConfig& kv);
};

std::vector<uint8_t> random_bytes(uint64_t size, uint64_t seed);

// Yields the version series one image at a time.
class VersionGenerator {
 public:
  explicit VersionGenerator(WorkloadSpec spec);

  // Version 1 on the first call; nullopt after spec.versions images.
  std::optional<std::vector<uint8_t>> next();
  uint32_t produced() const { return produced_; }
  // Regions rewritten to form the most recent version (sorted).
  const std::vector<uint64_t>& last_mutated_regions() const { return last_mutated_; }

 private:
  WorkloadSpec spec_;
  std::mt19937_64 rng_;
  std::vector<uint8_t> current_;
  std::vector<uint64_t> last_mutated_;
  uint32_t produced_ = 0;
};

std::vector<std::vector<uint8_t>> gen_versions(const WorkloadSpec& spec);

}  // namespace ckpool::harness
