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

// Randomized commit orders under replace and purge policies, checked against
// the retention rule recomputed from the full commit history.

#pragma once

#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "ckpool/chunking.hpp"
#include "ckpool/error.hpp"
#include "ckpool/manager.hpp"

namespace ckpool::model {

namespace detail {

struct Committed {
  std::string node;
  uint64_t timestep;
  Version version;
  TimePoint at;
};

using Live = std::set<std::tuple<std::string, uint64_t, Version>>;

inline Live listed(const Manager& m, const std::string& app) {
  Live out;
  for (const auto& f : m.list_namespace(app).folders) {
    if (f.application != app) continue;
    for (const auto& d : f.datasets) {
      for (const auto& v : d.versions) out.emplace(d.name.node, d.name.timestep, v.version);
    }
  }
  return out;
}

class Harness {
 public:
  explicit Harness(uint64_t seed) : rng(seed), mgr(ManagerConfig{}, [this] { return now; }) {
    now = TimePoint(Millis(1'000'000'000'000LL));
    bid = mgr.register_benefactor("b:1", uint64_t{1} << 40).id;
  }

  Version commit(const std::string& app, const std::string& node, uint64_t ts) {
    mgr.heartbeat(bid, uint64_t{1} << 40);
    const auto grant = mgr.reserve_space("lc", 100, 1);
    const std::string tag = app + std::to_string(serial++);
    const auto id = content_address({reinterpret_cast<const uint8_t*>(tag.data()), tag.size()});
    const ChunkAnnouncement a{id, 100};
    mgr.announce_chunks(grant.id, std::span(&a, 1));
    const ChunkRef ref{id, 100, {bid}};
    return mgr.commit_chunk_map(DatasetName{app, node, ts}, std::span(&ref, 1), grant.id, 1)
        .version;
  }

  std::mt19937_64 rng;
  TimePoint now;
  Manager mgr;
  BenefactorId bid = 0;
  uint64_t serial = 0;
};

}  // namespace detail

// Empty on success, otherwise a description of the first violation.
inline std::string check_replace_history(uint64_t seed, int commits = 40) {
  detail::Harness h(seed);
  h.mgr.set_policy("A", LifecyclePolicy{LifecycleMode::kReplace, Millis(0)});
  std::vector<detail::Committed> history;
  for (int i = 0; i < commits; ++i) {
    const std::string node = "n" + std::to_string(h.rng() % 3);
    const uint64_t ts = h.rng() % 10;  // arrives out of order and repeats
    h.now += Millis(h.rng() % 5);
    const Version v = h.commit("A", node, ts);
    history.push_back({node, ts, v, h.now});

    // Per node: the newest version of the highest timestep ever committed.
    std::map<std::string, detail::Committed> best;
    for (const auto& c : history) {
      auto it = best.find(c.node);
      if (it == best.end() || c.timestep > it->second.timestep ||
          (c.timestep == it->second.timestep && c.version > it->second.version)) {
        best[c.node] = c;
      }
    }
    detail::Live expect;
    for (const auto& [node, c] : best) expect.emplace(node, c.timestep, c.version);
    if (detail::listed(h.mgr, "A") != expect) {
      return "replace: retained set wrong after commit " + std::to_string(i);
    }
    for (const auto& c : history) {
      if (expect.count({c.node, c.timestep, c.version})) continue;
      try {
        h.mgr.get_chunk_map(DatasetName{"A", c.node, c.timestep}, c.version);
        return "replace: superseded version still readable";
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kPurged) return "replace: superseded version not reported purged";
      }
    }
  }
  return {};
}

inline std::string check_purge_history(uint64_t seed, int commits = 40) {
  detail::Harness h(seed);
  const Millis after{1000 + static_cast<int64_t>(seed % 7) * 250};
  h.mgr.set_policy("P", LifecyclePolicy{LifecycleMode::kPurge, after});
  std::vector<detail::Committed> history;
  for (int i = 0; i < commits; ++i) {
    const std::string node = "n" + std::to_string(h.rng() % 3);
    const uint64_t ts = h.rng() % 10;
    h.now += Millis(h.rng() % 400);
    history.push_back({node, ts, h.commit("P", node, ts), h.now});
    if (h.rng() % 3 == 0) {
      h.now += Millis(h.rng() % 400);
      h.mgr.apply_lifecycle();
    }
    // Every evaluation point (the commit itself or the sweep) uses h.now.
    detail::Live expect;
    for (const auto& c : history) {
      if (!(c.at + after < h.now)) expect.emplace(c.node, c.timestep, c.version);
    }
    if (detail::listed(h.mgr, "P") != expect) {
      return "purge: live set wrong after step " + std::to_string(i);
    }
  }
  return {};
}

}  // namespace ckpool::model
