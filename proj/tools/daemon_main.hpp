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

#include <signal.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ckpool/config.hpp"
#include "ckpool/error.hpp"

namespace ckpool::tools {

// Settings layered as: --config file, then dedicated flags, then --set.
struct DaemonFlags {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string port_file;

  void add_to(CLI::App& app) {
    app.add_option("--config", config_file, "key=value settings file");
    app.add_option("--set", overrides, "override one setting (key=value)");
    app.add_option("--port-file", port_file, "write the bound address here once listening");
  }

  KeyValueConfig base() const {
    return config_file.empty() ? KeyValueConfig{} : KeyValueConfig::load(config_file);
  }

  void apply_overrides(KeyValueConfig& kv) const {
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) fail(ErrorCode::kUsage, "--set expects key=value: " + o);
      kv.set(o.substr(0, eq), o.substr(eq + 1));
    }
  }
};

// Blocks SIGINT and SIGTERM in every thread started afterwards.
inline sigset_t block_stop_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  ::signal(SIGPIPE, SIG_IGN);
  return set;
}

inline int wait_for_stop(const sigset_t& set) {
  int sig = 0;
  sigwait(&set, &sig);
  return sig;
}

// Written via rename so a reader never sees a partial line.
inline void write_port_file(const std::string& path, const std::string& address) {
  if (path.empty()) return;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << address << "\n";
    if (!out) fail(ErrorCode::kIo, "write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace ckpool::tools
