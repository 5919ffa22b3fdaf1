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

#include <iostream>

#include "ckpool/manager_server.hpp"
#include "daemon_main.hpp"

using namespace ckpool;

int main(int argc, char** argv) {
  CLI::App app{"ckpool metadata manager"};
  tools::DaemonFlags flags;
  flags.add_to(app);
  std::string listen, journal, heartbeat, liveness, ttl, lifecycle, purge_after;
  uint32_t replication = 0;
  app.add_option("--listen", listen, "listen address host:port (port 0 picks one)");
  app.add_option("--journal", journal, "metadata journal path");
  app.add_option("--heartbeat-interval", heartbeat, "benefactor heartbeat interval");
  app.add_option("--liveness-timeout", liveness, "offline after this much silence");
  app.add_option("--reservation-ttl", ttl, "reservation lifetime");
  app.add_option("--replication", replication, "default replication level");
  app.add_option("--lifecycle-mode", lifecycle, "default lifecycle mode: none|replace|purge");
  app.add_option("--purge-after", purge_after, "default purge interval");
  CLI11_PARSE(app, argc, argv);

  try {
    KeyValueConfig kv = flags.base();
    if (!listen.empty()) kv.set("listen", listen);
    if (!journal.empty()) kv.set("journal", journal);
    if (!heartbeat.empty()) kv.set("heartbeat_interval", heartbeat);
    if (!liveness.empty()) kv.set("liveness_timeout", liveness);
    if (!ttl.empty()) kv.set("reservation_ttl", ttl);
    if (replication) kv.set("replication", std::to_string(replication));
    if (!lifecycle.empty()) kv.set("lifecycle_mode", lifecycle);
    if (!purge_after.empty()) kv.set("purge_after", purge_after);
    flags.apply_overrides(kv);

    const sigset_t stop = tools::block_stop_signals();
    ManagerServer server(ManagerConfig::from(kv));
    server.start();
    tools::write_port_file(flags.port_file, server.address());
    std::cout << "manager listening on " << server.address() << std::endl;
    tools::wait_for_stop(stop);
    server.stop();
    return 0;
  } catch (const Error& e) {
    std::cerr << "ckpool-manager: " << error_code_name(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "ckpool-manager: " << e.what() << "\n";
    return exit_code_for(ErrorCode::kInternal);
  }
}
