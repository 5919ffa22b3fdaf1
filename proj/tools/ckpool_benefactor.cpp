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

#include "ckpool/benefactor.hpp"
#include "daemon_main.hpp"

using namespace ckpool;

int main(int argc, char** argv) {
  CLI::App app{"ckpool storage benefactor"};
  tools::DaemonFlags flags;
  flags.add_to(app);
  std::string manager, root, capacity, listen, heartbeat, gc;
  app.add_option("--manager-address", manager, "manager host:port");
  app.add_option("--root", root, "storage root directory");
  app.add_option("--capacity", capacity, "bytes donated (K/M/G suffixes)");
  app.add_option("--listen", listen, "listen address host:port (port 0 picks one)");
  app.add_option("--heartbeat-interval", heartbeat, "heartbeat interval");
  app.add_option("--gc-interval", gc, "inventory exchange interval (0 disables)");
  CLI11_PARSE(app, argc, argv);

  try {
    KeyValueConfig kv = flags.base();
    if (!manager.empty()) kv.set("manager_address", manager);
    if (!root.empty()) kv.set("root", root);
    if (!capacity.empty()) kv.set("capacity", capacity);
    if (!listen.empty()) kv.set("listen", listen);
    if (!heartbeat.empty()) kv.set("heartbeat_interval", heartbeat);
    if (!gc.empty()) kv.set("gc_interval", gc);
    flags.apply_overrides(kv);

    const sigset_t stop = tools::block_stop_signals();
    Benefactor benefactor(BenefactorConfig::from(kv));
    benefactor.start();
    tools::write_port_file(flags.port_file, benefactor.address());
    std::cout << "benefactor listening on " << benefactor.address() << std::endl;
    tools::wait_for_stop(stop);
    benefactor.stop();
    return 0;
  } catch (const Error& e) {
    std::cerr << "ckpool-benefactor: " << error_code_name(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "ckpool-benefactor: " << e.what() << "\n";
    return exit_code_for(ErrorCode::kInternal);
  }
}
