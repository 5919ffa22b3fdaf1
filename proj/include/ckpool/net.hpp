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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ckpool/wire.hpp"

namespace ckpool {

// Owning file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close();
  // Wakes any thread blocked on this socket without releasing the fd.
  void shutdown();

 private:
  int fd_ = -1;
};

struct HostPort {
  std::string host;
  uint16_t port = 0;
  std::string str() const { return host + ":" + std::to_string(port); }
};

HostPort parse_host_port(const std::string& address);

Socket connect_tcp(const std::string& address, std::chrono::milliseconds timeout);

// Blocking frame I/O. send_frame throws Error(kUnavailable) on failure;
// recv_frame returns nullopt on orderly EOF before a frame starts.
void send_frame(int fd, uint8_t opcode, uint64_t request_id,
                std::span<const uint8_t> payload);
std::optional<Frame> recv_frame(int fd);

// One client connection issuing one request at a time. Reconnects lazily
// after a transport failure.
class RpcConnection {
 public:
  explicit RpcConnection(std::string address,
                         std::chrono::milliseconds timeout = std::chrono::seconds(30));

  // Returns the reply payload. Remote errors are rethrown as ckpool::Error
  // with the remote code; transport failures raise kUnavailable.
  std::vector<uint8_t> call(uint8_t opcode, std::span<const uint8_t> payload);

  const std::string& address() const { return address_; }
  void disconnect();

 private:
  std::string address_;
  std::chrono::milliseconds timeout_;
  Socket sock_;
  uint64_t next_request_id_ = 1;
};

// Thread-safe pool of connections keyed by address.
class ConnectionPool {
 public:
  explicit ConnectionPool(std::chrono::milliseconds timeout = std::chrono::seconds(30))
      : timeout_(timeout) {}

  std::vector<uint8_t> call(const std::string& address, uint8_t opcode,
                            std::span<const uint8_t> payload);
  // Drops idle connections to `address` (e.g. after it was restarted).
  void forget(const std::string& address);

 private:
  void release(std::unique_ptr<RpcConnection> conn);

  std::chrono::milliseconds timeout_;
  std::mutex mu_;
  std::multimap<std::string, std::unique_ptr<RpcConnection>> idle_;
};

// Reply payload for a request; throwing ckpool::Error produces an error
// reply and keeps the connection open.
using RpcHandler = std::function<std::vector<uint8_t>(uint8_t opcode, WireReader& request)>;

// Thread-per-connection frame server.
class RpcServer {
 public:
  explicit RpcServer(RpcHandler handler);
  ~RpcServer();
  RpcServer(const RpcServer&) = delete;
  RpcServer& operator=(const RpcServer&) = delete;

  // Binds host:port (port 0 picks a free one) and starts accepting.
  void start(const std::string& listen_address);
  // Closes the listener and every connection; joins all threads.
  void stop();

  uint16_t port() const { return port_; }
  std::string address() const { return host_ + ":" + std::to_string(port_); }
  bool running() const { return running_.load(); }

 private:
  struct Conn {
    Socket sock;
    std::thread thread;
    std::atomic<bool> done{false};
  };

  void accept_loop();
  void serve(Conn* conn);
  void reap_locked();

  RpcHandler handler_;
  Socket listener_;
  std::string host_;
  uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::mutex mu_;
  std::list<Conn> conns_;
};

}  // namespace ckpool
