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

#include "ckpool/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/uio.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "ckpool/error.hpp"
#include "ckpool/protocol.hpp"

namespace ckpool {

namespace {

[[noreturn]] void fail_errno(ErrorCode code, const std::string& what) {
  fail(code, what + ": " + std::strerror(errno));
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

void set_io_timeout(int fd, std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

sockaddr_in resolve(const HostPort& hp) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(hp.port);
  const std::string host = hp.host.empty() || hp.host == "localhost" ? "127.0.0.1" : hp.host;
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    fail(ErrorCode::kUnavailable, "cannot resolve host '" + host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

// Reads exactly out.size() bytes; false on EOF before the first byte.
bool read_exact(int fd, std::span<uint8_t> out, bool eof_ok) {
  size_t got = 0;
  while (got < out.size()) {
    const ssize_t n = ::recv(fd, out.data() + got, out.size() - got, 0);
    if (n > 0) {
      got += static_cast<size_t>(n);
      continue;
    }
    if (n == 0) {
      if (got == 0 && eof_ok) return false;
      fail(ErrorCode::kUnavailable, "connection closed mid-frame");
    }
    if (errno == EINTR) continue;
    if (errno == EAGAIN || errno == EWOULDBLOCK) fail(ErrorCode::kTimeout, "receive timed out");
    fail_errno(ErrorCode::kUnavailable, "recv");
  }
  return true;
}

}  // namespace

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

HostPort parse_host_port(const std::string& address) {
  const size_t colon = address.rfind(':');
  if (colon == std::string::npos) fail(ErrorCode::kUsage, "address must be host:port: " + address);
  HostPort hp;
  hp.host = address.substr(0, colon);
  const std::string port = address.substr(colon + 1);
  char* end = nullptr;
  const unsigned long v = std::strtoul(port.c_str(), &end, 10);
  if (port.empty() || *end != '\0' || v > 65535) {
    fail(ErrorCode::kUsage, "bad port in address: " + address);
  }
  hp.port = static_cast<uint16_t>(v);
  return hp;
}

Socket connect_tcp(const std::string& address, std::chrono::milliseconds timeout) {
  const sockaddr_in addr = resolve(parse_host_port(address));
  Socket sock(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0));
  if (!sock.valid()) fail_errno(ErrorCode::kUnavailable, "socket");
  int rc = ::connect(sock.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr));
  if (rc != 0 && errno == EINPROGRESS) {
    pollfd pfd{sock.fd(), POLLOUT, 0};
    rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (rc == 0) fail(ErrorCode::kUnavailable, "connect to " + address + " timed out");
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(sock.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      errno = err;
      fail_errno(ErrorCode::kUnavailable, "connect to " + address);
    }
  } else if (rc != 0) {
    fail_errno(ErrorCode::kUnavailable, "connect to " + address);
  }
  const int flags = ::fcntl(sock.fd(), F_GETFL);
  ::fcntl(sock.fd(), F_SETFL, flags & ~O_NONBLOCK);
  set_nodelay(sock.fd());
  set_io_timeout(sock.fd(), timeout);
  return sock;
}

void send_frame(int fd, uint8_t opcode, uint64_t request_id,
                std::span<const uint8_t> payload) {
  const uint64_t length = 1 + 8 + payload.size();
  if (length > kMaxFrameLength) fail(ErrorCode::kUsage, "frame too large");
  WireWriter header;
  header.u32(static_cast<uint32_t>(length)).u8(opcode).u64(request_id);
  const auto& h = header.bytes();

  iovec iov[2];
  iov[0] = {const_cast<uint8_t*>(h.data()), h.size()};
  iov[1] = {const_cast<uint8_t*>(payload.data()), payload.size()};
  size_t total = h.size() + payload.size();
  size_t sent = 0;
  int first = 0;
  while (sent < total) {
    msghdr msg{};
    msg.msg_iov = iov + first;
    msg.msg_iovlen = static_cast<size_t>(2 - first);
    const ssize_t n = ::sendmsg(fd, &msg, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) fail(ErrorCode::kTimeout, "send timed out");
      fail_errno(ErrorCode::kUnavailable, "send");
    }
    sent += static_cast<size_t>(n);
    size_t advance = static_cast<size_t>(n);
    while (first < 2 && advance >= iov[first].iov_len) {
      advance -= iov[first].iov_len;
      iov[first].iov_len = 0;
      ++first;
    }
    if (first < 2) {
      iov[first].iov_base = static_cast<uint8_t*>(iov[first].iov_base) + advance;
      iov[first].iov_len -= advance;
    }
  }
}

std::optional<Frame> recv_frame(int fd) {
  uint8_t header[kFrameHeaderSize];
  if (!read_exact(fd, header, true)) return std::nullopt;
  WireReader r(header);
  const uint32_t length = r.u32();
  if (length < 9 || length > kMaxFrameLength) {
    fail(ErrorCode::kMalformed, "bad frame length " + std::to_string(length));
  }
  Frame f;
  f.opcode = r.u8();
  f.request_id = r.u64();
  f.payload.resize(length - 9);
  read_exact(fd, f.payload, false);
  return f;
}

RpcConnection::RpcConnection(std::string address, std::chrono::milliseconds timeout)
    : address_(std::move(address)), timeout_(timeout) {}

void RpcConnection::disconnect() { sock_.close(); }

std::vector<uint8_t> RpcConnection::call(uint8_t opcode, std::span<const uint8_t> payload) {
  const uint64_t id = next_request_id_++;
  std::optional<Frame> reply;
  try {
    if (!sock_.valid()) sock_ = connect_tcp(address_, timeout_);
    send_frame(sock_.fd(), opcode, id, payload);
    reply = recv_frame(sock_.fd());
  } catch (const Error& e) {
    sock_.close();
    fail(e.code() == ErrorCode::kTimeout ? ErrorCode::kTimeout : ErrorCode::kUnavailable,
         address_ + ": " + e.what());
  }
  if (!reply) {
    sock_.close();
    fail(ErrorCode::kUnavailable, address_ + ": connection closed");
  }
  if (reply->request_id != id) {
    sock_.close();
    fail(ErrorCode::kMalformed, address_ + ": reply id mismatch");
  }
  if (reply->opcode == op::kErrorReply) {
    WireReader r(reply->payload);
    const auto code = static_cast<ErrorCode>(r.u16());
    throw Error(code, r.str());
  }
  if (reply->opcode != (opcode | op::kReplyBit)) {
    sock_.close();
    fail(ErrorCode::kMalformed, address_ + ": unexpected reply opcode");
  }
  return std::move(reply->payload);
}

void ConnectionPool::release(std::unique_ptr<RpcConnection> conn) {
  std::lock_guard lock(mu_);
  idle_.emplace(conn->address(), std::move(conn));
}

void ConnectionPool::forget(const std::string& address) {
  std::lock_guard lock(mu_);
  idle_.erase(address);
}

std::vector<uint8_t> ConnectionPool::call(const std::string& address, uint8_t opcode,
                                          std::span<const uint8_t> payload) {
  std::unique_ptr<RpcConnection> conn;
  {
    std::lock_guard lock(mu_);
    auto it = idle_.find(address);
    if (it != idle_.end()) {
      conn = std::move(it->second);
      idle_.erase(it);
    }
  }
  const bool reused = conn != nullptr;
  if (!conn) conn = std::make_unique<RpcConnection>(address, timeout_);
  try {
    auto reply = conn->call(opcode, payload);
    release(std::move(conn));
    return reply;
  } catch (const Error& e) {
    // Remote application errors leave the connection usable.
    if (e.code() != ErrorCode::kUnavailable && e.code() != ErrorCode::kTimeout &&
        e.code() != ErrorCode::kMalformed) {
      release(std::move(conn));
      throw;
    }
    // An idle connection may have gone stale when the peer restarted.
    if (!reused || e.code() != ErrorCode::kUnavailable) throw;
  }
  forget(address);
  auto fresh = std::make_unique<RpcConnection>(address, timeout_);
  auto reply = fresh->call(opcode, payload);
  release(std::move(fresh));
  return reply;
}

RpcServer::RpcServer(RpcHandler handler) : handler_(std::move(handler)) {}

RpcServer::~RpcServer() { stop(); }

void RpcServer::start(const std::string& listen_address) {
  const HostPort hp = parse_host_port(listen_address);
  sockaddr_in addr = resolve(hp);
  listener_ = Socket(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!listener_.valid()) fail_errno(ErrorCode::kIo, "socket");
  int one = 1;
  ::setsockopt(listener_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(listener_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    fail_errno(ErrorCode::kIo, "bind " + listen_address);
  }
  if (::listen(listener_.fd(), 128) != 0) fail_errno(ErrorCode::kIo, "listen");
  socklen_t len = sizeof(addr);
  ::getsockname(listener_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  host_ = hp.host.empty() ? "127.0.0.1" : hp.host;
  if (host_ == "0.0.0.0") host_ = "127.0.0.1";
  port_ = ntohs(addr.sin_port);
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void RpcServer::stop() {
  if (!running_.exchange(false)) return;
  listener_.shutdown();
  if (accept_thread_.joinable()) accept_thread_.join();
  listener_.close();
  std::list<Conn> conns;
  {
    std::lock_guard lock(mu_);
    for (auto& c : conns_) c.sock.shutdown();
    conns.splice(conns.end(), conns_);
  }
  for (auto& c : conns) {
    if (c.thread.joinable()) c.thread.join();
  }
}

void RpcServer::reap_locked() {
  for (auto it = conns_.begin(); it != conns_.end();) {
    if (it->done.load()) {
      if (it->thread.joinable()) it->thread.join();
      it = conns_.erase(it);
    } else {
      ++it;
    }
  }
}

void RpcServer::accept_loop() {
  while (running_.load()) {
    const int fd = ::accept4(listener_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      if (!running_.load()) break;
      if (errno == EMFILE || errno == ENFILE) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
        continue;
      }
      break;
    }
    set_nodelay(fd);
    std::lock_guard lock(mu_);
    if (!running_.load()) {
      ::close(fd);
      break;
    }
    reap_locked();
    Conn& c = conns_.emplace_back();
    c.sock = Socket(fd);
    c.thread = std::thread([this, &c] { serve(&c); });
  }
}

void RpcServer::serve(Conn* conn) {
  const int fd = conn->sock.fd();
  try {
    while (running_.load()) {
      auto frame = recv_frame(fd);
      if (!frame) break;
      std::vector<uint8_t> reply;
      uint8_t reply_op = frame->opcode | op::kReplyBit;
      try {
        WireReader in(frame->payload);
        reply = handler_(frame->opcode, in);
      } catch (const Error& e) {
        reply_op = op::kErrorReply;
        WireWriter w;
        std::string msg = e.what();
        if (msg.size() > 4096) msg.resize(4096);
        w.u16(static_cast<uint16_t>(e.code())).str(msg);
        reply = w.take();
      } catch (const std::exception& e) {
        reply_op = op::kErrorReply;
        WireWriter w;
        w.u16(static_cast<uint16_t>(ErrorCode::kInternal)).str(e.what());
        reply = w.take();
      }
      send_frame(fd, reply_op, frame->request_id, reply);
    }
  } catch (const std::exception&) {
    // Transport failure: drop the connection.
  }
  conn->done = true;
}

}  // namespace ckpool
