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

#include "ckpool/journal.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "ckpool/error.hpp"
#include "ckpool/wire.hpp"

namespace ckpool {

namespace {

[[noreturn]] void io_fail(const std::string& what) {
  fail(ErrorCode::kIo, what + ": " + std::strerror(errno));
}

void write_all(int fd, const uint8_t* p, size_t n) {
  while (n > 0) {
    const ssize_t w = ::write(fd, p, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      io_fail("journal write");
    }
    p += w;
    n -= static_cast<size_t>(w);
  }
}

}  // namespace

Journal::Journal(std::filesystem::path path, bool fsync)
    : path_(std::move(path)), fsync_(fsync) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) io_fail("open journal " + path_.string());
}

Journal::~Journal() {
  if (fd_ >= 0) ::close(fd_);
}

std::vector<JournalRecord> Journal::replay() {
  struct stat st {};
  if (::fstat(fd_, &st) != 0) io_fail("stat journal");
  std::vector<uint8_t> data(static_cast<size_t>(st.st_size));
  size_t got = 0;
  while (got < data.size()) {
    const ssize_t n = ::pread(fd_, data.data() + got, data.size() - got, static_cast<off_t>(got));
    if (n < 0) {
      if (errno == EINTR) continue;
      io_fail("read journal");
    }
    if (n == 0) break;
    got += static_cast<size_t>(n);
  }
  data.resize(got);

  std::vector<JournalRecord> out;
  size_t pos = 0;
  while (data.size() - pos >= 5) {
    const uint32_t len = (uint32_t{data[pos]} << 24) | (uint32_t{data[pos + 1]} << 16) |
                         (uint32_t{data[pos + 2]} << 8) | uint32_t{data[pos + 3]};
    if (len == 0 || data.size() - pos - 4 < len) break;
    JournalRecord rec;
    rec.type = static_cast<RecordType>(data[pos + 4]);
    rec.payload.assign(data.begin() + static_cast<ptrdiff_t>(pos + 5),
                       data.begin() + static_cast<ptrdiff_t>(pos + 4 + len));
    out.push_back(std::move(rec));
    pos += 4 + len;
  }
  if (pos != data.size()) {
    if (::ftruncate(fd_, static_cast<off_t>(pos)) != 0) io_fail("truncate journal");
  }
  return out;
}

void Journal::append(RecordType type, std::span<const uint8_t> payload, bool durable) {
  WireWriter w;
  w.u32(static_cast<uint32_t>(payload.size() + 1)).u8(static_cast<uint8_t>(type));
  auto& buf = w.bytes();
  buf.insert(buf.end(), payload.begin(), payload.end());
  write_all(fd_, buf.data(), buf.size());
  if (durable && fsync_ && ::fdatasync(fd_) != 0) io_fail("fsync journal");
  ++appended_;
}

void Journal::sync() {
  if (fsync_ && ::fdatasync(fd_) != 0) io_fail("fsync journal");
}

}  // namespace ckpool
