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

#include "ckpool/chunk_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "ckpool/chunking.hpp"
#include "ckpool/error.hpp"

namespace fs = std::filesystem;

namespace ckpool {

namespace {

[[noreturn]] void io_fail(const std::string& what) {
  fail(ErrorCode::kIo, what + ": " + std::strerror(errno));
}

void write_file(const fs::path& path, std::span<const uint8_t> data, bool sync) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) io_fail("create " + path.string());
  const uint8_t* p = data.data();
  size_t left = data.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int saved = errno;
      ::close(fd);
      errno = saved;
      io_fail("write " + path.string());
    }
    p += n;
    left -= static_cast<size_t>(n);
  }
  if (sync && ::fdatasync(fd) != 0) {
    ::close(fd);
    io_fail("fsync " + path.string());
  }
  ::close(fd);
}

// nullopt when the file does not exist.
std::optional<std::vector<uint8_t>> read_file(const fs::path& path) {
  const int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) {
    if (errno == ENOENT) return std::nullopt;
    io_fail("open " + path.string());
  }
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    io_fail("stat " + path.string());
  }
  std::vector<uint8_t> out(static_cast<size_t>(st.st_size));
  size_t got = 0;
  while (got < out.size()) {
    const ssize_t n = ::read(fd, out.data() + got, out.size() - got);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      io_fail("read " + path.string());
    }
    if (n == 0) break;
    got += static_cast<size_t>(n);
  }
  ::close(fd);
  out.resize(got);
  return out;
}

}  // namespace

ChunkStore::ChunkStore(fs::path root, uint64_t capacity, bool fsync)
    : root_(std::move(root)),
      chunks_dir_(root_ / "chunks"),
      tmp_dir_(root_ / "tmp"),
      quarantine_dir_(root_ / "quarantine"),
      capacity_(capacity),
      fsync_(fsync) {
  fs::create_directories(chunks_dir_);
  fs::create_directories(tmp_dir_);
  fs::create_directories(quarantine_dir_);
  load();
}

fs::path ChunkStore::relative_path(const ChunkId& id) {
  const std::string hex = id.hex();
  return fs::path("chunks") / hex.substr(0, 2) / hex.substr(2, 2) / hex;
}

fs::path ChunkStore::path_for(const ChunkId& id) const { return root_ / relative_path(id); }

void ChunkStore::load() {
  // Leftovers of interrupted puts.
  for (const auto& e : fs::directory_iterator(tmp_dir_)) fs::remove_all(e.path());
  for (const auto& e : fs::recursive_directory_iterator(chunks_dir_)) {
    if (!e.is_regular_file()) continue;
    auto id = ChunkId::from_hex(e.path().filename().string());
    if (!id || e.path() != path_for(*id)) {
      std::error_code ec;
      fs::rename(e.path(), quarantine_dir_ / e.path().filename(), ec);
      continue;
    }
    const uint64_t size = e.file_size();
    index_[*id] = Entry{size, 0};
    used_ += size;
  }
}

bool ChunkStore::put(const ChunkId& id, std::span<const uint8_t> payload) {
  if (content_address(payload) != id) {
    fail(ErrorCode::kIntegrity, "payload does not hash to " + id.short_hex());
  }
  {
    std::lock_guard lock(mu_);
    auto it = index_.find(id);
    if (it != index_.end()) {
      it->second.touched = generation_.fetch_add(1) + 1;
      return false;
    }
    if (used_ + pending_ + payload.size() > capacity_) {
      fail(ErrorCode::kNoSpace, "store capacity exhausted");
    }
    pending_ += payload.size();
  }
  const fs::path tmp = tmp_dir_ / (id.hex() + "." + std::to_string(::getpid()) + "." +
                                   std::to_string(tmp_counter_.fetch_add(1)));
  const fs::path dest = path_for(id);
  try {
    write_file(tmp, payload, fsync_);
    fs::create_directories(dest.parent_path());
    fs::rename(tmp, dest);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    std::lock_guard lock(mu_);
    pending_ -= payload.size();
    throw;
  }
  std::lock_guard lock(mu_);
  pending_ -= payload.size();
  const uint64_t touched = generation_.fetch_add(1) + 1;
  auto [it, fresh] = index_.try_emplace(id, Entry{payload.size(), touched});
  if (!fresh) {
    it->second.touched = touched;
    return false;
  }
  used_ += payload.size();
  return true;
}

std::vector<uint8_t> ChunkStore::get(const ChunkId& id) {
  if (!contains(id)) fail(ErrorCode::kNotFound, "chunk " + id.short_hex() + " not stored");
  auto data = read_file(path_for(id));
  if (!data) fail(ErrorCode::kNotFound, "chunk " + id.short_hex() + " not stored");
  if (content_address(*data) != id) {
    quarantine(id);
    fail(ErrorCode::kIntegrity, "chunk " + id.short_hex() + " is corrupt; quarantined");
  }
  return std::move(*data);
}

bool ChunkStore::contains(const ChunkId& id) const {
  std::lock_guard lock(mu_);
  return index_.count(id) > 0;
}

void ChunkStore::quarantine(const ChunkId& id) {
  std::lock_guard lock(mu_);
  auto it = index_.find(id);
  if (it == index_.end()) return;
  used_ -= it->second.size;
  index_.erase(it);
  std::error_code ec;
  fs::rename(path_for(id), quarantine_dir_ / id.hex(), ec);
  ++quarantined_;
}

bool ChunkStore::erase_locked(const ChunkId& id) {
  auto it = index_.find(id);
  if (it == index_.end()) return false;
  std::error_code ec;
  fs::remove(path_for(id), ec);
  used_ -= it->second.size;
  index_.erase(it);
  return true;
}

uint32_t ChunkStore::remove(std::span<const ChunkId> ids) {
  std::lock_guard lock(mu_);
  uint32_t n = 0;
  for (const auto& id : ids) n += erase_locked(id) ? 1 : 0;
  return n;
}

uint32_t ChunkStore::remove_untouched(std::span<const ChunkId> ids, uint64_t generation) {
  std::lock_guard lock(mu_);
  uint32_t n = 0;
  for (const auto& id : ids) {
    auto it = index_.find(id);
    if (it == index_.end() || it->second.touched > generation) continue;
    n += erase_locked(id) ? 1 : 0;
  }
  return n;
}

std::vector<ChunkId> ChunkStore::inventory() const {
  std::lock_guard lock(mu_);
  std::vector<ChunkId> out;
  out.reserve(index_.size());
  for (const auto& [id, e] : index_) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

uint32_t ChunkStore::scrub() {
  uint32_t bad = 0;
  for (const auto& id : inventory()) {
    auto data = read_file(path_for(id));
    if (!data) continue;
    if (content_address(*data) != id) {
      quarantine(id);
      ++bad;
    }
  }
  return bad;
}

uint64_t ChunkStore::used_bytes() const {
  std::lock_guard lock(mu_);
  return used_;
}

uint64_t ChunkStore::free_bytes() const {
  std::lock_guard lock(mu_);
  const uint64_t taken = used_ + pending_;
  return capacity_ > taken ? capacity_ - taken : 0;
}

uint64_t ChunkStore::chunk_count() const {
  std::lock_guard lock(mu_);
  return index_.size();
}

uint64_t ChunkStore::scan_disk_bytes() const {
  uint64_t total = 0;
  for (const auto& e : fs::recursive_directory_iterator(chunks_dir_)) {
    if (e.is_regular_file()) total += e.file_size();
  }
  return total;
}

}  // namespace ckpool
