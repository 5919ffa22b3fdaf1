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

#include <algorithm>
#include <deque>
#include <future>

#include "ckpool/client.hpp"
#include "ckpool/error.hpp"

namespace ckpool {

struct ReadHandle::Impl {
  Impl(Client& c, ChunkMap m) : client(c), map(std::move(m)) {}

  Client& client;
  ChunkMap map;
  uint64_t position = 0;
  size_t next_fetch = 0;
  std::deque<std::future<std::vector<uint8_t>>> pending;
  std::vector<uint8_t> current;
  size_t current_pos = 0;

  std::vector<uint8_t> fetch(size_t index) const;
  void top_up();
  bool advance();
};

// Tries each replica in order; a copy that fails its digest check counts as
// missing.
std::vector<uint8_t> ReadHandle::Impl::fetch(size_t index) const {
  const ChunkRef& ref = map.chunks[index];
  std::string last = "no replicas recorded";
  for (BenefactorId b : ref.replicas) {
    const std::string* addr = map.address_of(b);
    if (!addr) {
      last = "benefactor " + std::to_string(b) + " has no address";
      continue;
    }
    try {
      auto bytes = client.benefactors().get_chunk(*addr, ref.id);
      if (bytes.size() != ref.length || content_address(bytes) != ref.id) {
        last = "corrupt copy on benefactor " + std::to_string(b);
        continue;
      }
      return bytes;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kUnavailable || e.code() == ErrorCode::kTimeout) {
        client.benefactors().forget(*addr);
      }
      last = e.what();
    }
  }
  fail(ErrorCode::kUnavailable, "chunk " + ref.id.hex() + " of " + map.dataset.str() +
                                    " unavailable: " + last);
}

void ReadHandle::Impl::top_up() {
  const size_t depth = std::max<size_t>(1, client.options().readahead);
  while (pending.size() < depth && next_fetch < map.chunks.size()) {
    const size_t index = next_fetch++;
    pending.push_back(std::async(std::launch::async, [this, index] { return fetch(index); }));
  }
}

bool ReadHandle::Impl::advance() {
  top_up();
  if (pending.empty()) return false;
  auto f = std::move(pending.front());
  pending.pop_front();
  current = f.get();
  current_pos = 0;
  top_up();
  return true;
}

ReadHandle::ReadHandle(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

ReadHandle::~ReadHandle() {
  for (auto& f : impl_->pending) {
    if (f.valid()) f.wait();
  }
}

size_t ReadHandle::read(std::span<uint8_t> out) {
  Impl& s = *impl_;
  size_t done = 0;
  while (done < out.size()) {
    if (s.current_pos == s.current.size()) {
      if (!s.advance()) break;
    }
    const size_t n = std::min(out.size() - done, s.current.size() - s.current_pos);
    std::copy_n(s.current.begin() + static_cast<ptrdiff_t>(s.current_pos), n, out.begin() + done);
    s.current_pos += n;
    done += n;
  }
  s.position += done;
  return done;
}

std::vector<uint8_t> ReadHandle::read(size_t count) {
  std::vector<uint8_t> out(count);
  out.resize(read(std::span<uint8_t>(out)));
  return out;
}

std::vector<uint8_t> ReadHandle::read_all() {
  std::vector<uint8_t> out(size() - position());
  const size_t n = read(std::span<uint8_t>(out));
  out.resize(n);
  return out;
}

uint64_t ReadHandle::size() const { return impl_->map.total_bytes; }
uint64_t ReadHandle::position() const { return impl_->position; }
const ChunkMap& ReadHandle::map() const { return impl_->map; }

std::unique_ptr<ReadHandle> Client::open_read(const DatasetName& dataset, Version version) {
  auto map = manager_.get_chunk_map(dataset, version);
  auto impl = std::make_unique<ReadHandle::Impl>(*this, std::move(map));
  return std::unique_ptr<ReadHandle>(new ReadHandle(std::move(impl)));
}

}  // namespace ckpool
