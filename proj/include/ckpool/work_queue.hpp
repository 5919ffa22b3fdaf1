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

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <future>
#include <mutex>
#include <thread>
#include <vector>

namespace ckpool {

// Fixed pool of workers draining two FIFO lanes. Client work is always
// dequeued before replication work, and replication never occupies more
// than `replication_slots` workers so client requests keep flowing while
// replicas are pushed to peers.
class PriorityWorkQueue {
 public:
  enum class Lane { kClient = 0, kReplication = 1 };

  PriorityWorkQueue(size_t workers, size_t replication_slots);
  ~PriorityWorkQueue();
  PriorityWorkQueue(const PriorityWorkQueue&) = delete;
  PriorityWorkQueue& operator=(const PriorityWorkQueue&) = delete;

  void submit(Lane lane, std::function<void()> task);

  // Runs `fn` on a worker and returns its future.
  template <typename Fn>
  auto run(Lane lane, Fn&& fn) -> std::future<decltype(fn())> {
    using R = decltype(fn());
    auto task = std::make_shared<std::packaged_task<R()>>(std::forward<Fn>(fn));
    auto fut = task->get_future();
    submit(lane, [task] { (*task)(); });
    return fut;
  }

  // While paused, nothing is dequeued; used to observe ordering.
  void pause();
  void resume();

  size_t queued(Lane lane) const;
  void stop();

 private:
  void worker();

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> client_;
  std::deque<std::function<void()>> replication_;
  size_t replication_slots_;
  size_t replication_running_ = 0;
  bool paused_ = false;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

inline PriorityWorkQueue::PriorityWorkQueue(size_t workers, size_t replication_slots)
    : replication_slots_(replication_slots == 0 ? 1 : replication_slots) {
  if (workers == 0) workers = 1;
  for (size_t i = 0; i < workers; ++i) workers_.emplace_back([this] { worker(); });
}

inline PriorityWorkQueue::~PriorityWorkQueue() { stop(); }

inline void PriorityWorkQueue::stop() {
  {
    std::lock_guard lock(mu_);
    if (stopping_) return;
    stopping_ = true;
    paused_ = false;
  }
  cv_.notify_all();
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
}

inline void PriorityWorkQueue::submit(Lane lane, std::function<void()> task) {
  {
    std::lock_guard lock(mu_);
    (lane == Lane::kClient ? client_ : replication_).push_back(std::move(task));
  }
  cv_.notify_one();
}

inline void PriorityWorkQueue::pause() {
  std::lock_guard lock(mu_);
  paused_ = true;
}

inline void PriorityWorkQueue::resume() {
  {
    std::lock_guard lock(mu_);
    paused_ = false;
  }
  cv_.notify_all();
}

inline size_t PriorityWorkQueue::queued(Lane lane) const {
  std::lock_guard lock(mu_);
  return lane == Lane::kClient ? client_.size() : replication_.size();
}

inline void PriorityWorkQueue::worker() {
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [this] {
      if (stopping_) return true;
      if (paused_) return false;
      return !client_.empty() ||
             (!replication_.empty() && replication_running_ < replication_slots_);
    });
    // Drain everything queued before exiting so no caller waits forever.
    if (stopping_ && client_.empty() && replication_.empty()) return;
    std::function<void()> task;
    bool replication = false;
    if (!client_.empty()) {
      task = std::move(client_.front());
      client_.pop_front();
    } else if (!replication_.empty() && (stopping_ || replication_running_ < replication_slots_)) {
      task = std::move(replication_.front());
      replication_.pop_front();
      replication = true;
      ++replication_running_;
    } else {
      continue;
    }
    lock.unlock();
    try {
      task();
    } catch (...) {
      // Tasks report their own failures; a stray exception must not kill the worker.
    }
    lock.lock();
    if (replication) {
      --replication_running_;
      cv_.notify_all();
    }
  }
}

}  // namespace ckpool
