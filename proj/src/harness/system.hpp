/*
 * Copyright (c) The cjm authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cjm/monitor.hpp"

namespace cjm::harness {

/// What the scenario runner drives: a set of monitors and a fixed set of
/// threads, both addressed by index. Two implementations exist, the real
/// library and a deliberately naive reference.
class MonitorSystem {
 public:
  struct Inspection {
    int owner = -1;            // thread index, -1 when free or parked on a placeholder
    std::vector<int> waiters;  // wait order
  };

  virtual ~MonitorSystem() = default;
  virtual std::string name() const = 0;

  virtual void lock(int thread, int monitor) = 0;
  /// The three below raise IllegalMonitorState when `thread` is not the owner.
  virtual void unlock(int thread, int monitor) = 0;
  virtual WaitResult wait(int thread, int monitor, std::optional<std::chrono::milliseconds> timeout) = 0;
  virtual void notify(int thread, int monitor, bool all) = 0;
  virtual std::uint64_t hash(int thread, int monitor) = 0;
  virtual void interrupt(int from, int to) = 0;
  virtual bool holds(int thread, int monitor) = 0;

  /// True while `thread` is blocked on `monitor` (-1: any) in the given phase
  /// (BlockedKind::none: either).
  virtual bool is_blocked(int thread, int monitor, BlockedKind kind) = 0;

  /// Quiescent snapshot of one monitor.
  virtual Inspection inspect(int monitor) = 0;

  /// End-of-run checks; empty when clean.
  virtual std::vector<std::string> audit() = 0;
  virtual std::string dump() = 0;
};

/// The library under test.
class CjmSystem final : public MonitorSystem {
 public:
  CjmSystem(std::vector<std::string> thread_names, std::vector<std::string> monitor_names);
  ~CjmSystem() override;

  std::string name() const override { return "cjm"; }
  void lock(int thread, int monitor) override;
  void unlock(int thread, int monitor) override;
  WaitResult wait(int thread, int monitor, std::optional<std::chrono::milliseconds> timeout) override;
  void notify(int thread, int monitor, bool all) override;
  std::uint64_t hash(int thread, int monitor) override;
  void interrupt(int from, int to) override;
  bool holds(int thread, int monitor) override;
  bool is_blocked(int thread, int monitor, BlockedKind kind) override;
  Inspection inspect(int monitor) override;
  std::vector<std::string> audit() override;
  std::string dump() override;

  ThreadContext& context(int thread) { return *contexts_[thread]; }
  Monitor& monitor(int index) { return monitors_[index]; }
  std::vector<ThreadContext*> contexts() const;

  /// Node allocation bound checked by audit(); 0 disables the check.
  void set_footprint_bound(std::size_t bound) { footprint_bound_ = bound; }

 private:
  int thread_of(const ThreadContext* ctx) const;

  std::vector<std::unique_ptr<ThreadContext>> contexts_;
  std::deque<Monitor> monitors_;
  std::vector<std::string> monitor_names_;
  std::size_t footprint_bound_ = 0;
};

/// Reference monitors: one coarse mutex, explicit FIFO entry and wait queues,
/// owner and nesting bookkeeping. Notify moves a waiter to the entry tail and
/// a cancelled waiter re-enters at the tail, mirroring the queue discipline
/// the library promises.
class OracleSystem final : public MonitorSystem {
 public:
  OracleSystem(std::size_t threads, std::size_t monitors);

  std::string name() const override { return "oracle"; }
  void lock(int thread, int monitor) override;
  void unlock(int thread, int monitor) override;
  WaitResult wait(int thread, int monitor, std::optional<std::chrono::milliseconds> timeout) override;
  void notify(int thread, int monitor, bool all) override;
  std::uint64_t hash(int thread, int monitor) override;
  void interrupt(int from, int to) override;
  bool holds(int thread, int monitor) override;
  bool is_blocked(int thread, int monitor, BlockedKind kind) override;
  Inspection inspect(int monitor) override;
  std::vector<std::string> audit() override;
  std::string dump() override;

 private:
  struct ThreadState {
    std::condition_variable cv;
    bool interrupted = false;
    bool notified = false;
    int blocked_on = -1;
    BlockedKind kind = BlockedKind::none;
  };
  struct Mon {
    int owner = -1;
    std::uint32_t nesting = 0;
    std::deque<int> entry;
    std::deque<int> waiters;
    std::uint64_t hash = 0;
  };

  void release(int monitor);
  void grant_next(int monitor);
  void enter(std::unique_lock<std::mutex>& guard, int thread, int monitor);

  std::mutex mutex_;
  std::deque<ThreadState> threads_;
  std::vector<Mon> monitors_;
  std::uint64_t next_hash_ = 1;
};

}  // namespace cjm::harness
