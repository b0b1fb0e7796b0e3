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

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "cjm/node.hpp"
#include "cjm/platform.hpp"

namespace cjm {

/// Plain snapshot of a thread's instrumentation.
struct CounterSnapshot {
  std::uint64_t parks = 0;
  std::uint64_t unparks = 0;
  std::uint64_t tail_swaps = 0;
  std::uint64_t allocations = 0;
  std::uint64_t handoffs = 0;
  std::uint64_t grants = 0;
  std::uint64_t instant_acquires = 0;
  std::uint64_t usurps = 0;
  std::uint64_t promotions = 0;
  std::uint64_t betas = 0;
  std::uint64_t guard_acquisitions = 0;

  CounterSnapshot& operator+=(const CounterSnapshot& o);
  friend CounterSnapshot operator-(CounterSnapshot a, const CounterSnapshot& b);
};

/// Relaxed atomic counters. Written by the owning thread (and for `unparks`,
/// by whichever thread issues the unpark); summed at quiescence.
struct Counters {
  std::atomic<std::uint64_t> parks{0};
  std::atomic<std::uint64_t> unparks{0};
  std::atomic<std::uint64_t> tail_swaps{0};
  std::atomic<std::uint64_t> allocations{0};
  std::atomic<std::uint64_t> handoffs{0};
  std::atomic<std::uint64_t> grants{0};
  std::atomic<std::uint64_t> instant_acquires{0};
  std::atomic<std::uint64_t> usurps{0};
  std::atomic<std::uint64_t> promotions{0};
  std::atomic<std::uint64_t> betas{0};
  std::atomic<std::uint64_t> guard_acquisitions{0};

  CounterSnapshot snapshot() const;
};

inline void bump(std::atomic<std::uint64_t>& c) { c.fetch_add(1, std::memory_order_relaxed); }

enum class BlockedKind : std::uint8_t { none, entry, wait };

/// Per-thread state: the active-node stack (the thread's object -> node map),
/// the free-node stack, interrupt flag, parker and counters.
///
/// A context must outlive every use of it by its thread and must not be
/// destroyed while any of its nodes are active.
class ThreadContext {
 public:
  explicit ThreadContext(std::string name = {});
  ~ThreadContext();
  ThreadContext(const ThreadContext&) = delete;
  ThreadContext& operator=(const ThreadContext&) = delete;

  std::uint64_t id() const { return id_; }
  const std::string& name() const { return name_; }

  Parker& parker() { return parker_; }
  Counters& counters() { return counters_; }
  const Counters& counters() const { return counters_; }

  std::atomic<bool>& interrupt_pending() { return interrupt_pending_; }

  /// Set while the thread is blocked acquiring or waiting on a monitor.
  /// Harness introspection only.
  const Monitor* blocked_on() const { return blocked_on_.load(std::memory_order_acquire); }
  BlockedKind blocked_kind() const { return blocked_kind_.load(std::memory_order_acquire); }
  void set_blocked(const Monitor* m, BlockedKind kind) {
    blocked_kind_.store(kind, std::memory_order_release);
    blocked_on_.store(m, std::memory_order_release);
  }
  void clear_blocked() {
    blocked_on_.store(nullptr, std::memory_order_release);
    blocked_kind_.store(BlockedKind::none, std::memory_order_release);
  }

  /// Pops a node from the free stack (or creates one), resets it for
  /// `monitor` and pushes it on the active stack.
  QueueNode* allocate_node(Monitor& monitor);

  /// Removes `node` from the active stack and returns it to the free stack.
  void release_node(QueueNode* node);

  /// Node for `monitor` in Owner state on the active stack, or nullptr.
  QueueNode* find_owned(const Monitor& monitor) const;

  // Introspection. Safe from other threads only at quiescence.
  std::vector<QueueNode*> active_nodes() const;
  std::vector<QueueNode*> free_nodes() const;
  bool on_free_list(const QueueNode* node) const;
  std::size_t active_count() const { return active_count_; }
  std::size_t free_count() const { return free_count_; }
  std::uint64_t total_allocated() const {
    return counters_.allocations.load(std::memory_order_relaxed);
  }

 private:
  void unlink_active(QueueNode* node);

  std::uint64_t id_;
  std::string name_;
  QueueNode* active_head_ = nullptr;
  QueueNode* free_head_ = nullptr;
  std::size_t active_count_ = 0;
  std::size_t free_count_ = 0;
  std::atomic<bool> interrupt_pending_{false};
  std::atomic<const Monitor*> blocked_on_{nullptr};
  std::atomic<BlockedKind> blocked_kind_{BlockedKind::none};
  Parker parker_;
  Counters counters_;
};

/// Live contexts, for id lookup and counter aggregation.
class Registry {
 public:
  static Registry& instance();

  ThreadContext* find(std::uint64_t id) const;
  std::vector<ThreadContext*> snapshot() const;
  CounterSnapshot total_counters() const;

 private:
  friend class ThreadContext;
  std::uint64_t add(ThreadContext* ctx);
  void remove(ThreadContext* ctx);

  mutable std::mutex mutex_;
  std::vector<ThreadContext*> contexts_;
  std::uint64_t next_id_ = 1;
};

/// Issues an unpark to `target` and counts it against `issuer`.
void unpark(ThreadContext& issuer, ThreadContext& target);

/// Unparks the registered context with `id`. Unknown ids are a programming error.
void unpark(std::uint64_t id);

/// Context owned by the calling thread for its lifetime.
ThreadContext& this_thread_context();

/// Parks the calling thread (whose context is `ctx`), counting the park.
Parker::Wake park(ThreadContext& ctx, Deadline deadline);

enum class SpinWaitOutcome { satisfied, timeout, interrupted };

struct SpinWaitOptions {
  Deadline deadline;
  bool interruptible = false;
  /// Overrides config().spin.spin_budget when set.
  std::optional<std::uint32_t> spin_budget;
};

/// Evaluates `ready` up to the spin budget, then parks in a loop until it
/// holds, the deadline passes or (if interruptible) an interrupt is pending.
/// Spurious wakeups are absorbed here. `ready` is always re-checked after a
/// timeout or interrupt is observed, so a late grant still reports satisfied.
template <class Ready>
SpinWaitOutcome spin_then_wait(ThreadContext& ctx, Ready&& ready, const SpinWaitOptions& opts = {}) {
  const SpinPolicy policy = config().spin;
  const std::uint32_t budget = opts.spin_budget.value_or(policy.spin_budget);
  for (std::uint32_t i = 0; i < budget; ++i) {
    if (ready()) return SpinWaitOutcome::satisfied;
    if (policy.pause_hint) cpu_relax();
  }
  for (;;) {
    if (ready()) return SpinWaitOutcome::satisfied;
    if (opts.interruptible && ctx.interrupt_pending().load(std::memory_order_acquire)) {
      return ready() ? SpinWaitOutcome::satisfied : SpinWaitOutcome::interrupted;
    }
    if (opts.deadline && Clock::now() >= *opts.deadline) {
      return ready() ? SpinWaitOutcome::satisfied : SpinWaitOutcome::timeout;
    }
    park(ctx, opts.deadline);
  }
}

}  // namespace cjm
