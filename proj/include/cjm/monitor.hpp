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
#include <optional>
#include <stdexcept>

#include "cjm/mark_word.hpp"
#include "cjm/thread_context.hpp"

namespace cjm {

/// Raised by unlock, wait, notify and notify_all when the caller does not own
/// the monitor.
class IllegalMonitorState : public std::logic_error {
 public:
  explicit IllegalMonitorState(const char* op)
      : std::logic_error(std::string(op) + ": current thread is not owner") {}
};

enum class WaitResult { notified, timed_out, interrupted };

const char* to_string(WaitResult r);

void lock(ThreadContext& ctx, Monitor& monitor);
void unlock(ThreadContext& ctx, Monitor& monitor);
bool holds_lock(const ThreadContext& ctx, const Monitor& monitor);

/// Blocks until notified, `timeout` elapses or the thread is interrupted.
/// The caller holds the monitor again, at its previous recursion depth, on return.
WaitResult wait(ThreadContext& ctx, Monitor& monitor,
                std::optional<std::chrono::nanoseconds> timeout = std::nullopt);
void notify(ThreadContext& ctx, Monitor& monitor);
void notify_all(ThreadContext& ctx, Monitor& monitor);

/// Marks `target` interrupted and wakes it. Only wait() observes the flag.
void interrupt(ThreadContext& issuer, ThreadContext& target);

/// RAII holder for lexically scoped locking.
class MonitorGuard {
 public:
  MonitorGuard(ThreadContext& ctx, Monitor& monitor) : ctx_(ctx), monitor_(monitor) {
    lock(ctx_, monitor_);
  }
  ~MonitorGuard() { unlock(ctx_, monitor_); }
  MonitorGuard(const MonitorGuard&) = delete;
  MonitorGuard& operator=(const MonitorGuard&) = delete;

 private:
  ThreadContext& ctx_;
  Monitor& monitor_;
};

namespace detail {

/// Enqueues a fresh node and blocks until it owns `monitor`. Skips the
/// recursion check; used by lock() and by the beta element of cancel_wait.
QueueNode* acquire_new_node(ThreadContext& ctx, Monitor& monitor);

/// Enqueues an already-allocated node (status Entry, dmw set or 0) and blocks
/// until it owns `monitor`.
void acquire_with_node(ThreadContext& ctx, Monitor& monitor, QueueNode* node);

/// Gives up ownership held through `owner` without recycling it: deflates,
/// promotes a placeholder, or hands off with the waitset attached.
void release_ownership(ThreadContext& ctx, Monitor& monitor, QueueNode* owner);

/// Waits for `node.next` to resolve and passes ownership (and `owner`'s
/// waitset) to that successor.
void hand_off(ThreadContext& ctx, QueueNode* owner);

/// Morphs `first..last` (already linked through `next`, statuses Entry)
/// onto the tail of `monitor`'s chain with one swap.
void append_segment(ThreadContext& ctx, Monitor& monitor, QueueNode* first, QueueNode* last);

WaitResult chain_wait(ThreadContext& ctx, Monitor& monitor, QueueNode* node, Deadline deadline);
void chain_notify(ThreadContext& ctx, Monitor& monitor, QueueNode* owner, bool all);

/// Waitset helpers; only the owner of the list's monitor may call them.
void waitset_append(QueueNode* head_holder, QueueNode* waiter);
QueueNode* waitset_pop(QueueNode* head_holder);
bool waitset_remove(QueueNode* head_holder, QueueNode* waiter);

}  // namespace detail
}  // namespace cjm
