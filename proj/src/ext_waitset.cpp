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

#include "cjm/ext_waitset.hpp"

#include <cassert>

namespace cjm {

void BucketGuard::lock(ThreadContext& ctx) {
  bump(ctx.counters().guard_acquisitions);
  const SpinPolicy policy = config().spin;
  for (std::uint32_t i = 0;; ++i) {
    if (word_.exchange(1, std::memory_order_acquire) == 0) return;
    if (i < policy.spin_budget) {
      if (policy.pause_hint) cpu_relax();
      continue;
    }
    word_.wait(1, std::memory_order_relaxed);
  }
}

void BucketGuard::unlock() {
  word_.store(0, std::memory_order_release);
  word_.notify_one();
}

WaitTable& wait_table() {
  static WaitTable table;
  return table;
}

std::vector<QueueNode*> WaitTable::snapshot(std::uint64_t hash) {
  std::vector<QueueNode*> out;
  for (QueueNode* n = bucket_for(hash).head; n != nullptr; n = n->wait_next) out.push_back(n);
  return out;
}

namespace {

std::uint64_t hash_of_owned(const QueueNode* owner) {
  return MarkWord{owner->dmw.load(std::memory_order_relaxed)}.hash();
}

void bucket_unlink(WaitBucket& bucket, QueueNode* prev, QueueNode* node) {
  if (prev != nullptr) {
    prev->wait_next = node->wait_next;
  } else {
    bucket.head = node->wait_next;
  }
  if (bucket.tail == node) bucket.tail = prev;
  node->wait_next = nullptr;
}

}  // namespace

void ext_wait_enqueue(ThreadContext& ctx, QueueNode* node, Monitor& monitor) {
  assert(node->monitor == &monitor);
  (void)monitor;
  WaitBucket& bucket = wait_table().bucket_for(hash_of_owned(node));
  bucket.guard.lock(ctx);
  node->wait_next = nullptr;
  if (bucket.tail != nullptr) {
    bucket.tail->wait_next = node;
  } else {
    bucket.head = node;
  }
  bucket.tail = node;
  node->store_state(kWaiting);
  bucket.guard.unlock();
}

void ext_notify(ThreadContext& ctx, Monitor& monitor, bool all) {
  QueueNode* owner = ctx.find_owned(monitor);
  if (owner == nullptr) throw IllegalMonitorState(all ? "notifyAll" : "notify");

  WaitBucket& bucket = wait_table().bucket_for(hash_of_owned(owner));
  QueueNode* first = nullptr;
  QueueNode* last = nullptr;
  bucket.guard.lock(ctx);
  QueueNode* prev = nullptr;
  for (QueueNode* n = bucket.head; n != nullptr;) {
    QueueNode* following = n->wait_next;
    if (n->monitor != &monitor) {
      prev = n;
      n = following;
      continue;
    }
    bucket_unlink(bucket, prev, n);
    // Cancellers also hold the guard, so this cannot lose.
    const bool morphed = n->cas_state(kWaiting, kEntry);
    assert(morphed);
    (void)morphed;
    n->next.store(nullptr, std::memory_order_relaxed);
    if (last != nullptr) {
      last->next.store(n, std::memory_order_relaxed);
    } else {
      first = n;
    }
    last = n;
    if (!all) break;
    n = following;
  }
  bucket.guard.unlock();

  if (first != nullptr) detail::append_segment(ctx, monitor, first, last);
}

namespace detail {

WaitResult external_wait(ThreadContext& ctx, Monitor& monitor, QueueNode* node, Deadline deadline) {
  const std::uint32_t depth = node->nesting;
  node->saved_nesting = depth;
  node->nesting = 0;
  assert(node->waitset_head == nullptr);

  WaitBucket& bucket = wait_table().bucket_for(hash_of_owned(node));
  ext_wait_enqueue(ctx, node, monitor);
  release_ownership(ctx, monitor, node);

  auto granted = [node] {
    return node->load_state(std::memory_order_acquire).status() == NodeStatus::owner;
  };
  ctx.set_blocked(&monitor, BlockedKind::wait);
  const SpinWaitOutcome outcome = spin_then_wait(ctx, granted, SpinWaitOptions{deadline, true, 0u});
  ctx.clear_blocked();

  WaitResult result = WaitResult::notified;
  if (outcome != SpinWaitOutcome::satisfied) {
    bool removed = false;
    bucket.guard.lock(ctx);
    if (node->load_state() == kWaiting) {
      QueueNode* prev = nullptr;
      QueueNode* n = bucket.head;
      while (n != node) {
        prev = n;
        n = n->wait_next;
      }
      bucket_unlink(bucket, prev, node);
      node->store_state(kClaimed);
      removed = true;
    }
    bucket.guard.unlock();

    if (removed) {
      // Reacquire through the same node: no beta, no placeholder.
      node->next.store(nullptr, std::memory_order_relaxed);
      node->dmw.store(0, std::memory_order_relaxed);
      node->store_state(kEntry);
      acquire_with_node(ctx, monitor, node);
      result = outcome == SpinWaitOutcome::interrupted ? WaitResult::interrupted
                                                       : WaitResult::timed_out;
    } else {
      ctx.set_blocked(&monitor, BlockedKind::entry);
      spin_then_wait(ctx, granted, SpinWaitOptions{{}, false, 0u});
      ctx.clear_blocked();
    }
  }

  node->nesting = depth;
  if (result == WaitResult::interrupted) ctx.interrupt_pending().store(false, std::memory_order_release);
  return result;
}

}  // namespace detail
}  // namespace cjm
