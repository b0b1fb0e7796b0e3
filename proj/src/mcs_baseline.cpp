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

#include "cjm/mcs_baseline.hpp"

#include <cassert>

namespace cjm {

void PlainMcsLock::lock(ThreadContext& ctx) {
  QueueNode* node = ctx.allocate_node(key_);
  QueueNode* pred = tail_.exchange(node, std::memory_order_acq_rel);
  bump(ctx.counters().tail_swaps);
  if (pred == nullptr) {
    node->store_state(kOwner, std::memory_order_relaxed);
    bump(ctx.counters().grants);
    bump(ctx.counters().instant_acquires);
    return;
  }
  pred->next.store(node, std::memory_order_release);
  spin_then_wait(ctx, [node] {
    return node->load_state(std::memory_order_acquire).status() == NodeStatus::owner;
  });
  bump(ctx.counters().grants);
}

void PlainMcsLock::unlock(ThreadContext& ctx) {
  QueueNode* node = ctx.find_owned(key_);
  assert(node != nullptr && "unlock of a PlainMcsLock not held by this thread");
  QueueNode* expected = node;
  if (!tail_.compare_exchange_strong(expected, nullptr, std::memory_order_acq_rel)) {
    QueueNode* succ;
    Backoff backoff;
    while ((succ = node->next.load(std::memory_order_acquire)) == nullptr) backoff.pause();
    ThreadContext& target = *succ->home;
    succ->store_state(kOwner, std::memory_order_release);
    bump(ctx.counters().handoffs);
    unpark(ctx, target);
  }
  ctx.release_node(node);
}

}  // namespace cjm
