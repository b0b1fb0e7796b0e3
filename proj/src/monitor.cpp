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

#include "cjm/monitor.hpp"

#include <cassert>

#include "cjm/ext_waitset.hpp"
#include "cjm/hash.hpp"

namespace cjm {

const char* to_string(WaitResult r) {
  switch (r) {
    case WaitResult::notified: return "notified";
    case WaitResult::timed_out: return "timedout";
    case WaitResult::interrupted: return "interrupted";
  }
  return "?";
}

namespace detail {

void waitset_append(QueueNode* holder, QueueNode* waiter) {
  waiter->wait_next = nullptr;
  if (holder->waitset_tail != nullptr) {
    holder->waitset_tail->wait_next = waiter;
  } else {
    holder->waitset_head = waiter;
  }
  holder->waitset_tail = waiter;
}

QueueNode* waitset_pop(QueueNode* holder) {
  QueueNode* w = holder->waitset_head;
  if (w == nullptr) return nullptr;
  holder->waitset_head = w->wait_next;
  if (holder->waitset_head == nullptr) holder->waitset_tail = nullptr;
  w->wait_next = nullptr;
  return w;
}

bool waitset_remove(QueueNode* holder, QueueNode* waiter) {
  QueueNode* prev = nullptr;
  for (QueueNode* w = holder->waitset_head; w != nullptr; prev = w, w = w->wait_next) {
    if (w != waiter) continue;
    if (prev != nullptr) {
      prev->wait_next = w->wait_next;
    } else {
      holder->waitset_head = w->wait_next;
    }
    if (holder->waitset_tail == w) holder->waitset_tail = prev;
    w->wait_next = nullptr;
    return true;
  }
  return false;
}

void acquire_with_node(ThreadContext& ctx, Monitor& monitor, QueueNode* node) {
  Counters& stats = ctx.counters();
  const MarkWord prior = monitor.swap_tail(node);
  bump(stats.tail_swaps);

  if (!prior.is_queued()) {
    // Locked implies hashed: the first lock of a neutral monitor assigns the hash.
    const MarkWord dmw = prior.is_hashed() ? prior : MarkWord::hashed(generate_hash());
    node->dmw.store(dmw.raw(), std::memory_order_release);
    node->store_state(kOwner, std::memory_order_release);
    bump(stats.grants);
    bump(stats.instant_acquires);
    return;
  }

  QueueNode* pred = prior.tail();
  Backoff backoff;
  for (;;) {
    const NodeState ps = pred->load_state();
    if (ps == kPlaceholder) {
      if (!pred->cas_state(kPlaceholder, kWaiting)) continue;
      // Usurp: the placeholder and its waitset move onto our node.
      node->dmw.store(pred->dmw.load(std::memory_order_acquire), std::memory_order_release);
      node->waitset_head = pred->waitset_head;
      node->waitset_tail = pred->waitset_tail;
      pred->waitset_head = nullptr;
      pred->waitset_tail = nullptr;
      node->store_state(kOwner, std::memory_order_release);
      bump(stats.grants);
      bump(stats.instant_acquires);
      bump(stats.usurps);
      return;
    }
    // Claimed on the chain only while an unlocker is installing pred as
    // placeholder; it settles within a few instructions.
    if (ps != kClaimed) break;
    backoff.pause();
  }

  // Pull the displaced mark forward before linking; until pred.next is set
  // pred cannot hand off, so its dmw is stable.
  std::uint64_t dmw;
  while ((dmw = pred->dmw.load(std::memory_order_acquire)) == 0) backoff.pause();
  node->dmw.store(dmw, std::memory_order_release);

  pred->next.store(node, std::memory_order_release);
  ctx.set_blocked(&monitor, BlockedKind::entry);
  spin_then_wait(ctx, [node] {
    return node->load_state(std::memory_order_acquire).status() == NodeStatus::owner;
  });
  ctx.clear_blocked();
  bump(stats.grants);
}

QueueNode* acquire_new_node(ThreadContext& ctx, Monitor& monitor) {
  QueueNode* node = ctx.allocate_node(monitor);
  acquire_with_node(ctx, monitor, node);
  return node;
}

void hand_off(ThreadContext& ctx, QueueNode* owner) {
  QueueNode* succ;
  Backoff backoff;
  while ((succ = owner->next.load(std::memory_order_acquire)) == nullptr) backoff.pause();

  succ->waitset_head = owner->waitset_head;
  succ->waitset_tail = owner->waitset_tail;
  owner->waitset_head = nullptr;
  owner->waitset_tail = nullptr;
  owner->next.store(nullptr, std::memory_order_relaxed);

  // succ may run, unlock and recycle itself as soon as it sees Owner.
  ThreadContext& target = *succ->home;
  succ->store_state(kOwner, std::memory_order_release);
  bump(ctx.counters().handoffs);
  unpark(ctx, target);
}

void release_ownership(ThreadContext& ctx, Monitor& monitor, QueueNode* owner) {
  const MarkWord self = MarkWord::queued(owner);
  for (;;) {
    if (owner->waitset_head == nullptr) {
      if (monitor.try_transition(self, MarkWord{owner->dmw.load(std::memory_order_relaxed)})) {
        return;
      }
      hand_off(ctx, owner);
      return;
    }
    assert(config().waitset_strategy == WaitsetStrategy::chain &&
           "external waitsets never leave a waitset on the chain");
    if (monitor.load() != self) break;

    // Waiters but no successor: install the first live waiter as the
    // placeholder so the waitset stays reachable from the mark.
    QueueNode* w = owner->waitset_head;
    while (w != nullptr && !w->cas_state(kWaiting, kClaimed)) {
      // Cancelled waiter; its beta owner will not find it, which is fine.
      waitset_pop(owner);
      w = owner->waitset_head;
    }
    if (w == nullptr) continue;

    w->next.store(nullptr, std::memory_order_relaxed);
    w->waitset_head = owner->waitset_head;
    w->waitset_tail = owner->waitset_tail;
    if (monitor.try_transition(self, MarkWord::queued(w))) {
      owner->waitset_head = nullptr;
      owner->waitset_tail = nullptr;
      w->store_state(kPlaceholder);
      bump(ctx.counters().promotions);
      return;
    }
    w->waitset_head = nullptr;
    w->waitset_tail = nullptr;
    w->store_state(kWaiting);
    break;
  }
  hand_off(ctx, owner);
}

void append_segment(ThreadContext& ctx, Monitor& monitor, QueueNode* first, QueueNode* last) {
  last->next.store(nullptr, std::memory_order_relaxed);
  const MarkWord prior = monitor.swap_tail(last);
  bump(ctx.counters().tail_swaps);
  assert(prior.is_queued() && "caller owns the monitor, so the chain is non-empty");
  prior.tail()->next.store(first, std::memory_order_release);
}

void chain_notify(ThreadContext& ctx, Monitor& monitor, QueueNode* owner, bool all) {
  QueueNode* first = nullptr;
  QueueNode* last = nullptr;
  while (QueueNode* w = waitset_pop(owner)) {
    // Loses only to a cancelling waiter, which then owns the node's fate.
    if (!w->cas_state(kWaiting, kEntry)) continue;
    w->next.store(nullptr, std::memory_order_relaxed);
    if (last != nullptr) {
      last->next.store(w, std::memory_order_relaxed);
    } else {
      first = w;
    }
    last = w;
    if (!all) break;
  }
  if (first != nullptr) append_segment(ctx, monitor, first, last);
}

namespace {

WaitResult cancelled_result(SpinWaitOutcome outcome) {
  return outcome == SpinWaitOutcome::interrupted ? WaitResult::interrupted : WaitResult::timed_out;
}

bool is_owner(const QueueNode* node) {
  return node->load_state(std::memory_order_acquire).status() == NodeStatus::owner;
}

}  // namespace

WaitResult chain_wait(ThreadContext& ctx, Monitor& monitor, QueueNode* node, Deadline deadline) {
  const std::uint32_t depth = node->nesting;
  node->saved_nesting = depth;
  node->nesting = 0;

  waitset_append(node, node);
  node->store_state(kPlaceholder);
  if (monitor.load() != MarkWord::queued(node)) {
    // A successor exists (or is arriving). If no arrival usurped us first,
    // pass ownership and the waitset down the chain.
    if (node->cas_state(kPlaceholder, kWaiting)) hand_off(ctx, node);
  }

  ctx.set_blocked(&monitor, BlockedKind::wait);
  SpinWaitOptions opts{deadline, true, 0u};
  const SpinWaitOutcome outcome = spin_then_wait(ctx, [node] { return is_owner(node); }, opts);
  ctx.clear_blocked();

  if (outcome == SpinWaitOutcome::satisfied) {
    node->nesting = depth;
    return WaitResult::notified;
  }

  // Deadline or interrupt: settle the node's fate with one CAS.
  QueueNode* owner = node;
  WaitResult result = WaitResult::notified;
  Backoff backoff;
  for (;;) {
    const NodeState s = node->load_state();
    if (s == kOwner) break;
    if (s == kEntry) {
      // Morphed by a notify before we could cancel; acquisition is not
      // interruptible.
      ctx.set_blocked(&monitor, BlockedKind::entry);
      spin_then_wait(ctx, [node] { return is_owner(node); }, SpinWaitOptions{{}, false, 0u});
      ctx.clear_blocked();
      break;
    }
    if (s == kPlaceholder) {
      if (!node->cas_state(kPlaceholder, kOwner)) continue;
      // We are the chain head: own the monitor directly.
      waitset_remove(node, node);
      result = cancelled_result(outcome);
      break;
    }
    if (s == kWaiting) {
      if (!node->cas_state(kWaiting, kClaimed)) continue;
      // Beta element: acquire through a second node, then excise the
      // original from whatever waitset reached us.
      bump(ctx.counters().betas);
      owner = acquire_new_node(ctx, monitor);
      waitset_remove(owner, node);
      ctx.release_node(node);
      result = cancelled_result(outcome);
      break;
    }
    backoff.pause();  // Claimed by an unlocker promoting us
  }

  owner->nesting = depth;
  if (result == WaitResult::interrupted) ctx.interrupt_pending().store(false, std::memory_order_release);
  return result;
}

}  // namespace detail

void lock(ThreadContext& ctx, Monitor& monitor) {
  if (QueueNode* held = ctx.find_owned(monitor)) {
    ++held->nesting;
    return;
  }
  detail::acquire_new_node(ctx, monitor);
}

void unlock(ThreadContext& ctx, Monitor& monitor) {
  QueueNode* node = ctx.find_owned(monitor);
  if (node == nullptr) throw IllegalMonitorState("unlock");
  if (node->nesting > 0) {
    --node->nesting;
    return;
  }
  detail::release_ownership(ctx, monitor, node);
  ctx.release_node(node);
}

bool holds_lock(const ThreadContext& ctx, const Monitor& monitor) {
  return ctx.find_owned(monitor) != nullptr;
}

WaitResult wait(ThreadContext& ctx, Monitor& monitor, std::optional<std::chrono::nanoseconds> timeout) {
  QueueNode* node = ctx.find_owned(monitor);
  if (node == nullptr) throw IllegalMonitorState("wait");
  if (ctx.interrupt_pending().exchange(false, std::memory_order_acq_rel)) {
    return WaitResult::interrupted;
  }
  Deadline deadline;
  if (timeout) deadline = Clock::now() + *timeout;
  if (config().waitset_strategy == WaitsetStrategy::external) {
    return detail::external_wait(ctx, monitor, node, deadline);
  }
  return detail::chain_wait(ctx, monitor, node, deadline);
}

void notify(ThreadContext& ctx, Monitor& monitor) {
  if (config().waitset_strategy == WaitsetStrategy::external) {
    ext_notify(ctx, monitor, false);
    return;
  }
  QueueNode* node = ctx.find_owned(monitor);
  if (node == nullptr) throw IllegalMonitorState("notify");
  detail::chain_notify(ctx, monitor, node, false);
}

void notify_all(ThreadContext& ctx, Monitor& monitor) {
  if (config().waitset_strategy == WaitsetStrategy::external) {
    ext_notify(ctx, monitor, true);
    return;
  }
  QueueNode* node = ctx.find_owned(monitor);
  if (node == nullptr) throw IllegalMonitorState("notifyAll");
  detail::chain_notify(ctx, monitor, node, true);
}

void interrupt(ThreadContext& issuer, ThreadContext& target) {
  target.interrupt_pending().store(true, std::memory_order_release);
  unpark(issuer, target);
}

}  // namespace cjm
