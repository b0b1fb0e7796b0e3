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

#include "cjm/thread_context.hpp"

#include <algorithm>
#include <cassert>
#include <new>

#include "cjm/hash.hpp"

namespace cjm {

const char* to_string(NodeStatus status) {
  switch (status) {
    case NodeStatus::entry: return "Entry";
    case NodeStatus::owner: return "Owner";
    case NodeStatus::waiting: return "Waiting";
    case NodeStatus::claimed: return "Claimed";
  }
  return "?";
}

CounterSnapshot& CounterSnapshot::operator+=(const CounterSnapshot& o) {
  parks += o.parks;
  unparks += o.unparks;
  tail_swaps += o.tail_swaps;
  allocations += o.allocations;
  handoffs += o.handoffs;
  grants += o.grants;
  instant_acquires += o.instant_acquires;
  usurps += o.usurps;
  promotions += o.promotions;
  betas += o.betas;
  guard_acquisitions += o.guard_acquisitions;
  return *this;
}

CounterSnapshot operator-(CounterSnapshot a, const CounterSnapshot& b) {
  a.parks -= b.parks;
  a.unparks -= b.unparks;
  a.tail_swaps -= b.tail_swaps;
  a.allocations -= b.allocations;
  a.handoffs -= b.handoffs;
  a.grants -= b.grants;
  a.instant_acquires -= b.instant_acquires;
  a.usurps -= b.usurps;
  a.promotions -= b.promotions;
  a.betas -= b.betas;
  a.guard_acquisitions -= b.guard_acquisitions;
  return a;
}

CounterSnapshot Counters::snapshot() const {
  constexpr auto r = std::memory_order_relaxed;
  CounterSnapshot s;
  s.parks = parks.load(r);
  s.unparks = unparks.load(r);
  s.tail_swaps = tail_swaps.load(r);
  s.allocations = allocations.load(r);
  s.handoffs = handoffs.load(r);
  s.grants = grants.load(r);
  s.instant_acquires = instant_acquires.load(r);
  s.usurps = usurps.load(r);
  s.promotions = promotions.load(r);
  s.betas = betas.load(r);
  s.guard_acquisitions = guard_acquisitions.load(r);
  return s;
}

ThreadContext::ThreadContext(std::string name) : name_(std::move(name)) {
  id_ = Registry::instance().add(this);
  if (name_.empty()) name_ = "thread-" + std::to_string(id_);
}

ThreadContext::~ThreadContext() {
  assert(active_head_ == nullptr && "context destroyed while holding or waiting on monitors");
  Registry::instance().remove(this);
  while (free_head_ != nullptr) {
    QueueNode* node = free_head_;
    free_head_ = node->free_link;
    // A remote hash reader may still hold a pin covering this address.
    pin_table().wait_until_unpinned(node);
    delete node;
  }
}

QueueNode* ThreadContext::allocate_node(Monitor& monitor) {
  QueueNode* node = free_head_;
  if (node != nullptr) {
    free_head_ = node->free_link;
    --free_count_;
    pin_table().wait_until_unpinned(node);
  } else {
    node = new QueueNode(this);
    bump(counters_.allocations);
  }
  node->free_link = nullptr;
  node->next.store(nullptr, std::memory_order_relaxed);
  node->store_state(kEntry, std::memory_order_relaxed);
  node->dmw.store(0, std::memory_order_relaxed);
  node->waitset_head = nullptr;
  node->waitset_tail = nullptr;
  node->wait_next = nullptr;
  node->nesting = 0;
  node->saved_nesting = 0;
  node->monitor = &monitor;

  node->active_link = active_head_;
  active_head_ = node;
  ++active_count_;
  return node;
}

void ThreadContext::unlink_active(QueueNode* node) {
  QueueNode** link = &active_head_;
  while (*link != nullptr && *link != node) link = &(*link)->active_link;
  assert(*link == node && "node is not on this thread's active list");
  *link = node->active_link;
  node->active_link = nullptr;
  --active_count_;
}

void ThreadContext::release_node(QueueNode* node) {
  assert(node->home == this && "nodes are recycled only by their home thread");
  unlink_active(node);
  node->monitor = nullptr;
  node->waitset_head = nullptr;
  node->waitset_tail = nullptr;
  node->wait_next = nullptr;
  node->free_link = free_head_;
  free_head_ = node;
  ++free_count_;
}

QueueNode* ThreadContext::find_owned(const Monitor& monitor) const {
  for (QueueNode* n = active_head_; n != nullptr; n = n->active_link) {
    if (n->monitor == &monitor &&
        n->load_state(std::memory_order_relaxed).status() == NodeStatus::owner) {
      return n;
    }
  }
  return nullptr;
}

std::vector<QueueNode*> ThreadContext::active_nodes() const {
  std::vector<QueueNode*> out;
  for (QueueNode* n = active_head_; n != nullptr; n = n->active_link) out.push_back(n);
  return out;
}

std::vector<QueueNode*> ThreadContext::free_nodes() const {
  std::vector<QueueNode*> out;
  for (QueueNode* n = free_head_; n != nullptr; n = n->free_link) out.push_back(n);
  return out;
}

bool ThreadContext::on_free_list(const QueueNode* node) const {
  for (QueueNode* n = free_head_; n != nullptr; n = n->free_link) {
    if (n == node) return true;
  }
  return false;
}

Registry& Registry::instance() {
  static Registry registry;
  return registry;
}

std::uint64_t Registry::add(ThreadContext* ctx) {
  std::lock_guard lock(mutex_);
  contexts_.push_back(ctx);
  return next_id_++;
}

void Registry::remove(ThreadContext* ctx) {
  std::lock_guard lock(mutex_);
  std::erase(contexts_, ctx);
}

ThreadContext* Registry::find(std::uint64_t id) const {
  std::lock_guard lock(mutex_);
  for (ThreadContext* ctx : contexts_) {
    if (ctx->id() == id) return ctx;
  }
  return nullptr;
}

std::vector<ThreadContext*> Registry::snapshot() const {
  std::lock_guard lock(mutex_);
  return contexts_;
}

CounterSnapshot Registry::total_counters() const {
  std::lock_guard lock(mutex_);
  CounterSnapshot total;
  for (ThreadContext* ctx : contexts_) total += ctx->counters().snapshot();
  return total;
}

void unpark(ThreadContext& issuer, ThreadContext& target) {
  bump(issuer.counters().unparks);
  target.parker().unpark();
}

void unpark(std::uint64_t id) {
  ThreadContext* target = Registry::instance().find(id);
  assert(target != nullptr && "unpark of unknown thread id");
  if (target != nullptr) target->parker().unpark();
}

ThreadContext& this_thread_context() {
  thread_local ThreadContext ctx;
  return ctx;
}

Parker::Wake park(ThreadContext& ctx, Deadline deadline) {
  bump(ctx.counters().parks);
  return ctx.parker().park(deadline);
}

}  // namespace cjm
