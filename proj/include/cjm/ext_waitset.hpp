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

#include <array>
#include <atomic>
#include <cstdint>
#include <vector>

#include "cjm/monitor.hpp"

namespace cjm {

/// Test-and-set guard: spin per the global SpinPolicy, then block on the word.
class BucketGuard {
 public:
  void lock(ThreadContext& ctx);
  void unlock();

 private:
  std::atomic<std::uint32_t> word_{0};
};

/// One shared waitset bucket. The chain may mix waiters of different
/// monitors whose hashes collide.
struct WaitBucket {
  BucketGuard guard;
  QueueNode* head = nullptr;
  QueueNode* tail = nullptr;
};

/// Global hashed table of waitsets, used when
/// config().waitset_strategy == WaitsetStrategy::external.
class WaitTable {
 public:
  static constexpr std::size_t kBuckets = 64;

  static std::size_t index(std::uint64_t hash) { return hash & (kBuckets - 1); }

  WaitBucket& bucket_for(std::uint64_t hash) { return buckets_[index(hash)]; }

  /// Waiters currently parked in the bucket `hash` maps to, in order.
  /// Quiescent use only.
  std::vector<QueueNode*> snapshot(std::uint64_t hash);

 private:
  std::array<WaitBucket, kBuckets> buckets_{};
};

WaitTable& wait_table();

/// Appends `node` (the owner's node, about to wait) under the bucket guard.
void ext_wait_enqueue(ThreadContext& ctx, QueueNode* node, Monitor& monitor);

/// Moves the first (or every) waiter of `monitor` from its bucket onto the
/// monitor's MCS chain. IMSX when the caller is not the owner.
void ext_notify(ThreadContext& ctx, Monitor& monitor, bool all);

namespace detail {
WaitResult external_wait(ThreadContext& ctx, Monitor& monitor, QueueNode* node, Deadline deadline);
}  // namespace detail

}  // namespace cjm
