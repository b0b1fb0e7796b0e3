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

#include "cjm/mark_word.hpp"

namespace cjm {

class ThreadContext;
struct QueueNode;

/// Striped reference counts keyed by node address. A hash reader pins the
/// tail node it is about to dereference; a thread recycling a node waits for
/// that node's stripe to drain. Stripe collisions only cause extra waiting.
class PinTable {
 public:
  static constexpr std::size_t kStripes = 128;

  static std::size_t index(const QueueNode* node);

  void pin(const QueueNode* node);
  void unpin(const QueueNode* node);
  std::int64_t count(const QueueNode* node) const;

  /// Spins until the stripe covering `node` reads 0.
  void wait_until_unpinned(const QueueNode* node) const;

 private:
  struct alignas(64) Stripe {
    std::atomic<std::int64_t> count{0};
  };
  std::array<Stripe, kStripes> stripes_{};
};

PinTable& pin_table();

/// Thread-locally seeded 31-bit nonzero identity hash.
std::uint32_t generate_hash();

/// Identity hash of `monitor`, assigning one if the monitor has none.
/// Never blocks; retries only while the mark is in flux.
std::uint64_t hash_of(ThreadContext& ctx, Monitor& monitor);

}  // namespace cjm
