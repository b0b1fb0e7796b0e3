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

#include "cjm/hash.hpp"

#include <random>
#include <thread>

#include "cjm/platform.hpp"
#include "cjm/thread_context.hpp"

namespace cjm {

std::size_t PinTable::index(const QueueNode* node) {
  // Multiply-shift over the node's slot number.
  auto slot = reinterpret_cast<std::uintptr_t>(node) / kNodeAlignment;
  constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
  return static_cast<std::size_t>((slot * kGolden) >> 57) & (kStripes - 1);
}

void PinTable::pin(const QueueNode* node) {
  stripes_[index(node)].count.fetch_add(1, std::memory_order_seq_cst);
}

void PinTable::unpin(const QueueNode* node) {
  stripes_[index(node)].count.fetch_sub(1, std::memory_order_seq_cst);
}

std::int64_t PinTable::count(const QueueNode* node) const {
  return stripes_[index(node)].count.load(std::memory_order_seq_cst);
}

void PinTable::wait_until_unpinned(const QueueNode* node) const {
  const auto& stripe = stripes_[index(node)].count;
  for (std::uint32_t spins = 0; stripe.load(std::memory_order_seq_cst) != 0; ++spins) {
    if (spins < 256) {
      cpu_relax();
    } else {
      std::this_thread::yield();
    }
  }
}

PinTable& pin_table() {
  static PinTable table;
  return table;
}

std::uint32_t generate_hash() {
  // xorshift32 per thread; the seed mixes a random device draw with the
  // thread id so concurrent threads never share a sequence.
  thread_local std::uint32_t state = [] {
    std::random_device rd;
    auto seed = static_cast<std::uint32_t>(rd()) ^
                static_cast<std::uint32_t>(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    return seed == 0 ? 0x6d2b79f5u : seed;
  }();
  for (;;) {
    state ^= state << 13;
    state ^= state >> 17;
    state ^= state << 5;
    std::uint32_t h = state & 0x7fffffffu;
    if (h != 0) return h;
  }
}

std::uint64_t hash_of(ThreadContext& ctx, Monitor& monitor) {
  PinTable& pins = pin_table();
  for (;;) {
    MarkWord mark = monitor.load();
    if (mark.is_hashed()) return mark.hash();
    if (mark.is_neutral()) {
      monitor.try_transition(mark, MarkWord::hashed(generate_hash()));
      continue;
    }
    if (QueueNode* own = ctx.find_owned(monitor)) {
      return MarkWord{own->dmw.load(std::memory_order_acquire)}.hash();
    }
    QueueNode* tail = mark.tail();
    pins.pin(tail);
    if (monitor.load() == mark) {
      std::uint64_t dmw = tail->dmw.load(std::memory_order_acquire);
      pins.unpin(tail);
      if (dmw != 0) return MarkWord{dmw}.hash();
    } else {
      pins.unpin(tail);
    }
    cpu_relax();
  }
}

}  // namespace cjm
