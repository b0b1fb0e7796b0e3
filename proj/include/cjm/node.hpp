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

#include "cjm/mark_word.hpp"

namespace cjm {

class ThreadContext;

enum class NodeStatus : std::uint8_t { entry = 0, owner = 1, waiting = 2, claimed = 3 };

const char* to_string(NodeStatus status);

/// Value of a node's status word. A Waiting node left alone at the head of
/// the MCS chain additionally carries the placeholder bit; the bit lives in
/// the same atomic so a single compare-exchange settles every
/// placeholder race (usurper, self-cancel, wait-time handoff).
class NodeState {
 public:
  constexpr NodeState() = default;
  constexpr NodeState(NodeStatus status, bool placeholder = false)  // NOLINT
      : raw_(static_cast<std::uint8_t>(static_cast<std::uint8_t>(status) |
                                       (placeholder ? kPlaceholderBit : 0))) {}

  static constexpr NodeState from_raw(std::uint8_t raw) {
    NodeState s;
    s.raw_ = raw;
    return s;
  }

  constexpr NodeStatus status() const { return static_cast<NodeStatus>(raw_ & 3); }
  constexpr bool placeholder() const { return (raw_ & kPlaceholderBit) != 0; }
  constexpr std::uint8_t raw() const { return raw_; }

  friend constexpr bool operator==(NodeState, NodeState) = default;

 private:
  static constexpr std::uint8_t kPlaceholderBit = 4;
  std::uint8_t raw_ = 0;
};

inline constexpr NodeState kEntry{NodeStatus::entry};
inline constexpr NodeState kOwner{NodeStatus::owner};
inline constexpr NodeState kWaiting{NodeStatus::waiting};
inline constexpr NodeState kPlaceholder{NodeStatus::waiting, true};
inline constexpr NodeState kClaimed{NodeStatus::claimed};

/// MCS queue element augmented with monitor state. One per (thread, monitor
/// held or waited on). Fields below the atomics are touched only by the
/// node's home thread or by the current owner of `monitor`.
struct alignas(kNodeAlignment) QueueNode {
  explicit QueueNode(ThreadContext* home_thread) : home(home_thread) {}

  std::atomic<QueueNode*> next{nullptr};
  std::atomic<std::uint8_t> state{kEntry.raw()};
  /// Displaced mark: 0 until pulled from the predecessor, then a hashed word.
  std::atomic<std::uint64_t> dmw{0};

  // Non-null only on the chain head (owner or placeholder).
  QueueNode* waitset_head = nullptr;
  QueueNode* waitset_tail = nullptr;
  QueueNode* wait_next = nullptr;

  std::uint32_t nesting = 0;
  std::uint32_t saved_nesting = 0;
  Monitor* monitor = nullptr;

  ThreadContext* const home;
  QueueNode* active_link = nullptr;
  QueueNode* free_link = nullptr;

  NodeState load_state(std::memory_order order = std::memory_order_seq_cst) const {
    return NodeState::from_raw(state.load(order));
  }
  NodeStatus status() const { return load_state().status(); }
  void store_state(NodeState s, std::memory_order order = std::memory_order_seq_cst) {
    state.store(s.raw(), order);
  }
  bool cas_state(NodeState expected, NodeState desired) {
    auto raw = expected.raw();
    return state.compare_exchange_strong(raw, desired.raw(), std::memory_order_seq_cst);
  }
};

static_assert(alignof(QueueNode) >= 8, "tag bit requires 8-byte aligned nodes");

}  // namespace cjm
