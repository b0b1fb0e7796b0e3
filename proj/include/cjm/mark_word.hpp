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
#include <cassert>
#include <cstdint>
#include <variant>

namespace cjm {

struct QueueNode;

/// Minimum alignment of every QueueNode. Only bit 0 is used as a tag today;
/// the remaining low bits stay free for future encodings.
inline constexpr std::size_t kNodeAlignment = 16;

/// Largest identity hash the mark can carry (63 bits, tag in bit 0).
inline constexpr std::uint64_t kMaxHash = (std::uint64_t{1} << 63) - 1;

/// The single-word monitor encoding.
///
///   raw == 0              neutral
///   raw & 1 == 1          hashed and unlocked, hash = raw >> 1 (nonzero)
///   raw != 0, raw & 1 == 0   queued, raw is the address of the MCS tail
class MarkWord {
 public:
  constexpr MarkWord() = default;
  constexpr explicit MarkWord(std::uint64_t raw) : raw_(raw) {}

  static constexpr MarkWord neutral() { return MarkWord{}; }

  static constexpr MarkWord hashed(std::uint64_t hash) {
    assert(hash != 0 && hash <= kMaxHash);
    return MarkWord{(hash << 1) | 1};
  }

  static MarkWord queued(const QueueNode* tail) {
    auto raw = reinterpret_cast<std::uintptr_t>(tail);
    assert(raw != 0 && raw % kNodeAlignment == 0);
    return MarkWord{static_cast<std::uint64_t>(raw)};
  }

  constexpr std::uint64_t raw() const { return raw_; }
  constexpr bool is_neutral() const { return raw_ == 0; }
  constexpr bool is_hashed() const { return (raw_ & 1) == 1; }
  constexpr bool is_queued() const { return raw_ != 0 && (raw_ & 1) == 0; }

  constexpr std::uint64_t hash() const {
    assert(is_hashed());
    return raw_ >> 1;
  }

  QueueNode* tail() const {
    assert(is_queued());
    return reinterpret_cast<QueueNode*>(static_cast<std::uintptr_t>(raw_));
  }

  friend constexpr bool operator==(MarkWord, MarkWord) = default;

 private:
  std::uint64_t raw_ = 0;
};

struct Neutral {
  friend constexpr bool operator==(Neutral, Neutral) = default;
};
struct Hashed {
  std::uint64_t hash;
  friend constexpr bool operator==(Hashed, Hashed) = default;
};
struct Queued {
  QueueNode* tail;
  friend constexpr bool operator==(Queued, Queued) = default;
};

using MarkVariant = std::variant<Neutral, Hashed, Queued>;

MarkVariant decode(MarkWord word);
MarkWord encode(const MarkVariant& variant);

constexpr MarkWord encode_hashed(std::uint64_t hash) { return MarkWord::hashed(hash); }

/// A monitor is one atomic mark word. Its identity is its address, so it is
/// neither copyable nor movable.
class Monitor {
 public:
  Monitor() = default;
  Monitor(const Monitor&) = delete;
  Monitor& operator=(const Monitor&) = delete;

  MarkWord load(std::memory_order order = std::memory_order_seq_cst) const {
    return MarkWord{mark_.load(order)};
  }

  /// Appends `node` as the new MCS tail and returns the previous word.
  MarkWord swap_tail(QueueNode* node) {
    return MarkWord{mark_.exchange(MarkWord::queued(node).raw(), std::memory_order_seq_cst)};
  }

  bool try_transition(MarkWord expected, MarkWord desired) {
    auto raw = expected.raw();
    return mark_.compare_exchange_strong(raw, desired.raw(), std::memory_order_seq_cst);
  }

  const void* identity() const { return this; }

 private:
  std::atomic<std::uint64_t> mark_{0};
};

}  // namespace cjm
