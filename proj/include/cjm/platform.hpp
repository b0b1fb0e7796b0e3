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
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <optional>
#include <thread>

namespace cjm {

using Clock = std::chrono::steady_clock;
using Deadline = std::optional<Clock::time_point>;

inline void cpu_relax() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_ia32_pause();
#elif defined(__aarch64__)
  asm volatile("yield" ::: "memory");
#else
  std::atomic_signal_fence(std::memory_order_seq_cst);
#endif
}

/// Busy-wait step for short protocol windows (an MCS link about to resolve,
/// a peer mid-way through a state change). Yields after a few rounds so a
/// preempted peer can make progress on an oversubscribed machine.
class Backoff {
 public:
  void pause() {
    if (++rounds_ < 64) {
      cpu_relax();
    } else {
      std::this_thread::yield();
    }
  }

 private:
  std::uint32_t rounds_ = 0;
};

/// 1024 on multiprocessors, 0 on a single CPU where the awaited thread cannot
/// run while we spin.
std::uint32_t default_spin_budget();

struct SpinPolicy {
  std::uint32_t spin_budget = default_spin_budget();
  bool pause_hint = true;
};

enum class WaitsetStrategy { chain, external };

/// Process-wide tunables. Read on every slow path; change them only while no
/// thread is inside the library.
struct Config {
  SpinPolicy spin;
  WaitsetStrategy waitset_strategy = WaitsetStrategy::chain;
};

Config& config();

/// Applies CJM_SPIN, CJM_PAUSE and CJM_WAITSET_STRATEGY from the environment.
void load_config_from_env();

/// Binary permit. unpark() before park() makes the next park() return at once;
/// repeated unparks collapse into one permit.
class Parker {
 public:
  enum class Wake { unparked, timeout };

  Wake park(Deadline deadline);
  void unpark();

  bool has_permit() const { return state_.load(std::memory_order_acquire) == kPermit; }

 private:
  static constexpr int kEmpty = 0;
  static constexpr int kPermit = 1;
  static constexpr int kParked = -1;

  std::atomic<int> state_{kEmpty};
  std::mutex mutex_;
  std::condition_variable cv_;
};

}  // namespace cjm
