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

#include <cstdint>
#include <string>
#include <vector>

#include "cjm/platform.hpp"
#include "cjm/thread_context.hpp"

namespace cjm::harness {

/// Relative operation weights.
struct OpMix {
  unsigned lock = 70;
  unsigned wait = 10;
  unsigned notify = 10;
  unsigned hash = 10;
};

/// Parses "lock:70,wait:10,notify:10,hash:10". Omitted keys weigh zero.
/// Throws std::invalid_argument on unknown keys or an all-zero mix.
OpMix parse_mix(const std::string& text);

struct StressOptions {
  std::size_t threads = 4;
  std::size_t monitors = 4;
  std::size_t iters = 10000;  // per thread
  std::uint64_t seed = 1;
  OpMix mix;
  /// Share of waits given a timeout, in percent.
  unsigned timed_wait_percent = 50;
  std::uint32_t max_timeout_us = 2000;
  std::size_t max_depth = 3;
  WaitsetStrategy strategy = WaitsetStrategy::chain;
  std::uint32_t spin = SpinPolicy{}.spin_budget;
};

struct StressReport {
  bool ok = true;
  std::vector<std::string> problems;
  double seconds = 0;
  CounterSnapshot totals;
  std::uint64_t waits = 0, notified = 0, timed_out = 0, interrupted = 0;
  std::size_t max_nodes = 0;       // largest per-thread allocation
  std::size_t footprint_bound = 0; // what max_nodes was checked against
  std::vector<std::uint64_t> counters;     // final guarded counter per monitor
  std::vector<std::uint64_t> expected;     // increments the threads made
  std::vector<std::uint64_t> final_marks;  // raw mark words at quiescence
  std::vector<std::uint64_t> first_hashes; // first hash seen per monitor, 0 if never sampled
  std::string summary() const;
};

/// Random lock/wait/notify/hash traffic over shared monitors. Locks nest up to
/// max_depth in ascending monitor order, so the run cannot deadlock. Checks:
/// guarded counters exact, hash never changes, every monitor ends deflated
/// to its first hash, per-thread nodes within the footprint bound, every
/// wait resolved, chains clean.
StressReport run_stress(const StressOptions& options);

}  // namespace cjm::harness
