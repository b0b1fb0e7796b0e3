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

#include "cjm/thread_context.hpp"

namespace cjm::harness {

struct BenchOptions {
  std::size_t max_threads = 4;
  std::size_t monitors = 1;
  std::string baseline = "mcs";
  std::uint32_t duration_ms = 200;            // per contended point
  std::uint64_t uncontended_ops = 2'000'000;  // lock/unlock pairs per uncontended sample
  unsigned samples = 5;                        // best of, uncontended
  unsigned contended_repeats = 3;              // median of, per contended point
};

struct BenchRow {
  std::string lock;  // "cjm" or the baseline name
  std::size_t threads = 0;
  std::size_t monitors = 0;
  double ops_per_sec = 0;
  double ns_per_op = 0;
  CounterSnapshot counters;
};

struct BenchReport {
  std::vector<BenchRow> rows;  // uncontended rows have threads == 0
  double uncontended_cjm_ns = 0;
  double uncontended_baseline_ns = 0;
  /// handoffs == grants - instant_acquires on every row.
  bool handoff_identity = true;
  std::vector<std::string> notes;
};

/// Lock/unlock throughput of the library against the baseline: one
/// uncontended single-thread point, then 1..max_threads threads hammering
/// `monitors` locks for duration_ms each.
BenchReport run_bench(const BenchOptions& options);

/// Fixed column order: config fields, then counters.
std::string bench_csv_header();
std::string bench_csv_row(const BenchRow& row);
void write_bench_csv(const BenchReport& report, const std::string& path);

}  // namespace cjm::harness
