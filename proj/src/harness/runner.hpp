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

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cjm/platform.hpp"
#include "scenario.hpp"
#include "system.hpp"

namespace cjm::harness {

struct RunOptions {
  /// Priority order for controlled execution: a multiset of thread indices,
  /// each thread appearing once per step. Empty runs threads freely.
  std::vector<int> schedule;
  std::chrono::milliseconds watchdog{30000};
};

/// What one execution of a scenario produced.
struct RunRecord {
  std::string system;
  std::vector<std::vector<std::string>> traces;  // per thread, observable events
  std::vector<std::vector<std::string>> grants;  // per monitor, thread names in grant order
  std::vector<std::string> failures;             // assertion failures and audit problems
};

/// Runs every thread program of `sc` on its own OS thread against `system`.
/// A run that outlives the watchdog dumps `system` state to stderr and
/// terminates the process: stuck threads cannot be reclaimed.
RunRecord execute(const Scenario& sc, MonitorSystem& system, const RunOptions& options = {});

struct ScenarioOptions {
  WaitsetStrategy strategy = WaitsetStrategy::chain;
  std::uint32_t spin = SpinPolicy{}.spin_budget;
  bool compare_oracle = true;
  /// Per-thread node bound audited on the library side; 0 disables.
  std::size_t footprint_bound = 0;
};

struct ScenarioReport {
  bool ok = true;
  std::vector<std::string> lines;
};

/// One library run, optionally checked step for step against the reference.
ScenarioReport run_scenario(const Scenario& sc, const ScenarioOptions& options);

struct ExploreOptions {
  WaitsetStrategy strategy = WaitsetStrategy::chain;
  std::uint32_t spin = SpinPolicy{}.spin_budget;
  /// Beyond this many distinct schedules a seeded random sample is run.
  std::size_t max_schedules = 5000;
  std::uint64_t seed = 1;
};

struct ExploreReport {
  std::size_t schedules = 0;
  std::size_t total_schedules = 0;  // distinct schedules in the space
  bool exhaustive = false;
  std::map<std::string, std::size_t> outcomes;  // joined wait results -> count
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

/// Runs `sc` once per step interleaving. Each run must finish, give every
/// wait exactly one result, notify no more waiters than were signalled, and
/// leave clean chains with every node back on its free list.
ExploreReport explore(const Scenario& sc, const ExploreOptions& options);

/// Distinct step interleavings for `sc`, saturating at UINT64_MAX.
std::uint64_t count_schedules(const Scenario& sc);

}  // namespace cjm::harness
