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

#include "runner.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <cstdio>
#include <iostream>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <thread>

namespace cjm::harness {

namespace {

using namespace std::chrono_literals;

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

struct Shared {
  const Scenario& sc;
  MonitorSystem& sys;
  std::mutex mutex;
  std::map<std::string, std::unique_ptr<std::barrier<>>> barriers;
  std::vector<std::vector<std::string>> grants;
  std::vector<std::uint64_t> first_hash;
  std::vector<std::string> failures;

  // Controlled execution.
  bool controlled = false;
  std::vector<std::atomic<int>> issued;
  std::vector<std::atomic<int>> completed;
  std::atomic<int> finished{0};

  Shared(const Scenario& s, MonitorSystem& y)
      : sc(s), sys(y), grants(s.monitors.size()), first_hash(s.monitors.size(), 0),
        issued(s.threads.size()), completed(s.threads.size()) {
    for (const auto& t : s.threads) {
      for (const auto& step : t.steps) {
        if (step.kind == StepKind::sync && !barriers.contains(step.label)) {
          barriers.emplace(step.label, std::make_unique<std::barrier<>>(s.barrier_parties(step.label)));
        }
      }
    }
  }

  void fail(int t, const Step& step, const std::string& what) {
    std::lock_guard g(mutex);
    failures.push_back(sc.threads[t].name + " line " + std::to_string(step.line) + " (" +
                       step.describe() + "): " + what);
  }

  void granted(int t, int m) {
    std::lock_guard g(mutex);
    grants[m].push_back(sc.threads[t].name);
  }
};

std::string names_of(const Scenario& sc, const std::vector<int>& idx) {
  std::vector<std::string> out;
  for (int i : idx) out.push_back(i >= 0 ? sc.threads[i].name : "?");
  return out.empty() ? "-" : join(out, ",");
}

void run_thread(Shared& sh, int t, std::vector<std::string>& trace) {
  const Scenario& sc = sh.sc;
  MonitorSystem& sys = sh.sys;
  std::vector<int> held(sc.monitors.size(), 0);
  std::string last = "ok";
  int index = 0;

  for (const Step& step : sc.threads[t].steps) {
    if (sh.controlled) {
      while (sh.issued[t].load(std::memory_order_acquire) <= index) std::this_thread::yield();
    }
    const int m = step.monitor.empty() ? -1 : sc.monitor_index(step.monitor);
    const std::string& mname = step.monitor;
    try {
      switch (step.kind) {
        case StepKind::lock:
          sys.lock(t, m);
          if (held[m]++ == 0) sh.granted(t, m);
          trace.push_back("lock " + mname);
          last = "ok";
          break;
        case StepKind::unlock:
          sys.unlock(t, m);
          --held[m];
          trace.push_back("unlock " + mname);
          last = "ok";
          break;
        case StepKind::wait: {
          std::optional<std::chrono::milliseconds> timeout;
          if (step.timeout_ms) timeout = std::chrono::milliseconds(*step.timeout_ms);
          const WaitResult r = sys.wait(t, m, timeout);
          sh.granted(t, m);
          last = to_string(r);
          trace.push_back("wait " + mname + ": " + last);
          break;
        }
        case StepKind::notify:
        case StepKind::notify_all: {
          const bool all = step.kind == StepKind::notify_all;
          sys.notify(t, m, all);
          trace.push_back(std::string(all ? "notifyall " : "notify ") + mname);
          last = "ok";
          break;
        }
        case StepKind::hash: {
          const std::uint64_t h = sys.hash(t, m);
          bool stable;
          {
            std::lock_guard g(sh.mutex);
            if (sh.first_hash[m] == 0) sh.first_hash[m] = h;
            stable = sh.first_hash[m] == h;
          }
          trace.push_back("hash " + mname + (stable ? ": stable" : ": changed"));
          if (!stable) sh.fail(t, step, "hash changed");
          last = "ok";
          break;
        }
        case StepKind::interrupt:
          sys.interrupt(t, sc.thread_index(step.thread));
          trace.push_back("interrupt " + step.thread);
          last = "ok";
          break;
        case StepKind::sync:
          sh.barriers.at(step.label)->arrive_and_wait();
          break;
        case StepKind::blocked: {
          const int target = sc.thread_index(step.thread);
          const BlockedKind kind = step.label == "wait"    ? BlockedKind::wait
                                   : step.label == "entry" ? BlockedKind::entry
                                                           : BlockedKind::none;
          const auto deadline = Clock::now() + 10s;
          while (!sys.is_blocked(target, m, kind)) {
            if (Clock::now() > deadline) {
              sh.fail(t, step, "never observed blocked");
              break;
            }
            std::this_thread::sleep_for(100us);
          }
          break;
        }
        case StepKind::owned: {
          const bool holds = sys.holds(t, m);
          trace.push_back("owned " + mname + (holds ? ": true" : ": false"));
          if (holds != step.flag) sh.fail(t, step, holds ? "owns the monitor" : "does not own the monitor");
          break;
        }
        case StepKind::expect:
          if (last != step.label) sh.fail(t, step, "previous step gave " + last);
          break;
        case StepKind::inspect: {
          const MonitorSystem::Inspection ins = sys.inspect(m);
          const std::string owner = ins.owner >= 0 ? sc.threads[ins.owner].name : "-";
          if (owner != step.thread) sh.fail(t, step, "owner is " + owner);
          if (step.flag) {
            const std::string got = names_of(sc, ins.waiters);
            const std::string want = step.names.empty() ? "-" : join(step.names, ",");
            if (got != want) sh.fail(t, step, "waiters are " + got);
          }
          break;
        }
        case StepKind::sleep:
          std::this_thread::sleep_for(std::chrono::milliseconds(step.timeout_ms.value_or(0)));
          break;
      }
    } catch (const IllegalMonitorState&) {
      last = "imsx";
      trace.push_back(step.describe() + ": imsx");
    }
    ++index;
    sh.completed[t].store(index, std::memory_order_release);
  }

  for (std::size_t m = 0; m < held.size(); ++m) {
    if (held[m] != 0) {
      std::lock_guard g(sh.mutex);
      sh.failures.push_back(sc.threads[t].name + " ends holding " + sc.monitors[m]);
    }
  }
  sh.finished.fetch_add(1, std::memory_order_release);
}

[[noreturn]] void hang(Shared& sh, const char* where) {
  std::cerr << "scenario " << sh.sc.name << " hung under " << sh.sys.name() << " (" << where << ")\n"
            << sh.sys.dump() << std::flush;
  std::_Exit(3);
}

/// Issues steps in priority order: each turn the first listed thread whose
/// previous step has finished runs its next step, and the controller waits
/// until that step completes or the thread blocks inside the system.
void drive(Shared& sh, const std::vector<int>& schedule, Clock::time_point deadline) {
  std::vector<int> remaining = schedule;
  while (!remaining.empty()) {
    auto pick = remaining.end();
    while (pick == remaining.end()) {
      pick = std::find_if(remaining.begin(), remaining.end(), [&](int t) {
        return sh.completed[t].load(std::memory_order_acquire) == sh.issued[t].load(std::memory_order_relaxed);
      });
      if (pick == remaining.end()) {
        if (Clock::now() > deadline) hang(sh, "no runnable thread");
        std::this_thread::yield();
      }
    }
    const int t = *pick;
    remaining.erase(pick);
    const int target = sh.issued[t].fetch_add(1, std::memory_order_release) + 1;
    const auto settle = Clock::now() + 200ms;
    while (sh.completed[t].load(std::memory_order_acquire) < target &&
           !sh.sys.is_blocked(t, -1, BlockedKind::none) && Clock::now() < settle) {
      std::this_thread::yield();
    }
  }
}

}  // namespace

RunRecord execute(const Scenario& sc, MonitorSystem& system, const RunOptions& options) {
  Shared sh(sc, system);
  sh.controlled = !options.schedule.empty();
  RunRecord rec;
  rec.system = system.name();
  rec.traces.resize(sc.threads.size());

  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < sc.threads.size(); ++t) {
    threads.emplace_back(run_thread, std::ref(sh), static_cast<int>(t), std::ref(rec.traces[t]));
  }
  const auto deadline = Clock::now() + options.watchdog;
  if (sh.controlled) drive(sh, options.schedule, deadline);
  while (sh.finished.load(std::memory_order_acquire) < static_cast<int>(threads.size())) {
    if (Clock::now() > deadline) hang(sh, "watchdog");
    std::this_thread::sleep_for(200us);
  }
  for (auto& th : threads) th.join();

  rec.grants = std::move(sh.grants);
  rec.failures = std::move(sh.failures);
  for (auto& p : system.audit()) rec.failures.push_back(std::move(p));
  // The hash seen at the end must be the first one ever handed out.
  for (std::size_t m = 0; m < sc.monitors.size(); ++m) {
    if (sh.first_hash[m] == 0) continue;
    if (system.hash(0, static_cast<int>(m)) != sh.first_hash[m]) {
      rec.failures.push_back("final hash of " + sc.monitors[m] + " differs from the first observed");
    }
  }
  return rec;
}

namespace {

std::vector<std::string> monitor_names(const Scenario& sc) { return sc.monitors; }

std::vector<std::string> thread_names(const Scenario& sc) {
  std::vector<std::string> out;
  for (const auto& t : sc.threads) out.push_back(t.name);
  return out;
}

void apply(WaitsetStrategy strategy, std::uint32_t spin) {
  config().waitset_strategy = strategy;
  config().spin.spin_budget = spin;
}

}  // namespace

ScenarioReport run_scenario(const Scenario& sc, const ScenarioOptions& options) {
  apply(options.strategy, options.spin);
  ScenarioReport report;
  auto fail = [&](std::string line) {
    report.ok = false;
    report.lines.push_back(std::move(line));
  };

  CjmSystem cjm(thread_names(sc), monitor_names(sc));
  cjm.set_footprint_bound(options.footprint_bound);
  const RunRecord got = execute(sc, cjm, {});
  for (const auto& f : got.failures) fail("cjm: " + f);

  if (options.compare_oracle) {
    OracleSystem oracle(sc.threads.size(), sc.monitors.size());
    const RunRecord want = execute(sc, oracle, {});
    for (const auto& f : want.failures) fail("oracle: " + f);
    for (std::size_t t = 0; t < sc.threads.size(); ++t) {
      if (got.traces[t] != want.traces[t]) {
        fail(sc.threads[t].name + " trace differs: cjm [" + join(got.traces[t], "; ") + "] oracle [" +
             join(want.traces[t], "; ") + "]");
      }
    }
    for (std::size_t m = 0; m < sc.monitors.size(); ++m) {
      if (got.grants[m] != want.grants[m]) {
        fail(sc.monitors[m] + " grant order differs: cjm [" + join(got.grants[m], ",") + "] oracle [" +
             join(want.grants[m], ",") + "]");
      }
    }
  }
  if (report.ok) {
    std::size_t events = 0;
    for (const auto& tr : got.traces) events += tr.size();
    report.lines.push_back(std::to_string(sc.threads.size()) + " threads, " + std::to_string(events) +
                           " events" + (options.compare_oracle ? ", matches oracle" : ""));
  }
  return report;
}

std::uint64_t count_schedules(const Scenario& sc) {
  // Multinomial coefficient, built up one binomial at a time.
  std::uint64_t total = 1;
  std::uint64_t placed = 0;
  for (const auto& t : sc.threads) {
    for (std::uint64_t k = 1; k <= t.steps.size(); ++k) {
      ++placed;
      const unsigned __int128 next = static_cast<unsigned __int128>(total) * placed / k;
      if (next > UINT64_MAX) return UINT64_MAX;
      total = static_cast<std::uint64_t>(next);
    }
  }
  return total;
}

ExploreReport explore(const Scenario& sc, const ExploreOptions& options) {
  apply(options.strategy, options.spin);
  ExploreReport report;

  for (const auto& t : sc.threads) {
    for (const auto& s : t.steps) {
      if (s.kind == StepKind::sync || s.kind == StepKind::blocked) {
        report.problems.push_back("line " + std::to_string(s.line) +
                                  ": sync and blocked steps cannot be explored");
        return report;
      }
    }
  }

  std::vector<int> base;
  std::size_t waits = 0;
  std::size_t notify_budget = 0;
  for (std::size_t t = 0; t < sc.threads.size(); ++t) {
    for (const auto& s : sc.threads[t].steps) {
      base.push_back(static_cast<int>(t));
      if (s.kind == StepKind::wait) ++waits;
      if (s.kind == StepKind::notify) ++notify_budget;
      if (s.kind == StepKind::notify_all) notify_budget += sc.threads.size() - 1;
    }
  }

  report.total_schedules = count_schedules(sc);
  std::vector<std::vector<int>> schedules;
  if (report.total_schedules <= options.max_schedules) {
    report.exhaustive = true;
    std::vector<int> s = base;
    do {
      schedules.push_back(s);
    } while (std::next_permutation(s.begin(), s.end()));
  } else {
    std::mt19937_64 rng(options.seed);
    for (std::size_t i = 0; i < options.max_schedules; ++i) {
      std::vector<int> s = base;
      std::shuffle(s.begin(), s.end(), rng);
      schedules.push_back(std::move(s));
    }
  }

  for (const auto& schedule : schedules) {
    CjmSystem sys(thread_names(sc), monitor_names(sc));
    RunOptions ro;
    ro.schedule = schedule;
    const RunRecord rec = execute(sc, sys, ro);
    ++report.schedules;

    std::vector<std::string> results;
    std::size_t notified = 0;
    for (const auto& trace : rec.traces) {
      for (const auto& ev : trace) {
        if (ev.rfind("wait ", 0) != 0) continue;
        const std::string r = ev.substr(ev.find(": ") + 2);
        results.push_back(r);
        if (r == "notified") ++notified;
      }
    }
    std::vector<std::string> problems = rec.failures;
    if (results.size() != waits) {
      problems.push_back(std::to_string(results.size()) + " wait results for " + std::to_string(waits) +
                         " waits");
    }
    if (notified > notify_budget) {
      problems.push_back(std::to_string(notified) + " waiters notified with a budget of " +
                         std::to_string(notify_budget));
    }
    ++report.outcomes[join(results, ",")];
    if (!problems.empty()) {
      std::string order;
      for (int t : schedule) order += sc.threads[t].name + " ";
      report.problems.push_back("schedule " + order + "-> " + join(problems, " | "));
      if (report.problems.size() >= 10) break;
    }
  }
  return report;
}

}  // namespace cjm::harness
