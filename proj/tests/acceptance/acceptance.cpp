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

// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
// below; exit status is nonzero if any criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bench.hpp"
#include "cjm/audit.hpp"
#include "cjm/hash.hpp"
#include "cjm/monitor.hpp"
#include "runner.hpp"
#include "stress.hpp"

using namespace cjm;
using namespace cjm::harness;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Pinned tolerances.

constexpr int kMutexSeeds = 20;
constexpr std::size_t kMutexThreads = 8;
constexpr std::size_t kMutexIters = 100'000;
constexpr double kMutexMaxSeconds = 30.0;  // per seed

constexpr int kFifoRuns = 100;
constexpr int kFigureRuns = 100;
constexpr int kMorphWaiters = 10;
constexpr int kFootprintSeeds = 5;
constexpr auto kHashWindow = 2s;
constexpr std::size_t kHashChurners = 8;
constexpr int kDeflationSeeds = 5;
constexpr int kImsxAttempts = 1000;

constexpr double kUncontendedMaxRatio = 1.5;
constexpr double kContendedMinRatio = 0.5;  // informative only
constexpr double kContendedMaxRatio = 2.0;  // informative only
constexpr std::size_t kBenchThreads = 8;

fs::path scenario_dir() { return CJM_SCENARIO_DIR; }

struct Outcome {
  bool pass = true;
  std::string detail;
};

Outcome fail(std::string why) { return {false, std::move(why)}; }

bool poll(const std::function<bool()>& pred, std::chrono::milliseconds limit = 10s) {
  const auto end = Clock::now() + limit;
  while (!pred()) {
    if (Clock::now() > end) return false;
    std::this_thread::sleep_for(100us);
  }
  return true;
}

bool blocked(const ThreadContext& ctx, const Monitor& m, BlockedKind kind) {
  return poll([&] { return ctx.blocked_on() == &m && ctx.blocked_kind() == kind; });
}

std::vector<fs::path> corpus() {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(scenario_dir())) {
    if (e.path().extension() == ".scn") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<std::string> names(const Scenario& sc) {
  std::vector<std::string> out;
  for (const auto& t : sc.threads) out.push_back(t.name);
  return out;
}

void use_strategy(WaitsetStrategy s) { config().waitset_strategy = s; }

// ---------------------------------------------------------------------------
// 1. Mutual exclusion.

Outcome mutual_exclusion() {
  double slowest = 0;
  for (int seed = 1; seed <= kMutexSeeds; ++seed) {
    StressOptions so;
    so.threads = kMutexThreads;
    so.monitors = 1;
    so.iters = kMutexIters;
    so.seed = static_cast<std::uint64_t>(seed);
    so.mix = parse_mix("lock:1");
    so.max_depth = 1;
    const StressReport r = run_stress(so);
    slowest = std::max(slowest, r.seconds);
    if (!r.ok) return fail("seed " + std::to_string(seed) + ": " + r.problems.front());
    if (r.counters[0] != kMutexThreads * kMutexIters) {
      return fail("seed " + std::to_string(seed) + ": counter " + std::to_string(r.counters[0]));
    }
    if (r.seconds >= kMutexMaxSeconds) return fail("seed " + std::to_string(seed) + " took " + std::to_string(r.seconds) + "s");
  }
  return {true, "counter " + std::to_string(kMutexThreads * kMutexIters) + " on " + std::to_string(kMutexSeeds) +
                    " seeds, slowest " + std::to_string(slowest) + "s"};
}

// ---------------------------------------------------------------------------
// 2. Strict FIFO.

Outcome strict_fifo() {
  const Scenario sc = load_scenario((scenario_dir() / "fifo6.scn").string());
  const std::vector<std::string> expected{"T0", "T1", "T2", "T3", "T4", "T5", "T6"};
  use_strategy(WaitsetStrategy::chain);
  for (int run = 0; run < kFifoRuns; ++run) {
    CjmSystem sys(names(sc), sc.monitors);
    const RunRecord rec = execute(sc, sys);
    if (!rec.failures.empty()) return fail("run " + std::to_string(run) + ": " + rec.failures.front());
    if (rec.grants[0] != expected) return fail("run " + std::to_string(run) + ": grant order differs");
  }
  return {true, std::to_string(kFifoRuns) + "/" + std::to_string(kFifoRuns) + " runs granted T1..T6 in arrival order"};
}

// ---------------------------------------------------------------------------
// 3. The figure1 fixture, driven directly so the free list can be checked at the
// moment T1's unlock returns.

ThreadContext* tail_home(const Monitor& m) {
  const MarkWord mark = m.load();
  return mark.is_queued() ? mark.tail()->home : nullptr;
}

Outcome figure1_once() {
  Monitor a;
  ThreadContext t1("T1");
  std::vector<std::unique_ptr<ThreadContext>> entry;  // T2..T5
  for (int i = 2; i <= 5; ++i) entry.push_back(std::make_unique<ThreadContext>("T" + std::to_string(i)));
  ThreadContext t6("T6"), t7("T7");
  std::atomic<bool> release_entry{false};
  std::vector<std::thread> threads;

  auto waiter = [&](ThreadContext& ctx) {
    threads.emplace_back([&] {
      lock(ctx, a);
      wait(ctx, a);
      unlock(ctx, a);
    });
  };
  waiter(t6);
  if (!blocked(t6, a, BlockedKind::wait)) return fail("T6 never waited");
  waiter(t7);
  if (!blocked(t7, a, BlockedKind::wait)) return fail("T7 never waited");

  lock(t1, a);
  QueueNode* l1 = t1.find_owned(a);
  for (auto& ctx : entry) {
    ThreadContext* c = ctx.get();
    threads.emplace_back([&, c] {
      lock(*c, a);
      while (c == entry[0].get() && !release_entry.load()) std::this_thread::sleep_for(50us);
      if (c == entry[0].get()) notify_all(*c, a);
      unlock(*c, a);
    });
    if (!blocked(*c, a, BlockedKind::entry)) return fail(c->name() + " never queued");
  }

  unlock(t1, a);
  Outcome out;
  ThreadContext& t2 = *entry[0];
  if (!poll([&] { return t2.find_owned(a) != nullptr; })) out = fail("T2 never became owner");
  if (out.pass) {
    QueueNode* e2 = t2.find_owned(a);
    std::vector<ThreadContext*> ws;
    for (QueueNode* w = e2->waitset_head; w != nullptr; w = w->wait_next) ws.push_back(w->home);
    if (ws != std::vector<ThreadContext*>{&t6, &t7}) out = fail("waitset on E2 is not {W6, W7}");
    else if (!t1.on_free_list(l1) || t1.active_count() != 0) out = fail("L1 not on T1's free list");
    else if (tail_home(a) != entry[3].get()) out = fail("tail is not E5");
    std::vector<ThreadContext*> all{&t1, &t6, &t7};
    for (auto& c : entry) all.push_back(c.get());
    const AuditResult audit = audit_chain(a, all, "A");
    if (out.pass && !audit.ok) out = fail(audit.dump);
  }
  release_entry = true;
  for (auto& th : threads) th.join();
  return out;
}

Outcome figure1() {
  use_strategy(WaitsetStrategy::chain);
  for (int run = 0; run < kFigureRuns; ++run) {
    const Outcome o = figure1_once();
    if (!o.pass) return fail("run " + std::to_string(run) + ": " + o.detail);
  }
  const Scenario sc = load_scenario((scenario_dir() / "figure1.scn").string());
  for (int run = 0; run < kFigureRuns; ++run) {
    CjmSystem sys(names(sc), sc.monitors);
    const RunRecord rec = execute(sc, sys);
    if (!rec.failures.empty()) return fail("figure1.scn run " + std::to_string(run) + ": " + rec.failures.front());
  }
  return {true, std::to_string(kFigureRuns) + "/" + std::to_string(kFigureRuns) +
                    " direct runs and scenario runs: T2 owner, waitset {W6,W7}, L1 free"};
}

// ---------------------------------------------------------------------------
// 4. Wait morphing.

struct Parked {
  ThreadContext ctx;
  std::thread thread;
  explicit Parked(std::string name) : ctx(std::move(name)) {}
};

Outcome morphing_under(WaitsetStrategy strategy) {
  use_strategy(strategy);
  Monitor m;
  std::vector<std::unique_ptr<Parked>> waiters;
  auto park_waiters = [&] {
    waiters.clear();
    for (int i = 0; i < kMorphWaiters; ++i) {
      waiters.push_back(std::make_unique<Parked>("W" + std::to_string(i)));
      Parked* w = waiters.back().get();
      w->thread = std::thread([w, &m] {
        lock(w->ctx, m);
        wait(w->ctx, m);
        unlock(w->ctx, m);
      });
      if (!blocked(w->ctx, m, BlockedKind::wait)) return false;
    }
    return true;
  };
  ThreadContext notifier("N");

  // One notify at a time.
  if (!park_waiters()) return fail("waiters did not park");
  lock(notifier, m);
  for (int i = 0; i < kMorphWaiters; ++i) {
    const CounterSnapshot before = notifier.counters().snapshot();
    notify(notifier, m);
    const CounterSnapshot d = notifier.counters().snapshot() - before;
    if (d.tail_swaps != 1 || d.unparks != 0) {
      unlock(notifier, m);
      for (auto& w : waiters) w->thread.join();
      return fail("notify cost " + std::to_string(d.tail_swaps) + " swaps, " + std::to_string(d.unparks) + " unparks");
    }
  }
  unlock(notifier, m);
  for (auto& w : waiters) w->thread.join();

  // One notifyAll for the whole set.
  if (!park_waiters()) return fail("waiters did not park");
  lock(notifier, m);
  const CounterSnapshot before = notifier.counters().snapshot();
  notify_all(notifier, m);
  const CounterSnapshot d = notifier.counters().snapshot() - before;
  unlock(notifier, m);
  for (auto& w : waiters) w->thread.join();
  if (d.tail_swaps != 1 || d.unparks != 0) {
    return fail("notifyAll cost " + std::to_string(d.tail_swaps) + " swaps, " + std::to_string(d.unparks) + " unparks");
  }
  return {};
}

Outcome wait_morphing() {
  for (WaitsetStrategy s : {WaitsetStrategy::chain, WaitsetStrategy::external}) {
    const Outcome o = morphing_under(s);
    if (!o.pass) return fail(std::string(s == WaitsetStrategy::chain ? "chain: " : "external: ") + o.detail);
  }
  use_strategy(WaitsetStrategy::chain);
  return {true, "chain and external: 1 swap and 0 unparks per notify; 1 swap, 0 unparks per notifyAll of " +
                    std::to_string(kMorphWaiters)};
}

// ---------------------------------------------------------------------------
// 5. Footprint bound.

Outcome footprint() {
  std::size_t worst_plain = 0, worst_timed = 0;
  for (int seed = 1; seed <= kFootprintSeeds; ++seed) {
    for (bool timed : {false, true}) {
      StressOptions so;
      so.threads = 4;
      so.monitors = 4;
      so.iters = 10000;
      so.seed = static_cast<std::uint64_t>(seed);
      so.max_depth = 3;
      so.mix = timed ? parse_mix("lock:60,wait:20,notify:10,hash:10") : parse_mix("lock:80,notify:10,hash:10");
      so.timed_wait_percent = 100;
      so.max_timeout_us = 1000;
      const StressReport r = run_stress(so);
      const std::size_t bound = 3 + (timed ? 2 : 1);
      if (r.footprint_bound != bound) return fail("stress used bound " + std::to_string(r.footprint_bound));
      if (r.max_nodes > bound) {
        return fail("seed " + std::to_string(seed) + ": " + std::to_string(r.max_nodes) + " nodes > " + std::to_string(bound));
      }
      if (!r.ok) return fail("seed " + std::to_string(seed) + ": " + r.problems.front());
      (timed ? worst_timed : worst_plain) = std::max(timed ? worst_timed : worst_plain, r.max_nodes);
    }
  }
  return {true, "K=3: max " + std::to_string(worst_plain) + " nodes without waits (<= 4), " +
                    std::to_string(worst_timed) + " with timed waits (<= 5)"};
}

// ---------------------------------------------------------------------------
// 6. Hash stability under churn.

Outcome hash_churn() {
  use_strategy(WaitsetStrategy::chain);
  Monitor m;
  std::atomic<bool> stop{false};
  std::vector<std::unique_ptr<ThreadContext>> ctxs;
  std::vector<std::thread> churn;
  for (std::size_t i = 0; i < kHashChurners; ++i) {
    ctxs.push_back(std::make_unique<ThreadContext>());
    ThreadContext* c = ctxs.back().get();
    churn.emplace_back([c, &m, &stop] {
      while (!stop.load(std::memory_order_relaxed)) {
        lock(*c, m);
        unlock(*c, m);
      }
    });
  }
  ThreadContext reader("reader");
  std::set<std::uint64_t> seen;
  std::uint64_t samples = 0, zeros = 0;
  const auto end = Clock::now() + kHashWindow;
  while (Clock::now() < end) {
    const std::uint64_t h = hash_of(reader, m);
    ++samples;
    if (h == 0) ++zeros;
    else seen.insert(h);
  }
  stop = true;
  for (auto& th : churn) th.join();
  const std::string detail = std::to_string(samples) + " samples, " + std::to_string(seen.size()) +
                             " distinct, " + std::to_string(zeros) + " zero";
  if (seen.size() != 1 || zeros != 0) return fail(detail);
  if (!m.load().is_hashed() || m.load().hash() != *seen.begin()) return fail(detail + ", deflated to another hash");
  return {true, detail};
}

// ---------------------------------------------------------------------------
// 7. Cancellation soundness.

Outcome cancellation() {
  const char* files[] = {"notify_vs_timeout.scn", "two_waiters_notify.scn", "notifyall_vs_timeout.scn"};
  std::size_t schedules = 0;
  for (WaitsetStrategy s : {WaitsetStrategy::chain, WaitsetStrategy::external}) {
    for (const char* f : files) {
      const Scenario sc = load_scenario((scenario_dir() / "explore" / f).string());
      if (sc.threads.size() > 4) return fail(std::string(f) + " has more than 4 threads");
      ExploreOptions eo;
      eo.strategy = s;
      const ExploreReport r = explore(sc, eo);
      if (!r.exhaustive) return fail(std::string(f) + " was sampled, not exhausted");
      if (!r.ok()) return fail(std::string(f) + ": " + r.problems.front());
      for (const auto& [outcome, n] : r.outcomes) {
        std::istringstream in(outcome);
        for (std::string one; std::getline(in, one, ',');) {
          if (one != "notified" && one != "timedout") return fail(std::string(f) + ": outcome " + outcome);
        }
      }
      schedules += r.schedules;
    }
  }
  use_strategy(WaitsetStrategy::chain);
  return {true, std::to_string(schedules) +
                    " interleavings over both strategies: one result each, clean audits, no leaked nodes"};
}

// ---------------------------------------------------------------------------
// 8. Deflation.

Outcome deflation() {
  std::size_t monitors = 0;
  for (WaitsetStrategy s : {WaitsetStrategy::chain, WaitsetStrategy::external}) {
    for (int seed = 1; seed <= kDeflationSeeds; ++seed) {
      StressOptions so;
      so.threads = 4;
      so.monitors = 4;
      so.iters = 5000;
      so.seed = static_cast<std::uint64_t>(seed);
      so.mix = parse_mix("lock:50,wait:15,notify:15,hash:20");
      so.strategy = s;
      const StressReport r = run_stress(so);
      if (!r.ok) return fail("seed " + std::to_string(seed) + ": " + r.problems.front());
      for (std::size_t m = 0; m < so.monitors; ++m) {
        const MarkWord mark{r.final_marks[m]};
        if (!mark.is_hashed()) return fail("seed " + std::to_string(seed) + ": monitor not in hashed state");
        if (r.first_hashes[m] == 0 || mark.hash() != r.first_hashes[m]) {
          return fail("seed " + std::to_string(seed) + ": final hash differs from the first observed");
        }
        ++monitors;
      }
    }
  }
  use_strategy(WaitsetStrategy::chain);
  return {true, std::to_string(monitors) + " monitors ended hashed with their first observed hash"};
}

// ---------------------------------------------------------------------------
// 9. IMSX fidelity.

Outcome imsx() {
  use_strategy(WaitsetStrategy::chain);
  // Direct attempts: free monitor, and monitor owned by another thread.
  Monitor m;
  ThreadContext owner("owner"), other("other");
  std::size_t attempts = 0, raised = 0;
  auto attempt = [&](const std::function<void()>& op) {
    ++attempts;
    try {
      op();
    } catch (const IllegalMonitorState&) {
      ++raised;
    }
  };
  for (int held = 0; held < 2; ++held) {
    if (held) lock(owner, m);
    for (int i = 0; i < kImsxAttempts / 8; ++i) {
      attempt([&] { unlock(other, m); });
      attempt([&] { wait(other, m); });
      attempt([&] { notify(other, m); });
      attempt([&] { notify_all(other, m); });
    }
    if (held) unlock(owner, m);
  }
  if (raised != attempts) return fail(std::to_string(raised) + "/" + std::to_string(attempts) + " direct attempts raised");

  // Scripted attempts, counted on both systems.
  std::size_t scripted = 0;
  for (const char* f : {"unlock_without_lock.scn", "imsx_non_owner.scn", "recursion.scn", "nesting_restore.scn",
                        "imbalanced_release.scn", "notify_empty.scn"}) {
    const Scenario sc = load_scenario((scenario_dir() / f).string());
    CjmSystem cjm(names(sc), sc.monitors);
    OracleSystem oracle(sc.threads.size(), sc.monitors.size());
    const RunRecord got = execute(sc, cjm);
    const RunRecord want = execute(sc, oracle);
    if (!got.failures.empty()) return fail(std::string(f) + ": " + got.failures.front());
    if (got.traces != want.traces) return fail(std::string(f) + ": traces differ from the oracle");
    for (const auto& trace : got.traces) {
      scripted += static_cast<std::size_t>(std::count_if(trace.begin(), trace.end(), [](const std::string& e) {
        return e.ends_with(": imsx");
      }));
    }
  }
  return {true, std::to_string(attempts) + "/" + std::to_string(attempts) + " direct, " + std::to_string(scripted) +
                    " scripted errors identical to the oracle"};
}

// ---------------------------------------------------------------------------
// 10. Strategy equivalence.

Outcome strategy_equivalence() {
  std::size_t count = 0;
  for (const auto& f : corpus()) {
    const Scenario sc = load_scenario(f.string());
    std::vector<RunRecord> records;
    for (WaitsetStrategy s : {WaitsetStrategy::chain, WaitsetStrategy::external}) {
      ScenarioOptions so;
      so.strategy = s;
      const ScenarioReport r = run_scenario(sc, so);
      if (!r.ok) return fail(sc.name + (s == WaitsetStrategy::chain ? " (chain): " : " (external): ") + r.lines.front());
      use_strategy(s);
      CjmSystem sys(names(sc), sc.monitors);
      records.push_back(execute(sc, sys));
    }
    if (records[0].traces != records[1].traces || records[0].grants != records[1].grants) {
      return fail(sc.name + ": strategies diverge");
    }
    ++count;
  }
  use_strategy(WaitsetStrategy::chain);
  return {true, std::to_string(count) + " scenarios identical under chain and external, both matching the oracle"};
}

// ---------------------------------------------------------------------------
// 11. Performance sanity.

Outcome performance(const std::string& csv) {
  use_strategy(WaitsetStrategy::chain);
  BenchOptions bo;
  bo.max_threads = kBenchThreads;
  const BenchReport r = run_bench(bo);
  write_bench_csv(r, csv);
  const double ratio = r.uncontended_cjm_ns / r.uncontended_baseline_ns;
  double cjm8 = 0, mcs8 = 0;
  for (const auto& row : r.rows) {
    if (row.threads != kBenchThreads) continue;
    (row.lock == "cjm" ? cjm8 : mcs8) = row.ops_per_sec;
  }
  const double contended = mcs8 > 0 ? cjm8 / mcs8 : 0;
  std::ostringstream os;
  os.precision(3);
  os << "uncontended " << r.uncontended_cjm_ns << " ns vs " << r.uncontended_baseline_ns << " ns (ratio " << ratio
     << ", limit " << kUncontendedMaxRatio << "); " << kBenchThreads << "-thread throughput ratio " << contended
     << (contended >= kContendedMinRatio && contended <= kContendedMaxRatio ? " (within" : " (outside")
     << " 0.5-2x, informative); csv " << csv;
  if (!r.handoff_identity) return fail(os.str() + "; handoff identity broken");
  if (ratio > kUncontendedMaxRatio) return fail(os.str());
  return {true, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cjm acceptance suite"};
  std::vector<int> only;
  std::string csv = "acceptance_bench.csv";
  app.add_option("--only", only, "Run just these criteria (1-11)");
  app.add_option("--csv", csv, "Where the benchmark CSV goes");
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "mutual exclusion", mutual_exclusion},
      {2, "strict FIFO", strict_fifo},
      {3, "figure1 fixture", figure1},
      {4, "wait morphing", wait_morphing},
      {5, "footprint bound", footprint},
      {6, "hash stability under churn", hash_churn},
      {7, "cancellation soundness", cancellation},
      {8, "deflation", deflation},
      {9, "IMSX fidelity", imsx},
      {10, "strategy equivalence", strategy_equivalence},
      {11, "performance sanity", [&] { return performance(csv); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    std::printf("%s %2d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
