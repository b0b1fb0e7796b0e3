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

#include "bench.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cjm/mcs_baseline.hpp"
#include "cjm/monitor.hpp"

namespace cjm::harness {

namespace {

/// Uniform face over the two lock kinds.
struct CjmLocks {
  std::deque<Monitor> locks;
  explicit CjmLocks(std::size_t n) : locks(n) {}
  void lock(ThreadContext& ctx, std::size_t i) { cjm::lock(ctx, locks[i]); }
  void unlock(ThreadContext& ctx, std::size_t i) { cjm::unlock(ctx, locks[i]); }
};

struct McsLocks {
  std::deque<PlainMcsLock> locks;
  explicit McsLocks(std::size_t n) : locks(n) {}
  void lock(ThreadContext& ctx, std::size_t i) { locks[i].lock(ctx); }
  void unlock(ThreadContext& ctx, std::size_t i) { locks[i].unlock(ctx); }
};

template <class Locks>
double uncontended_ns(std::uint64_t ops, unsigned samples) {
  double best = 1e30;
  for (unsigned s = 0; s < samples; ++s) {
    Locks locks(1);
    ThreadContext ctx("bench");
    const auto start = Clock::now();
    for (std::uint64_t i = 0; i < ops; ++i) {
      locks.lock(ctx, 0);
      locks.unlock(ctx, 0);
    }
    const double ns = std::chrono::duration<double, std::nano>(Clock::now() - start).count();
    best = std::min(best, ns / static_cast<double>(ops));
  }
  return best;
}

template <class Locks>
BenchRow contended(const std::string& name, std::size_t threads, std::size_t monitors,
                   std::uint32_t duration_ms) {
  Locks locks(monitors);
  std::vector<std::uint64_t> guarded(monitors, 0);
  std::vector<std::unique_ptr<ThreadContext>> contexts;
  for (std::size_t t = 0; t < threads; ++t) contexts.push_back(std::make_unique<ThreadContext>());
  std::atomic<bool> go{false}, stop{false};
  std::vector<std::uint64_t> ops(threads, 0);

  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      ThreadContext& ctx = *contexts[t];
      while (!go.load(std::memory_order_acquire)) std::this_thread::yield();
      std::size_t i = t % monitors;
      std::uint64_t n = 0;
      while (!stop.load(std::memory_order_relaxed)) {
        locks.lock(ctx, i);
        ++guarded[i];
        locks.unlock(ctx, i);
        ++n;
        if (++i == monitors) i = 0;
      }
      ops[t] = n;
    });
  }
  const auto start = Clock::now();
  go.store(true, std::memory_order_release);
  std::this_thread::sleep_for(std::chrono::milliseconds(duration_ms));
  stop.store(true);
  for (auto& th : pool) th.join();
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();

  BenchRow row;
  row.lock = name;
  row.threads = threads;
  row.monitors = monitors;
  std::uint64_t total = 0;
  for (auto n : ops) total += n;
  std::uint64_t counted = 0;
  for (auto g : guarded) counted += g;
  if (counted != total) throw std::logic_error(name + ": guarded counter lost updates");
  for (const auto& c : contexts) row.counters += c->counters().snapshot();
  row.ops_per_sec = static_cast<double>(total) / secs;
  row.ns_per_op = total ? secs * 1e9 / static_cast<double>(total) : 0;
  return row;
}

template <class Locks>
BenchRow median_of(unsigned repeats, const std::string& name, std::size_t threads, std::size_t monitors,
                   std::uint32_t duration_ms) {
  std::vector<BenchRow> rows;
  for (unsigned i = 0; i < std::max(1u, repeats); ++i) {
    rows.push_back(contended<Locks>(name, threads, monitors, duration_ms));
  }
  std::sort(rows.begin(), rows.end(),
            [](const BenchRow& a, const BenchRow& b) { return a.ops_per_sec < b.ops_per_sec; });
  return rows[rows.size() / 2];
}

bool identity(const CounterSnapshot& c) { return c.handoffs == c.grants - c.instant_acquires; }

}  // namespace

BenchReport run_bench(const BenchOptions& opt) {
  if (opt.baseline != "mcs") throw std::invalid_argument("unknown baseline '" + opt.baseline + "'");
  if (opt.max_threads == 0 || opt.monitors == 0) throw std::invalid_argument("threads and monitors must be positive");
  BenchReport report;

  report.uncontended_cjm_ns = uncontended_ns<CjmLocks>(opt.uncontended_ops, opt.samples);
  report.uncontended_baseline_ns = uncontended_ns<McsLocks>(opt.uncontended_ops, opt.samples);
  report.rows.push_back(BenchRow{"cjm", 0, 1, 1e9 / report.uncontended_cjm_ns, report.uncontended_cjm_ns, {}});
  report.rows.push_back(
      BenchRow{opt.baseline, 0, 1, 1e9 / report.uncontended_baseline_ns, report.uncontended_baseline_ns, {}});

  for (std::size_t t = 1; t <= opt.max_threads; ++t) {
    report.rows.push_back(median_of<CjmLocks>(opt.contended_repeats, "cjm", t, opt.monitors, opt.duration_ms));
    report.rows.push_back(
        median_of<McsLocks>(opt.contended_repeats, opt.baseline, t, opt.monitors, opt.duration_ms));
  }
  for (const auto& row : report.rows) {
    if (!identity(row.counters)) {
      report.handoff_identity = false;
      report.notes.push_back(row.lock + " threads=" + std::to_string(row.threads) +
                             ": handoffs != grants - instant_acquires");
    }
  }
  return report;
}

std::string bench_csv_header() {
  return "lock,threads,monitors,ops_per_sec,ns_per_op,parks,unparks,tail_swaps,handoffs,grants,"
         "instant_acquires,allocations";
}

std::string bench_csv_row(const BenchRow& r) {
  std::ostringstream os;
  os << r.lock << ',' << r.threads << ',' << r.monitors << ',' << static_cast<std::uint64_t>(r.ops_per_sec)
     << ',' << r.ns_per_op << ',' << r.counters.parks << ',' << r.counters.unparks << ','
     << r.counters.tail_swaps << ',' << r.counters.handoffs << ',' << r.counters.grants << ','
     << r.counters.instant_acquires << ',' << r.counters.allocations;
  return os.str();
}

void write_bench_csv(const BenchReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << bench_csv_header() << '\n';
  for (const auto& row : report.rows) out << bench_csv_row(row) << '\n';
}

}  // namespace cjm::harness
