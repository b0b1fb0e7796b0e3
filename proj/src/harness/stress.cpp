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

#include "stress.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cjm/audit.hpp"
#include "cjm/hash.hpp"
#include "cjm/monitor.hpp"

namespace cjm::harness {

OpMix parse_mix(const std::string& text) {
  OpMix mix{0, 0, 0, 0};
  std::istringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("mix entry '" + item + "' needs key:weight");
    const std::string key = item.substr(0, colon);
    unsigned weight = 0;
    try {
      weight = static_cast<unsigned>(std::stoul(item.substr(colon + 1)));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad weight in mix entry '" + item + "'");
    }
    if (key == "lock") {
      mix.lock = weight;
    } else if (key == "wait") {
      mix.wait = weight;
    } else if (key == "notify") {
      mix.notify = weight;
    } else if (key == "hash") {
      mix.hash = weight;
    } else {
      throw std::invalid_argument("unknown mix key '" + key + "'");
    }
  }
  if (mix.lock + mix.wait + mix.notify + mix.hash == 0) throw std::invalid_argument("mix weighs nothing");
  return mix;
}

std::string StressReport::summary() const {
  std::ostringstream os;
  os << (ok ? "ok" : "FAILED") << " in " << seconds << "s: grants=" << totals.grants
     << " handoffs=" << totals.handoffs << " parks=" << totals.parks << " usurps=" << totals.usurps
     << " betas=" << totals.betas << " waits=" << waits << " (notified=" << notified
     << " timedout=" << timed_out << " interrupted=" << interrupted << ") max_nodes=" << max_nodes
     << " bound=" << footprint_bound;
  return os.str();
}

namespace {

struct Shared {
  std::deque<Monitor> monitors;
  std::vector<std::uint64_t> counters;           // guarded by the matching monitor
  std::vector<std::atomic<std::uint64_t>> first_hash;
  std::atomic<std::size_t> done{0};
  std::atomic<std::size_t> untimed_waiters{0};
  std::mutex mutex;
  std::vector<std::string> problems;

  explicit Shared(std::size_t m) : monitors(m), counters(m, 0), first_hash(m) {}

  void problem(std::string p) {
    std::lock_guard g(mutex);
    if (problems.size() < 20) problems.push_back(std::move(p));
  }
};

struct Tally {
  std::vector<std::uint64_t> increments;
  std::uint64_t waits = 0, notified = 0, timed_out = 0, interrupted = 0;
};

void check_hash(Shared& sh, std::size_t m, std::uint64_t h) {
  std::uint64_t expected = 0;
  if (!sh.first_hash[m].compare_exchange_strong(expected, h) && expected != h) {
    sh.problem("monitor " + std::to_string(m) + " hash changed from " + std::to_string(expected) + " to " +
               std::to_string(h));
  }
}

void worker(Shared& sh, ThreadContext& ctx, const StressOptions& opt, std::size_t index, Tally& tally) {
  std::mt19937_64 rng(opt.seed * 1000003u + index);
  const unsigned total = opt.mix.lock + opt.mix.wait + opt.mix.notify + opt.mix.hash;
  const std::size_t nmon = sh.monitors.size();
  std::uniform_int_distribution<std::size_t> pick_monitor(0, nmon - 1);
  std::uniform_int_distribution<unsigned> pick_op(0, total - 1);
  std::uniform_int_distribution<unsigned> percent(0, 99);
  tally.increments.assign(nmon, 0);

  std::vector<std::size_t> all(nmon);
  for (std::size_t i = 0; i < nmon; ++i) all[i] = i;

  for (std::size_t it = 0; it < opt.iters; ++it) {
    unsigned op = pick_op(rng);
    if (op < opt.mix.lock) {
      const std::size_t depth = 1 + rng() % std::min(opt.max_depth, nmon);
      std::vector<std::size_t> chosen;
      std::sample(all.begin(), all.end(), std::back_inserter(chosen), depth, rng);  // ascending
      std::vector<std::size_t> entered;
      for (std::size_t m : chosen) {
        lock(ctx, sh.monitors[m]);
        entered.push_back(m);
        if (percent(rng) < 20) {
          lock(ctx, sh.monitors[m]);
          entered.push_back(m);
        }
        ++sh.counters[m];
        ++tally.increments[m];
      }
      for (auto m = entered.rbegin(); m != entered.rend(); ++m) unlock(ctx, sh.monitors[*m]);
      continue;
    }
    op -= opt.mix.lock;
    const std::size_t m = pick_monitor(rng);
    Monitor& mon = sh.monitors[m];
    if (op < opt.mix.wait) {
      const bool nested = percent(rng) < 25;
      lock(ctx, mon);
      if (nested) lock(ctx, mon);
      ++sh.counters[m];
      ++tally.increments[m];
      std::optional<std::chrono::nanoseconds> timeout;
      if (percent(rng) < opt.timed_wait_percent) {
        timeout = std::chrono::microseconds(rng() % (opt.max_timeout_us + 1));
      }
      // At least one thread must stay out of untimed waits to wake the rest.
      const bool may_wait = timeout || sh.untimed_waiters.fetch_add(1) + 1 < opt.threads;
      if (may_wait) {
        ++tally.waits;
        switch (wait(ctx, mon, timeout)) {
          case WaitResult::notified: ++tally.notified; break;
          case WaitResult::timed_out: ++tally.timed_out; break;
          case WaitResult::interrupted: ++tally.interrupted; break;
        }
      }
      if (!timeout) sh.untimed_waiters.fetch_sub(1);
      if (!holds_lock(ctx, mon)) sh.problem(ctx.name() + " lost monitor " + std::to_string(m) + " in wait");
      ++sh.counters[m];
      ++tally.increments[m];
      if (nested) unlock(ctx, mon);
      unlock(ctx, mon);
      continue;
    }
    op -= opt.mix.wait;
    if (op < opt.mix.notify) {
      lock(ctx, mon);
      if (percent(rng) < 50) {
        notify(ctx, mon);
      } else {
        notify_all(ctx, mon);
      }
      unlock(ctx, mon);
      continue;
    }
    check_hash(sh, m, hash_of(ctx, mon));
  }

  // Keep waking stragglers until every thread is through its iterations.
  sh.done.fetch_add(1);
  while (sh.done.load() < opt.threads) {
    for (auto& mon : sh.monitors) {
      lock(ctx, mon);
      notify_all(ctx, mon);
      unlock(ctx, mon);
    }
    std::this_thread::yield();
  }
}

}  // namespace

StressReport run_stress(const StressOptions& opt) {
  if (opt.threads == 0 || opt.monitors == 0) throw std::invalid_argument("threads and monitors must be positive");
  config().waitset_strategy = opt.strategy;
  config().spin.spin_budget = opt.spin;

  Shared sh(opt.monitors);
  std::vector<std::unique_ptr<ThreadContext>> contexts;
  for (std::size_t t = 0; t < opt.threads; ++t) {
    contexts.push_back(std::make_unique<ThreadContext>("S" + std::to_string(t)));
  }
  std::vector<Tally> tallies(opt.threads);

  const auto start = Clock::now();
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < opt.threads; ++t) {
    threads.emplace_back(worker, std::ref(sh), std::ref(*contexts[t]), std::cref(opt), t, std::ref(tallies[t]));
  }
  for (auto& th : threads) th.join();

  StressReport report;
  report.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  report.problems = std::move(sh.problems);

  std::vector<std::uint64_t> expected(opt.monitors, 0);
  for (const Tally& tl : tallies) {
    for (std::size_t m = 0; m < opt.monitors; ++m) expected[m] += tl.increments[m];
    report.waits += tl.waits;
    report.notified += tl.notified;
    report.timed_out += tl.timed_out;
    report.interrupted += tl.interrupted;
  }
  if (report.waits != report.notified + report.timed_out + report.interrupted) {
    report.problems.push_back("wait outcomes do not add up");
  }

  std::vector<ThreadContext*> ctxs;
  for (auto& c : contexts) ctxs.push_back(c.get());
  for (std::size_t m = 0; m < opt.monitors; ++m) {
    const std::string name = "M" + std::to_string(m);
    if (sh.counters[m] != expected[m]) {
      report.problems.push_back(name + " counter " + std::to_string(sh.counters[m]) + ", expected " +
                                std::to_string(expected[m]));
    }
    const MarkWord mark = sh.monitors[m].load();
    const std::uint64_t first = sh.first_hash[m].load();
    if (!mark.is_hashed() && !(mark.is_neutral() && expected[m] == 0 && first == 0)) {
      report.problems.push_back(name + " did not deflate to a hashed mark");
    } else if (mark.is_hashed() && first != 0 && mark.hash() != first) {
      report.problems.push_back(name + " deflated to a hash other than the first observed");
    }
    const AuditResult audit = audit_chain(sh.monitors[m], ctxs, name);
    if (!audit.ok) report.problems.push_back(audit.dump);
  }

  report.counters = sh.counters;
  report.expected = expected;
  for (std::size_t m = 0; m < opt.monitors; ++m) {
    report.final_marks.push_back(sh.monitors[m].load().raw());
    report.first_hashes.push_back(sh.first_hash[m].load());
  }

  const std::size_t k = std::min(opt.max_depth, opt.monitors);
  const bool timed = opt.mix.wait > 0 && opt.timed_wait_percent > 0;
  report.footprint_bound = k + (timed ? 2 : 1);
  for (const auto& c : contexts) {
    report.totals += c->counters().snapshot();
    report.max_nodes = std::max(report.max_nodes, c->total_allocated());
    if (c->active_count() != 0) report.problems.push_back(c->name() + " ends with active nodes");
    if (c->free_count() != c->total_allocated()) report.problems.push_back(c->name() + " leaked nodes");
  }
  if (report.max_nodes > report.footprint_bound) {
    report.problems.push_back("a thread allocated " + std::to_string(report.max_nodes) + " nodes, bound " +
                              std::to_string(report.footprint_bound));
  }
  report.ok = report.problems.empty();
  return report;
}

}  // namespace cjm::harness
