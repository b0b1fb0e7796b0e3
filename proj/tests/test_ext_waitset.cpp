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

#include <atomic>
#include <deque>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "doctest.h"

#include "cjm/audit.hpp"
#include "cjm/ext_waitset.hpp"
#include "cjm/hash.hpp"
#include "test_support.hpp"

using namespace cjm;
using namespace std::chrono_literals;
using cjm::test::blocked_on;

namespace {

struct StrategyScope {
  explicit StrategyScope(WaitsetStrategy s) : saved(config().waitset_strategy) {
    config().waitset_strategy = s;
  }
  ~StrategyScope() { config().waitset_strategy = saved; }
  WaitsetStrategy saved;
};

/// Two monitors whose identity hashes select the same bucket.
struct CollidingPair {
  std::deque<Monitor> pool;
  Monitor* a = nullptr;
  Monitor* b = nullptr;

  explicit CollidingPair(ThreadContext& ctx) {
    std::vector<Monitor*> by_bucket(WaitTable::kBuckets, nullptr);
    while (b == nullptr) {
      Monitor& m = pool.emplace_back();
      const auto idx = WaitTable::index(hash_of(ctx, m));
      if (by_bucket[idx] != nullptr) {
        a = by_bucket[idx];
        b = &m;
      } else {
        by_bucket[idx] = &m;
      }
    }
  }
};

struct Waiter {
  explicit Waiter(std::string name) : ctx(std::move(name)) {}
  ThreadContext ctx;
  std::atomic<int> result{-1};
  std::thread thread;
  void start(Monitor& m, std::optional<std::chrono::nanoseconds> timeout, std::mutex* mu = nullptr,
             std::vector<std::string>* log = nullptr) {
    thread = std::thread([=, this, &m] {
      lock(ctx, m);
      result = static_cast<int>(wait(ctx, m, timeout));
      if (log != nullptr) {
        std::lock_guard g(*mu);
        log->push_back(ctx.name());
      }
      unlock(ctx, m);
    });
  }
  WaitResult get() const { return static_cast<WaitResult>(result.load()); }
};

}  // namespace

TEST_CASE("external wait leaves no placeholder and notify morphs the waiter") {
  StrategyScope scope(WaitsetStrategy::external);
  Monitor m;
  Waiter w("W");
  ThreadContext n("N");
  w.start(m, std::nullopt);
  REQUIRE(blocked_on(w.ctx, m, BlockedKind::wait));
  CHECK(m.load().is_hashed());  // deflated, waiter lives in the bucket
  const auto h = m.load().hash();
  CHECK(wait_table().snapshot(h).size() == 1);

  lock(n, m);
  const auto before = n.counters().snapshot();
  notify(n, m);
  const auto delta = n.counters().snapshot() - before;
  CHECK(delta.tail_swaps == 1);
  CHECK(delta.unparks == 0);
  CHECK(delta.guard_acquisitions >= 1);
  CHECK(m.load().tail()->home == &w.ctx);
  unlock(n, m);
  w.thread.join();
  CHECK(w.get() == WaitResult::notified);
  CHECK(wait_table().snapshot(h).empty());
  CHECK(m.load() == encode_hashed(h));
}

TEST_CASE("chain strategy notify takes no guard") {
  StrategyScope scope(WaitsetStrategy::chain);
  Monitor m;
  Waiter w("W");
  ThreadContext n("N");
  w.start(m, std::nullopt);
  REQUIRE(blocked_on(w.ctx, m, BlockedKind::wait));
  lock(n, m);
  const auto before = n.counters().snapshot();
  notify(n, m);
  CHECK((n.counters().snapshot() - before).guard_acquisitions == 0);
  unlock(n, m);
  w.thread.join();
}

TEST_CASE("colliding monitors share a bucket without cross-talk") {
  StrategyScope scope(WaitsetStrategy::external);
  ThreadContext setup("setup");
  CollidingPair pair(setup);
  Monitor& a = *pair.a;
  Monitor& b = *pair.b;

  std::mutex mu;
  std::vector<std::string> log;
  Waiter a1("A1"), b1("B1"), a2("A2"), b2("B2");
  a1.start(a, std::nullopt, &mu, &log);
  REQUIRE(blocked_on(a1.ctx, a, BlockedKind::wait));
  b1.start(b, std::nullopt, &mu, &log);
  REQUIRE(blocked_on(b1.ctx, b, BlockedKind::wait));
  a2.start(a, std::nullopt, &mu, &log);
  REQUIRE(blocked_on(a2.ctx, a, BlockedKind::wait));
  b2.start(b, std::nullopt, &mu, &log);
  REQUIRE(blocked_on(b2.ctx, b, BlockedKind::wait));
  CHECK(wait_table().snapshot(hash_of(setup, a)).size() == 4);

  ThreadContext n("N");
  lock(n, a);
  notify(n, a);
  // Only A1 moved; B's waiters stay parked in the shared bucket.
  CHECK(a.load().tail()->home == &a1.ctx);
  CHECK(wait_table().snapshot(hash_of(setup, a)).size() == 3);
  unlock(n, a);
  a1.thread.join();

  lock(n, b);
  notify_all(n, b);
  CHECK(wait_table().snapshot(hash_of(setup, a)).size() == 1);
  unlock(n, b);
  b1.thread.join();
  b2.thread.join();
  {
    std::lock_guard g(mu);
    CHECK(log == std::vector<std::string>{"A1", "B1", "B2"});
  }
  CHECK(a2.ctx.blocked_on() == &a);

  lock(n, a);
  notify_all(n, a);
  unlock(n, a);
  a2.thread.join();
  CHECK(wait_table().snapshot(hash_of(setup, a)).empty());
}

TEST_CASE("external timeout self-removes and reacquires without a beta node") {
  StrategyScope scope(WaitsetStrategy::external);
  Monitor m;
  ThreadContext ctx;
  lock(ctx, m);
  const auto allocated = ctx.total_allocated();
  CHECK(wait(ctx, m, 20ms) == WaitResult::timed_out);
  CHECK(holds_lock(ctx, m));
  CHECK(ctx.total_allocated() == allocated);
  CHECK(ctx.counters().betas.load() == 0);
  CHECK(wait_table().snapshot(hash_of(ctx, m)).empty());
  unlock(ctx, m);
  CHECK(m.load().is_hashed());
}

TEST_CASE("external interrupt while another thread holds the monitor") {
  StrategyScope scope(WaitsetStrategy::external);
  Monitor m;
  Waiter w("W");
  ThreadContext holder("H");
  w.start(m, std::nullopt);
  REQUIRE(blocked_on(w.ctx, m, BlockedKind::wait));
  lock(holder, m);
  interrupt(holder, w.ctx);
  REQUIRE(blocked_on(w.ctx, m, BlockedKind::entry));
  std::vector<ThreadContext*> all{&w.ctx, &holder};
  const AuditResult audit = audit_chain(m, all);
  CHECK_MESSAGE(audit.ok, audit.dump);
  unlock(holder, m);
  w.thread.join();
  CHECK(w.get() == WaitResult::interrupted);
  CHECK(w.ctx.total_allocated() == 1);
}
