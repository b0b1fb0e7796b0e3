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

#include "system.hpp"

#include <algorithm>
#include <sstream>

#include "cjm/audit.hpp"
#include "cjm/ext_waitset.hpp"
#include "cjm/hash.hpp"

namespace cjm::harness {

// ---------------------------------------------------------------------------
// CjmSystem

CjmSystem::CjmSystem(std::vector<std::string> thread_names, std::vector<std::string> monitor_names)
    : monitors_(monitor_names.size()), monitor_names_(std::move(monitor_names)) {
  for (auto& n : thread_names) contexts_.push_back(std::make_unique<ThreadContext>(n));
}

CjmSystem::~CjmSystem() = default;

std::vector<ThreadContext*> CjmSystem::contexts() const {
  std::vector<ThreadContext*> out;
  for (const auto& c : contexts_) out.push_back(c.get());
  return out;
}

int CjmSystem::thread_of(const ThreadContext* ctx) const {
  for (std::size_t i = 0; i < contexts_.size(); ++i) {
    if (contexts_[i].get() == ctx) return static_cast<int>(i);
  }
  return -1;
}

void CjmSystem::lock(int t, int m) { cjm::lock(*contexts_[t], monitors_[m]); }
void CjmSystem::unlock(int t, int m) { cjm::unlock(*contexts_[t], monitors_[m]); }

WaitResult CjmSystem::wait(int t, int m, std::optional<std::chrono::milliseconds> timeout) {
  std::optional<std::chrono::nanoseconds> ns;
  if (timeout) ns = *timeout;
  return cjm::wait(*contexts_[t], monitors_[m], ns);
}

void CjmSystem::notify(int t, int m, bool all) {
  if (all) {
    cjm::notify_all(*contexts_[t], monitors_[m]);
  } else {
    cjm::notify(*contexts_[t], monitors_[m]);
  }
}

std::uint64_t CjmSystem::hash(int t, int m) { return hash_of(*contexts_[t], monitors_[m]); }

void CjmSystem::interrupt(int from, int to) { cjm::interrupt(*contexts_[from], *contexts_[to]); }

bool CjmSystem::holds(int t, int m) { return holds_lock(*contexts_[t], monitors_[m]); }

bool CjmSystem::is_blocked(int t, int m, BlockedKind kind) {
  const ThreadContext& ctx = *contexts_[t];
  const Monitor* on = ctx.blocked_on();
  if (on == nullptr) return false;
  if (m >= 0 && on != &monitors_[m]) return false;
  return kind == BlockedKind::none || ctx.blocked_kind() == kind;
}

MonitorSystem::Inspection CjmSystem::inspect(int m) {
  Inspection out;
  const auto ctxs = contexts();
  const ChainView view = view_chain(monitors_[m], ctxs);
  if (!view.chain.empty() && view.chain.front()->load_state() == kOwner) {
    out.owner = thread_of(view.chain.front()->home);
  }
  if (config().waitset_strategy == WaitsetStrategy::external) {
    const MarkWord mark = monitors_[m].load();
    if (mark.is_neutral()) return out;
    const std::uint64_t hash = mark.is_hashed() ? mark.hash()
                                          : MarkWord{view.chain.front()->dmw.load()}.hash();
    for (QueueNode* n : wait_table().snapshot(hash)) {
      if (n->monitor == &monitors_[m]) out.waiters.push_back(thread_of(n->home));
    }
  } else {
    for (QueueNode* n : view.waitset) {
      if (n->status() == NodeStatus::waiting) out.waiters.push_back(thread_of(n->home));
    }
  }
  return out;
}

std::vector<std::string> CjmSystem::audit() {
  std::vector<std::string> problems;
  const auto ctxs = contexts();
  for (std::size_t m = 0; m < monitors_.size(); ++m) {
    const AuditResult r = audit_chain(monitors_[m], ctxs, monitor_names_[m]);
    if (!r.ok) problems.push_back(r.dump);
    const MarkWord mark = monitors_[m].load();
    if (mark.is_queued()) problems.push_back(monitor_names_[m] + " still queued at end of run");
  }
  for (const auto& c : contexts_) {
    if (c->active_count() != 0) {
      problems.push_back(c->name() + " ends with " + std::to_string(c->active_count()) + " active nodes");
    }
    if (c->free_count() != c->total_allocated()) {
      problems.push_back(c->name() + " leaked nodes: allocated " + std::to_string(c->total_allocated()) +
                         ", free " + std::to_string(c->free_count()));
    }
    if (footprint_bound_ != 0 && c->total_allocated() > footprint_bound_) {
      problems.push_back(c->name() + " allocated " + std::to_string(c->total_allocated()) +
                         " nodes, bound " + std::to_string(footprint_bound_));
    }
  }
  return problems;
}

std::string CjmSystem::dump() {
  std::ostringstream os;
  const auto ctxs = contexts();
  for (std::size_t m = 0; m < monitors_.size(); ++m) {
    os << audit_chain(monitors_[m], ctxs, monitor_names_[m]).dump << "\n";
  }
  for (const auto& c : contexts_) {
    os << c->name() << ": active=" << c->active_count() << " free=" << c->free_count()
       << " allocated=" << c->total_allocated();
    if (const Monitor* on = c->blocked_on()) {
      for (std::size_t m = 0; m < monitors_.size(); ++m) {
        if (&monitors_[m] == on) {
          os << " blocked(" << (c->blocked_kind() == BlockedKind::wait ? "wait" : "entry") << " "
             << monitor_names_[m] << ")";
        }
      }
    }
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// OracleSystem

OracleSystem::OracleSystem(std::size_t threads, std::size_t monitors)
    : threads_(threads), monitors_(monitors) {}

void OracleSystem::grant_next(int m) {
  Mon& mon = monitors_[m];
  if (mon.owner != -1 || mon.entry.empty()) return;
  mon.owner = mon.entry.front();
  mon.entry.pop_front();
  mon.nesting = 0;
  threads_[mon.owner].cv.notify_all();
}

void OracleSystem::release(int m) {
  monitors_[m].owner = -1;
  grant_next(m);
}

void OracleSystem::enter(std::unique_lock<std::mutex>& guard, int t, int m) {
  Mon& mon = monitors_[m];
  if (mon.hash == 0) mon.hash = next_hash_++;
  mon.entry.push_back(t);
  grant_next(m);
  if (mon.owner == t) return;
  ThreadState& ts = threads_[t];
  ts.blocked_on = m;
  ts.kind = BlockedKind::entry;
  ts.cv.wait(guard, [&] { return mon.owner == t; });
  ts.blocked_on = -1;
  ts.kind = BlockedKind::none;
}

void OracleSystem::lock(int t, int m) {
  std::unique_lock guard(mutex_);
  if (monitors_[m].owner == t) {
    ++monitors_[m].nesting;
    return;
  }
  enter(guard, t, m);
}

void OracleSystem::unlock(int t, int m) {
  std::unique_lock guard(mutex_);
  Mon& mon = monitors_[m];
  if (mon.owner != t) throw IllegalMonitorState("unlock");
  if (mon.nesting > 0) {
    --mon.nesting;
    return;
  }
  release(m);
}

WaitResult OracleSystem::wait(int t, int m, std::optional<std::chrono::milliseconds> timeout) {
  std::unique_lock guard(mutex_);
  Mon& mon = monitors_[m];
  ThreadState& ts = threads_[t];
  if (mon.owner != t) throw IllegalMonitorState("wait");
  if (ts.interrupted) {
    ts.interrupted = false;
    return WaitResult::interrupted;
  }
  const auto deadline = timeout ? std::optional(Clock::now() + *timeout) : std::nullopt;
  const std::uint32_t depth = mon.nesting;
  ts.notified = false;
  mon.waiters.push_back(t);
  release(m);

  ts.blocked_on = m;
  ts.kind = BlockedKind::wait;
  auto woken = [&] { return ts.notified || ts.interrupted; };
  if (deadline) {
    ts.cv.wait_until(guard, *deadline, woken);
  } else {
    ts.cv.wait(guard, woken);
  }
  WaitResult result = WaitResult::notified;
  if (!ts.notified) {
    // Cancelled: leave the wait queue and re-enter at the entry tail.
    std::erase(mon.waiters, t);
    result = ts.interrupted ? WaitResult::interrupted : WaitResult::timed_out;
    if (result == WaitResult::interrupted) ts.interrupted = false;
    mon.entry.push_back(t);
    grant_next(m);
  }
  ts.kind = BlockedKind::entry;
  ts.cv.wait(guard, [&] { return mon.owner == t; });
  ts.blocked_on = -1;
  ts.kind = BlockedKind::none;
  mon.nesting = depth;
  return result;
}

void OracleSystem::notify(int t, int m, bool all) {
  std::unique_lock guard(mutex_);
  Mon& mon = monitors_[m];
  if (mon.owner != t) throw IllegalMonitorState(all ? "notifyAll" : "notify");
  while (!mon.waiters.empty()) {
    const int w = mon.waiters.front();
    mon.waiters.pop_front();
    threads_[w].notified = true;
    threads_[w].kind = BlockedKind::entry;
    mon.entry.push_back(w);
    if (!all) break;
  }
}

std::uint64_t OracleSystem::hash(int, int m) {
  std::unique_lock guard(mutex_);
  if (monitors_[m].hash == 0) monitors_[m].hash = next_hash_++;
  return monitors_[m].hash;
}

void OracleSystem::interrupt(int, int to) {
  std::unique_lock guard(mutex_);
  threads_[to].interrupted = true;
  threads_[to].cv.notify_all();
}

bool OracleSystem::holds(int t, int m) {
  std::unique_lock guard(mutex_);
  return monitors_[m].owner == t;
}

bool OracleSystem::is_blocked(int t, int m, BlockedKind kind) {
  std::unique_lock guard(mutex_);
  const ThreadState& ts = threads_[t];
  if (ts.blocked_on < 0) return false;
  if (m >= 0 && ts.blocked_on != m) return false;
  return kind == BlockedKind::none || ts.kind == kind;
}

MonitorSystem::Inspection OracleSystem::inspect(int m) {
  std::unique_lock guard(mutex_);
  Inspection out;
  out.owner = monitors_[m].owner;
  out.waiters.assign(monitors_[m].waiters.begin(), monitors_[m].waiters.end());
  return out;
}

std::vector<std::string> OracleSystem::audit() {
  std::unique_lock guard(mutex_);
  std::vector<std::string> problems;
  for (std::size_t m = 0; m < monitors_.size(); ++m) {
    const Mon& mon = monitors_[m];
    if (mon.owner != -1 || !mon.entry.empty() || !mon.waiters.empty()) {
      problems.push_back("oracle monitor " + std::to_string(m) + " not quiescent at end of run");
    }
  }
  return problems;
}

std::string OracleSystem::dump() {
  std::unique_lock guard(mutex_);
  std::ostringstream os;
  for (std::size_t m = 0; m < monitors_.size(); ++m) {
    const Mon& mon = monitors_[m];
    os << "monitor " << m << " owner=" << mon.owner << " entry=" << mon.entry.size()
       << " waiters=" << mon.waiters.size() << "\n";
  }
  return os.str();
}

}  // namespace cjm::harness
