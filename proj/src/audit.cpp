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

#include "cjm/audit.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cjm/ext_waitset.hpp"

namespace cjm {

std::string describe(const QueueNode* node) {
  const NodeState s = node->load_state();
  std::ostringstream os;
  os << node->home->name() << "@" << static_cast<const void*>(node) << "[" << to_string(s.status());
  if (s.placeholder()) os << "/placeholder";
  os << " dmw=0x" << std::hex << node->dmw.load() << std::dec << " nest=" << node->nesting << "]";
  return os.str();
}

ChainView view_chain(const Monitor& monitor, std::span<ThreadContext* const> contexts) {
  ChainView view;
  view.mark = monitor.load();

  std::vector<QueueNode*> nodes;
  for (ThreadContext* ctx : contexts) {
    for (QueueNode* n : ctx->active_nodes()) {
      if (n->monitor == &monitor) nodes.push_back(n);
    }
  }

  std::unordered_set<QueueNode*> placed;
  if (view.mark.is_queued()) {
    std::unordered_map<QueueNode*, QueueNode*> pred;
    for (QueueNode* n : nodes) {
      if (QueueNode* nx = n->next.load()) pred[nx] = n;
    }
    // Walk back from the tail through resolved links.
    for (QueueNode* n = view.mark.tail(); n != nullptr;) {
      if (!placed.insert(n).second) break;  // cycle; the audit reports it
      view.chain.push_back(n);
      auto it = pred.find(n);
      n = it == pred.end() ? nullptr : it->second;
    }
    std::reverse(view.chain.begin(), view.chain.end());
    if (!view.chain.empty()) {
      for (QueueNode* w = view.chain.front()->waitset_head; w != nullptr; w = w->wait_next) {
        if (std::find(view.waitset.begin(), view.waitset.end(), w) != view.waitset.end()) break;
        view.waitset.push_back(w);
        placed.insert(w);
      }
    }
  }
  for (QueueNode* n : nodes) {
    if (!placed.contains(n)) view.stray.push_back(n);
  }
  return view;
}

AuditResult audit_chain(const Monitor& monitor, std::span<ThreadContext* const> contexts,
                        std::string_view monitor_name) {
  AuditResult result;
  const ChainView view = view_chain(monitor, contexts);
  auto fail = [&](std::string problem) {
    result.ok = false;
    result.problems.push_back(std::move(problem));
  };

  const bool external = config().waitset_strategy == WaitsetStrategy::external;
  if (!view.mark.is_queued()) {
    if (!view.chain.empty()) fail("chain present while mark is not queued");
  } else {
    if (view.chain.empty()) fail("queued mark with no reachable nodes");
    const std::uint64_t dmw = view.chain.empty() ? 0 : view.chain.front()->dmw.load();
    if (dmw == 0 || (dmw & 1) == 0) fail("head dmw is not a hashed word");
    for (std::size_t i = 0; i < view.chain.size(); ++i) {
      const QueueNode* n = view.chain[i];
      const NodeState s = n->load_state();
      if (n->monitor != &monitor) fail("chain node " + describe(n) + " references another monitor");
      if (n->dmw.load() != dmw) fail("dmw mismatch at " + describe(n));
      if (i == 0) {
        if (!(s == kOwner || s == kPlaceholder)) fail("head is neither owner nor placeholder: " + describe(n));
        if (s == kPlaceholder && view.chain.size() > 1) fail("placeholder is not alone on its chain");
      } else {
        if (s != kEntry) fail("interior node not in Entry: " + describe(n));
        if (n->waitset_head != nullptr) fail("waitset on non-head node " + describe(n));
      }
    }
    for (const QueueNode* w : view.waitset) {
      const NodeStatus st = w->load_state().status();
      if (st != NodeStatus::waiting && st != NodeStatus::claimed) {
        fail("waitset member not waiting: " + describe(w));
      }
      if (w->monitor != &monitor) fail("waitset member references another monitor");
    }
    if (!view.chain.empty() && view.chain.front()->load_state() == kPlaceholder &&
        std::find(view.waitset.begin(), view.waitset.end(), view.chain.front()) == view.waitset.end()) {
      fail("placeholder missing from its own waitset");
    }
  }
  for (const QueueNode* n : view.stray) {
    const NodeState s = n->load_state();
    const bool parked_externally = external && s == kWaiting;
    // A cancelled waiter dropped from the set while its beta is queued.
    const bool cancelled = s == kClaimed;
    if (!parked_externally && !cancelled) fail("unaccounted active node " + describe(n));
  }

  std::ostringstream dump;
  dump << monitor_name << " mark=0x" << std::hex << view.mark.raw() << std::dec;
  if (view.mark.is_hashed()) dump << " (hashed " << view.mark.hash() << ")";
  if (view.mark.is_neutral()) dump << " (neutral)";
  dump << "\n  chain:";
  for (const QueueNode* n : view.chain) dump << " " << describe(n);
  dump << "\n  waitset:";
  for (const QueueNode* n : view.waitset) dump << " " << describe(n);
  if (!view.stray.empty()) {
    dump << "\n  other:";
    for (const QueueNode* n : view.stray) dump << " " << describe(n);
  }
  for (const std::string& p : result.problems) dump << "\n  ! " << p;
  result.dump = dump.str();
  return result;
}

}  // namespace cjm
