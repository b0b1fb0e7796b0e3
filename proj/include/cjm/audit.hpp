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

#include <span>
#include <string>
#include <vector>

#include "cjm/thread_context.hpp"

namespace cjm {

/// Snapshot of one monitor's queue state, reconstructed from the mark and the
/// active lists of `contexts`. Only meaningful while those threads are
/// quiescent (parked, blocked, or outside the library).
struct ChainView {
  MarkWord mark;
  std::vector<QueueNode*> chain;    // head first, tail last
  std::vector<QueueNode*> waitset;  // as carried by the head
  std::vector<QueueNode*> stray;    // active nodes for the monitor on neither list
};

ChainView view_chain(const Monitor& monitor, std::span<ThreadContext* const> contexts);

struct AuditResult {
  bool ok = true;
  std::vector<std::string> problems;
  std::string dump;
};

/// Chain-shape audit: single head in Owner or placeholder state, Entry
/// interior, uniform nonzero displaced marks, waitset only on the head,
/// placeholder alone on its chain, no active node unaccounted for.
AuditResult audit_chain(const Monitor& monitor, std::span<ThreadContext* const> contexts,
                        std::string_view monitor_name = "monitor");

std::string describe(const QueueNode* node);

}  // namespace cjm
