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

#include <atomic>

#include "cjm/thread_context.hpp"

namespace cjm {

/// Classic MCS lock on the same node machinery (per-thread free and active
/// stacks, spin-then-park handoff) minus waitsets, displaced marks and
/// recursion. The benchmark baseline.
class PlainMcsLock {
 public:
  void lock(ThreadContext& ctx);
  void unlock(ThreadContext& ctx);

 private:
  std::atomic<QueueNode*> tail_{nullptr};
  // Key for the per-thread node map; its mark word is never used.
  Monitor key_;
};

}  // namespace cjm
