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

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cjm::harness {

enum class StepKind {
  lock,
  unlock,
  wait,
  notify,
  notify_all,
  hash,
  interrupt,
  sync,
  blocked,
  owned,
  expect,
  inspect,
  sleep,
};

/// One step of a thread program. Which fields are meaningful depends on kind:
///   lock/unlock/notify/notify_all/hash   monitor
///   wait           monitor, timeout_ms (optional)
///   interrupt      thread (target)
///   sync           label (barrier id)
///   blocked        thread, monitor, label ("", "entry" or "wait")
///   owned          monitor, flag (expected)
///   expect         label ("notified" | "timedout" | "interrupted" | "imsx" | "ok")
///   inspect        monitor, thread (expected owner, "-" for none), names (waiters,
///                  checked when flag is set)
///   sleep          timeout_ms
struct Step {
  StepKind kind = StepKind::lock;
  int line = 0;
  std::string monitor;
  std::string thread;
  std::string label;
  std::optional<long> timeout_ms;
  bool flag = false;
  std::vector<std::string> names;

  std::string describe() const;
};

struct ThreadProgram {
  std::string name;
  std::vector<Step> steps;
};

struct Scenario {
  std::string name;
  std::vector<std::string> monitors;
  std::vector<ThreadProgram> threads;

  int monitor_index(const std::string& name) const;
  int thread_index(const std::string& name) const;
  /// Number of threads that reach barrier `label`.
  int barrier_parties(const std::string& label) const;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Parses the line-oriented scenario format:
///
///   # comment
///   monitor A B
///   thread T1: lock A; sync p1; unlock A
///
/// A thread may span several `thread` lines; steps are appended in order.
Scenario parse_scenario(const std::string& text, const std::string& name = "scenario");
Scenario load_scenario(const std::string& path);

}  // namespace cjm::harness
