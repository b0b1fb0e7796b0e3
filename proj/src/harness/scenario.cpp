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

#include "scenario.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace cjm::harness {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) parts.push_back(trim(part));
  return parts;
}

long parse_ms(const std::string& word, int line) {
  long value = 0;
  const auto* end = word.data() + word.size();
  auto [ptr, ec] = std::from_chars(word.data(), end, value);
  if (ec != std::errc{} || ptr != end || value < 0) {
    throw ParseError(line, "expected a non-negative millisecond count, got '" + word + "'");
  }
  return value;
}

const std::map<std::string, StepKind, std::less<>>& keywords() {
  static const std::map<std::string, StepKind, std::less<>> table{
      {"lock", StepKind::lock},         {"unlock", StepKind::unlock},
      {"wait", StepKind::wait},         {"notify", StepKind::notify},
      {"notifyall", StepKind::notify_all}, {"hash", StepKind::hash},
      {"interrupt", StepKind::interrupt}, {"sync", StepKind::sync},
      {"blocked", StepKind::blocked},   {"owned", StepKind::owned},
      {"expect", StepKind::expect},     {"inspect", StepKind::inspect},
      {"sleep", StepKind::sleep},
  };
  return table;
}

Step parse_step(const std::string& text, int line) {
  const auto words = split_words(text);
  if (words.empty()) throw ParseError(line, "empty step");
  auto it = keywords().find(words[0]);
  if (it == keywords().end()) throw ParseError(line, "unknown step '" + words[0] + "'");
  Step step;
  step.kind = it->second;
  step.line = line;
  auto arity = [&](std::size_t lo, std::size_t hi) {
    if (words.size() - 1 < lo || words.size() - 1 > hi) {
      throw ParseError(line, "wrong number of arguments to '" + words[0] + "'");
    }
  };
  switch (step.kind) {
    case StepKind::lock:
    case StepKind::unlock:
    case StepKind::notify:
    case StepKind::notify_all:
    case StepKind::hash:
      arity(1, 1);
      step.monitor = words[1];
      break;
    case StepKind::wait:
      arity(1, 2);
      step.monitor = words[1];
      if (words.size() == 3) step.timeout_ms = parse_ms(words[2], line);
      break;
    case StepKind::interrupt:
      arity(1, 1);
      step.thread = words[1];
      break;
    case StepKind::sync:
      arity(1, 1);
      step.label = words[1];
      break;
    case StepKind::blocked:
      arity(2, 3);
      step.thread = words[1];
      step.monitor = words[2];
      if (words.size() == 4) {
        step.label = words[3];
        if (step.label != "entry" && step.label != "wait") {
          throw ParseError(line, "blocked kind must be 'entry' or 'wait'");
        }
      }
      break;
    case StepKind::owned:
      arity(2, 2);
      step.monitor = words[1];
      if (words[2] != "true" && words[2] != "false") throw ParseError(line, "owned expects true|false");
      step.flag = words[2] == "true";
      break;
    case StepKind::expect: {
      arity(1, 1);
      static const std::set<std::string> results{"notified", "timedout", "interrupted", "imsx", "ok"};
      if (!results.contains(words[1])) throw ParseError(line, "unknown expectation '" + words[1] + "'");
      step.label = words[1];
      break;
    }
    case StepKind::inspect:
      // inspect A owner T2 waiters T6,T7
      if (words.size() < 4 || words[2] != "owner") {
        throw ParseError(line, "inspect syntax: inspect M owner T [waiters A,B]");
      }
      step.monitor = words[1];
      step.thread = words[3];
      if (words.size() > 4) {
        if (words.size() != 6 || words[4] != "waiters") {
          throw ParseError(line, "inspect syntax: inspect M owner T [waiters A,B]");
        }
        step.flag = true;
        if (words[5] != "-") step.names = split(words[5], ',');
      }
      break;
    case StepKind::sleep:
      arity(1, 1);
      step.timeout_ms = parse_ms(words[1], line);
      break;
  }
  return step;
}

}  // namespace

std::string Step::describe() const {
  switch (kind) {
    case StepKind::lock: return "lock " + monitor;
    case StepKind::unlock: return "unlock " + monitor;
    case StepKind::wait:
      return "wait " + monitor + (timeout_ms ? " " + std::to_string(*timeout_ms) : "");
    case StepKind::notify: return "notify " + monitor;
    case StepKind::notify_all: return "notifyall " + monitor;
    case StepKind::hash: return "hash " + monitor;
    case StepKind::interrupt: return "interrupt " + thread;
    case StepKind::sync: return "sync " + label;
    case StepKind::blocked: return "blocked " + thread + " " + monitor + (label.empty() ? "" : " " + label);
    case StepKind::owned: return "owned " + monitor + (flag ? " true" : " false");
    case StepKind::expect: return "expect " + label;
    case StepKind::inspect: return "inspect " + monitor;
    case StepKind::sleep: return "sleep " + std::to_string(timeout_ms.value_or(0));
  }
  return "?";
}

int Scenario::monitor_index(const std::string& n) const {
  auto it = std::find(monitors.begin(), monitors.end(), n);
  return it == monitors.end() ? -1 : static_cast<int>(it - monitors.begin());
}

int Scenario::thread_index(const std::string& n) const {
  for (std::size_t i = 0; i < threads.size(); ++i) {
    if (threads[i].name == n) return static_cast<int>(i);
  }
  return -1;
}

int Scenario::barrier_parties(const std::string& label) const {
  int parties = 0;
  for (const auto& t : threads) {
    if (std::any_of(t.steps.begin(), t.steps.end(), [&](const Step& s) {
          return s.kind == StepKind::sync && s.label == label;
        })) {
      ++parties;
    }
  }
  return parties;
}

Scenario parse_scenario(const std::string& text, const std::string& name) {
  Scenario sc;
  sc.name = name;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string content = trim(raw);
    if (content.empty()) continue;

    const std::string keyword = split_words(content).front();
    if (keyword == "monitor" || keyword == "monitors") {
      auto words = split_words(content);
      if (words.size() < 2) throw ParseError(line, "monitor declaration needs a name");
      for (std::size_t i = 1; i < words.size(); ++i) {
        if (sc.monitor_index(words[i]) >= 0) throw ParseError(line, "duplicate monitor " + words[i]);
        sc.monitors.push_back(words[i]);
      }
      continue;
    }
    if (content.rfind("thread ", 0) == 0) {
      const auto colon = content.find(':');
      if (colon == std::string::npos) throw ParseError(line, "thread line needs ':'");
      const std::string tname = trim(std::string_view(content).substr(7, colon - 7));
      if (tname.empty() || tname.find(' ') != std::string::npos) {
        throw ParseError(line, "bad thread name '" + tname + "'");
      }
      int idx = sc.thread_index(tname);
      if (idx < 0) {
        sc.threads.push_back(ThreadProgram{tname, {}});
        idx = static_cast<int>(sc.threads.size()) - 1;
      }
      for (const std::string& part : split(content.substr(colon + 1), ';')) {
        if (part.empty()) continue;
        sc.threads[idx].steps.push_back(parse_step(part, line));
      }
      continue;
    }
    throw ParseError(line, "expected 'monitor' or 'thread' declaration");
  }

  if (sc.threads.empty()) throw ParseError(line, "scenario declares no threads");
  for (const auto& t : sc.threads) {
    for (const Step& s : t.steps) {
      if (!s.monitor.empty() && sc.monitor_index(s.monitor) < 0) {
        throw ParseError(s.line, "undeclared monitor '" + s.monitor + "'");
      }
      if (!s.thread.empty() && s.thread != "-" && sc.thread_index(s.thread) < 0) {
        throw ParseError(s.line, "undeclared thread '" + s.thread + "'");
      }
      for (const auto& n : s.names) {
        if (sc.thread_index(n) < 0) throw ParseError(s.line, "undeclared thread '" + n + "'");
      }
      if (s.kind == StepKind::sync && sc.barrier_parties(s.label) < 2) {
        throw ParseError(s.line, "barrier '" + s.label + "' has a single participant");
      }
    }
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), std::filesystem::path(path).stem().string());
}

}  // namespace cjm::harness
