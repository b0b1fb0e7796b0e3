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

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"

#include "runner.hpp"
#include "scenario.hpp"
#include "system.hpp"

using namespace cjm;
using namespace cjm::harness;
namespace fs = std::filesystem;

namespace {

std::vector<fs::path> corpus(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".scn") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

int error_line(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("parser reads monitors, multi-line threads and comments") {
  const Scenario sc = parse_scenario(
      "# leading comment\n"
      "monitor A B\n"
      "thread T1: lock A; wait A 25   # trailing\n"
      "thread T2: sync s; inspect A owner T1 waiters T2,T1\n"
      "thread T1: sync s; expect timedout; unlock A\n");
  REQUIRE(sc.monitors == std::vector<std::string>{"A", "B"});
  REQUIRE(sc.threads.size() == 2);
  REQUIRE(sc.threads[0].steps.size() == 5);
  CHECK(sc.threads[0].steps[1].kind == StepKind::wait);
  CHECK(sc.threads[0].steps[1].timeout_ms == 25);
  CHECK(sc.threads[0].steps[2].line == 5);
  const Step& ins = sc.threads[1].steps[1];
  CHECK(ins.kind == StepKind::inspect);
  CHECK(ins.thread == "T1");
  CHECK(ins.flag);
  CHECK(ins.names == std::vector<std::string>{"T2", "T1"});
  CHECK(sc.barrier_parties("s") == 2);
}

TEST_CASE("parse errors carry the offending line") {
  CHECK(error_line("monitor A\nthread T1: lok A\n") == 2);
  CHECK(error_line("monitor A\n\nthread T1: lock B\n") == 3);
  CHECK(error_line("monitor A\nthread T1: lock A\nthread T1: interrupt T9\n") == 3);
  CHECK(error_line("monitor A\nthread T1: wait A soon\n") == 2);
  CHECK(error_line("monitor A\nthread T1 lock A\n") == 2);
  CHECK(error_line("monitor A\nmonitor A\n") == 2);
  CHECK(error_line("monitor A\nthread T1: sync lonely\n") == 2);
  CHECK(error_line("monitor A\nthread T1: expect maybe\n") == 2);
  CHECK(error_line("monitor A\nthread T1: blocked T1 A parked\n") == 2);
  CHECK(error_line("monitor A\nbogus\n") == 2);
  CHECK(error_line("monitor A\n") == 1);
}

TEST_CASE("unlock without lock is an error on both systems") {
  const Scenario sc = parse_scenario("monitor A\nthread T1: unlock A; expect imsx\n");
  CjmSystem cjm({"T1"}, {"A"});
  OracleSystem oracle(1, 1);
  for (MonitorSystem* sys : {static_cast<MonitorSystem*>(&cjm), static_cast<MonitorSystem*>(&oracle)}) {
    const RunRecord rec = execute(sc, *sys);
    CHECK(rec.failures.empty());
    CHECK(rec.traces[0] == std::vector<std::string>{"unlock A: imsx"});
  }
}

TEST_CASE("oracle grants in arrival order and reports waiters") {
  const Scenario sc = parse_scenario(
      "monitor A\n"
      "thread W: lock A; wait A; expect notified; unlock A\n"
      "thread O: blocked W A wait; lock A; sync s; blocked E A entry; inspect A owner O waiters W\n"
      "thread O: notify A; inspect A owner O waiters -; unlock A\n"
      "thread E: sync s; lock A; unlock A\n");
  OracleSystem oracle(3, 1);
  const RunRecord rec = execute(sc, oracle);
  CHECK(rec.failures.empty());
  CHECK(rec.grants[0] == std::vector<std::string>{"W", "O", "E", "W"});
}

TEST_CASE("a divergent expectation is reported") {
  const Scenario sc = parse_scenario("monitor A\nthread T1: lock A; wait A 5; expect notified; unlock A\n");
  const ScenarioReport r = run_scenario(sc, {});
  CHECK_FALSE(r.ok);
}

TEST_CASE("the bundled corpus matches the oracle under both strategies") {
  const auto files = corpus(CJM_SCENARIO_DIR);
  REQUIRE(files.size() >= 20);
  for (WaitsetStrategy strategy : {WaitsetStrategy::chain, WaitsetStrategy::external}) {
    for (const auto& f : files) {
      CAPTURE(f.string());
      ScenarioOptions so;
      so.strategy = strategy;
      const ScenarioReport r = run_scenario(load_scenario(f.string()), so);
      for (const auto& line : r.lines) MESSAGE(line);
      CHECK(r.ok);
    }
  }
  config().waitset_strategy = WaitsetStrategy::chain;
}

TEST_CASE("schedule counting is the multinomial of step counts") {
  const Scenario sc = parse_scenario(
      "monitor A\n"
      "thread W: lock A; wait A 1; unlock A\n"
      "thread N: lock A; notify A; unlock A\n");
  CHECK(count_schedules(sc) == 20);
}

TEST_CASE("exploring notify against a timeout yields one result per waiter") {
  const Scenario sc = load_scenario(std::string(CJM_SCENARIO_DIR) + "/explore/notify_vs_timeout.scn");
  for (WaitsetStrategy strategy : {WaitsetStrategy::chain, WaitsetStrategy::external}) {
    ExploreOptions eo;
    eo.strategy = strategy;
    const ExploreReport r = explore(sc, eo);
    for (const auto& p : r.problems) MESSAGE(p);
    CHECK(r.ok());
    CHECK(r.exhaustive);
    CHECK(r.schedules == 20);
    std::size_t runs = 0;
    for (const auto& [outcome, n] : r.outcomes) {
      CHECK((outcome == "notified" || outcome == "timedout"));
      runs += n;
    }
    CHECK(runs == 20);
  }
  config().waitset_strategy = WaitsetStrategy::chain;
}

TEST_CASE("explore rejects barrier steps") {
  const Scenario sc = parse_scenario("monitor A\nthread T1: sync s\nthread T2: sync s\n");
  CHECK_FALSE(explore(sc, {}).ok());
}
