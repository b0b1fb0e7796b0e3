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

// cjm: scenario runner, stress driver and benchmark for the monitor library.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>

#include "bench.hpp"
#include "runner.hpp"
#include "stress.hpp"

namespace fs = std::filesystem;
using namespace cjm;
using namespace cjm::harness;

namespace {

const std::map<std::string, WaitsetStrategy> kStrategies{
    {"chain", WaitsetStrategy::chain},
    {"external", WaitsetStrategy::external},
};

std::vector<std::string> expand(const std::vector<std::string>& inputs) {
  std::vector<std::string> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.path().extension() == ".scn") found.push_back(e.path().string());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(in);
    }
  }
  return files;
}

int cmd_run(const std::vector<std::string>& inputs, WaitsetStrategy strategy, std::uint32_t spin,
            bool explore_mode, std::size_t max_schedules, std::uint64_t seed, bool oracle) {
  int failures = 0;
  for (const auto& path : expand(inputs)) {
    Scenario sc;
    try {
      sc = load_scenario(path);
    } catch (const std::exception& e) {
      std::cout << "FAIL " << path << ": " << e.what() << "\n";
      ++failures;
      continue;
    }
    if (explore_mode) {
      const ExploreReport r = explore(sc, {strategy, spin, max_schedules, seed});
      std::cout << (r.ok() ? "PASS " : "FAIL ") << sc.name << ": " << r.schedules << " schedules"
                << (r.exhaustive ? " (exhaustive)" : " (sampled of " + std::to_string(r.total_schedules) + ")")
                << "\n";
      for (const auto& [outcome, n] : r.outcomes) {
        std::cout << "  outcome [" << (outcome.empty() ? "-" : outcome) << "] x" << n << "\n";
      }
      for (const auto& p : r.problems) std::cout << "  " << p << "\n";
      failures += r.ok() ? 0 : 1;
    } else {
      ScenarioOptions so;
      so.strategy = strategy;
      so.spin = spin;
      so.compare_oracle = oracle;
      const ScenarioReport r = run_scenario(sc, so);
      std::cout << (r.ok ? "PASS " : "FAIL ") << sc.name << "\n";
      for (const auto& line : r.lines) std::cout << "  " << line << "\n";
      failures += r.ok ? 0 : 1;
    }
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  load_config_from_env();
  CLI::App app{"cjm: compact monitor scenario runner, stress driver and benchmark"};
  app.require_subcommand(1);

  WaitsetStrategy strategy = config().waitset_strategy;
  std::uint32_t spin = config().spin.spin_budget;

  auto* run = app.add_subcommand("run", "Run scenario files (or directories of .scn files)");
  std::vector<std::string> inputs;
  bool explore_mode = false, no_oracle = false;
  std::size_t max_schedules = 5000;
  std::uint64_t run_seed = 1;
  run->add_option("scenarios", inputs, "Scenario files or directories")->required()->check(CLI::ExistingPath);
  run->add_option("--strategy", strategy, "Waitset strategy")
      ->transform(CLI::CheckedTransformer(kStrategies, CLI::ignore_case));
  run->add_option("--spin", spin, "Spin budget before parking");
  run->add_flag("--explore", explore_mode, "Run every step interleaving and check invariants");
  run->add_option("--max-schedules", max_schedules, "Schedule cap for --explore before sampling");
  run->add_option("--seed", run_seed, "Sampling seed for --explore");
  run->add_flag("--no-oracle", no_oracle, "Skip the comparison with the reference monitors");

  auto* stress = app.add_subcommand("stress", "Randomized lock/wait/notify/hash traffic");
  StressOptions so;
  std::string mix = "lock:70,wait:10,notify:10,hash:10";
  stress->add_option("--threads", so.threads)->check(CLI::PositiveNumber);
  stress->add_option("--monitors", so.monitors)->check(CLI::PositiveNumber);
  stress->add_option("--iters", so.iters, "Operations per thread");
  stress->add_option("--seed", so.seed);
  stress->add_option("--mix", mix, "Weights, e.g. lock:70,wait:10,notify:10,hash:10");
  stress->add_option("--timed-percent", so.timed_wait_percent, "Share of waits with a timeout")
      ->check(CLI::Range(0, 100));
  stress->add_option("--strategy", strategy, "Waitset strategy")
      ->transform(CLI::CheckedTransformer(kStrategies, CLI::ignore_case));
  stress->add_option("--spin", spin, "Spin budget before parking");

  auto* bench = app.add_subcommand("bench", "Throughput against the MCS baseline");
  BenchOptions bo;
  std::string csv;
  bench->add_option("--max-threads", bo.max_threads)->check(CLI::PositiveNumber);
  bench->add_option("--monitors", bo.monitors)->check(CLI::PositiveNumber);
  bench->add_option("--baseline", bo.baseline)->check(CLI::IsMember({"mcs"}));
  bench->add_option("--duration-ms", bo.duration_ms, "Per contended point");
  bench->add_option("--repeats", bo.contended_repeats, "Contended runs per point; the median is kept");
  bench->add_option("--csv", csv, "Write results as CSV");
  bench->add_option("--spin", spin, "Spin budget before parking");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      return cmd_run(inputs, strategy, spin, explore_mode, max_schedules, run_seed, !no_oracle);
    }
    if (*stress) {
      so.mix = parse_mix(mix);
      so.strategy = strategy;
      so.spin = spin;
      const StressReport r = run_stress(so);
      std::cout << r.summary() << "\n";
      for (const auto& p : r.problems) std::cout << "  " << p << "\n";
      return r.ok ? 0 : 1;
    }
    if (*bench) {
      config().spin.spin_budget = spin;
      const BenchReport r = run_bench(bo);
      std::cout << bench_csv_header() << "\n";
      for (const auto& row : r.rows) std::cout << bench_csv_row(row) << "\n";
      std::cout << "uncontended ns/op: cjm " << r.uncontended_cjm_ns << ", " << bo.baseline << " "
                << r.uncontended_baseline_ns << " (ratio " << r.uncontended_cjm_ns / r.uncontended_baseline_ns
                << ")\n";
      std::cout << "handoffs == grants - instant_acquires: " << (r.handoff_identity ? "yes" : "NO") << "\n";
      for (const auto& n : r.notes) std::cout << "  " << n << "\n";
      if (!csv.empty()) write_bench_csv(r, csv);
      return r.handoff_identity ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "cjm: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
