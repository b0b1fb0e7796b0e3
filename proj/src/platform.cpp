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

#include "cjm/platform.hpp"

#include <cstdlib>
#include <string_view>
#include <thread>

namespace cjm {

std::uint32_t default_spin_budget() {
  static const std::uint32_t budget = std::thread::hardware_concurrency() > 1 ? 1024 : 0;
  return budget;
}

Config& config() {
  static Config instance;
  return instance;
}

void load_config_from_env() {
  Config& c = config();
  if (const char* spin = std::getenv("CJM_SPIN")) {
    c.spin.spin_budget = static_cast<std::uint32_t>(std::strtoul(spin, nullptr, 10));
  }
  if (const char* pause = std::getenv("CJM_PAUSE")) {
    c.spin.pause_hint = std::string_view(pause) != "0";
  }
  if (const char* strategy = std::getenv("CJM_WAITSET_STRATEGY")) {
    c.waitset_strategy = std::string_view(strategy) == "external" ? WaitsetStrategy::external
                                                                  : WaitsetStrategy::chain;
  }
}

Parker::Wake Parker::park(Deadline deadline) {
  if (state_.exchange(kEmpty, std::memory_order_acquire) == kPermit) return Wake::unparked;

  std::unique_lock lock(mutex_);
  int expected = kEmpty;
  if (!state_.compare_exchange_strong(expected, kParked, std::memory_order_acq_rel)) {
    // A permit arrived between the exchange and taking the mutex.
    state_.store(kEmpty, std::memory_order_relaxed);
    return Wake::unparked;
  }
  auto permitted = [&] { return state_.load(std::memory_order_acquire) == kPermit; };
  if (deadline) {
    cv_.wait_until(lock, *deadline, permitted);
  } else {
    cv_.wait(lock, permitted);
  }
  return state_.exchange(kEmpty, std::memory_order_acquire) == kPermit ? Wake::unparked
                                                                       : Wake::timeout;
}

void Parker::unpark() {
  if (state_.exchange(kPermit, std::memory_order_release) == kParked) {
    std::lock_guard lock(mutex_);
    cv_.notify_one();
  }
}

}  // namespace cjm
