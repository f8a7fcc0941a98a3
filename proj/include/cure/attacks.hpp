/*
 * Copyright 2026 The cure-sim Authors
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

#ifndef CURE_ATTACKS_HPP_
#define CURE_ATTACKS_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cure/scenario.hpp"

namespace cure {

enum class AttackVerdict : std::uint8_t { kContained, kLeaked };
const char* to_string(AttackVerdict v);

struct AttackParams {
  std::string victim = "victim";
  std::string attacker = "attacker";
  std::string device = "dma0";
  // prime_probe: "strict" (victim in CP-STRICT), "basic" or "idle".
  std::string variant = "strict";
  // Turns off the defense the attack targets.
  bool negative_control = false;
  int trials = 1000;
  int training_trials = 200;
  std::uint32_t victim_ways = 4;

  // Overrides from a scenario's "attack" object.
  Status apply(const std::map<std::string, std::string>& fields);
};

struct AttackResult {
  AttackVerdict verdict = AttackVerdict::kContained;
  std::uint64_t probes = 0;  // attacker transactions aimed at protected data
  std::uint64_t leaks = 0;   // probes that returned data or went unflagged
  double accuracy = 0.0;     // prime_probe only
  std::string detail;
};

// Each attack runs the scenario's events first, then sets up any missing
// enclave it needs from the scenario's packages and attacks.
Result<AttackResult> attack_os_probe(const Scenario& scenario, const AttackParams& params);
Result<AttackResult> attack_dma(const Scenario& scenario, const AttackParams& params);
Result<AttackResult> attack_prime_probe(const Scenario& scenario, const AttackParams& params);
Result<AttackResult> attack_pt_escape(const Scenario& scenario, const AttackParams& params);
Result<AttackResult> attack_rollback(const Scenario& scenario, const AttackParams& params);

const std::vector<std::string>& attack_names();
Result<AttackResult> run_attack(std::string_view name, const Scenario& scenario,
                                const AttackParams& params);

// A scenario with a victim, an attacker owning DMA device "dma0", and no
// events. Packages are signed for spec's ecosystem.
Scenario builtin_attack_scenario(const MachineSpec& spec = {});

// Signed package bytes for `spec`'s ecosystem.
Bytes build_test_package(const MachineSpec& spec, const EnclaveConfig& config, ByteSpan binary);
// Deterministic stand-in binary of n bytes.
Bytes test_binary(std::string_view name, std::size_t n);

struct OverheadPoint {
  std::uint32_t ways = 0;
  Cycles cycles = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  double overhead = 0.0;  // relative to the last entry of `ways`
};

// Cycles of a cyclic working-set workload run by a CP-STRICT enclave with
// each way count. The working set holds lines_per_set lines in every set.
Result<std::vector<OverheadPoint>> partition_overhead(const MachineSpec& spec,
                                                      const std::vector<std::uint32_t>& ways,
                                                      std::uint32_t lines_per_set = 12,
                                                      int rounds = 8);

}  // namespace cure

#endif  // CURE_ATTACKS_HPP_
