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

#ifndef CURE_SCENARIO_HPP_
#define CURE_SCENARIO_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cure/simulation.hpp"

namespace cure {

enum class EventKind : std::uint8_t {
  kInstall,
  kUpdate,
  kSetup,
  kTeardown,
  kRun,
  kYield,
  kAccess,
  kSyscall,
  kInterrupt,
  kDma,
  kHandoff,
  kAttest,
  kAllocateWays,
  kSetMode,
  kAddPage,
  kCheckpoint,
  kSealSmState,
  kReboot,
};

const char* to_string(EventKind k);

// Address as written in a scenario: an absolute value, or an offset from an
// enclave region ("alpha+0x40"), one of its areas ("alpha.heap+0x10") or a
// peripheral's MMIO window ("mmio.nic+0x8"). Resolved when the event runs.
struct AddressExpr {
  std::string target;  // empty for absolute
  std::string area;    // base, code, pt, state, heap, shared, mmio
  std::int64_t offset = 0;

  static Result<AddressExpr> Parse(std::string_view text);
};

struct Event {
  EventKind kind = EventKind::kCheckpoint;
  std::string path;  // "events[3]", for error messages

  std::string label;   // enclave the event is about
  std::string actor;   // os, fw, sm or an enclave label
  int core = 0;
  BusOp op = BusOp::kRead;
  std::optional<AddressExpr> address;
  bool is_virtual = false;
  std::uint32_t size = 8;
  std::uint32_t stride = 0;  // address step between repeats
  std::optional<Bytes> value;
  TrapClass trap_class = TrapClass::kExternalInterrupt;
  int count = 1;
  std::string device;
  std::string from;
  std::string to;
  std::array<std::uint8_t, 32> nonce{};
  std::uint32_t ways = 0;
  CacheMode mode = CacheMode::kBasic;
  std::uint32_t virtual_page = 0;
  std::uint8_t perms = 0x3;
  std::string package;  // package key for install/update
  std::string name;     // checkpoint name
  int repeat = 1;
  // Error code name, "ok", "allowed" or "redirected". Unset: must succeed.
  std::optional<std::string> expect;
};

struct Scenario {
  MachineSpec spec;
  std::map<std::string, Bytes> packages;  // key -> .cep bytes
  std::vector<Event> events;
  std::map<std::string, std::string> attack;  // parameters for attack runs
};

// Errors are ScenarioError with a "line:col" prefix for syntax errors or a
// field path such as "events[2].address" otherwise. Package paths resolve
// relative to base_dir.
Result<Scenario> parse_scenario(std::string_view text,
                                const std::filesystem::path& base_dir = {});
Result<Scenario> load_scenario(const std::filesystem::path& file);

// Enclave config in the human-readable form used by `package build`:
//   {"label": "alpha", "version": 1, "type": "user", "memory_bytes": 65536,
//    "cache_mode": "strict", "cache_ways": 2, "cores": 0,
//    "peripherals": [{"name": "nic", "exclusive": true}]}
Result<EnclaveConfig> parse_config_json(std::string_view text);

struct RunResult {
  std::string trace_tsv;
  std::string stats_json;
  Digest digest{};
  Cycles cycles = 0;
};

// Drives one simulation through a scenario's events.
class ScenarioRunner {
 public:
  static Result<std::unique_ptr<ScenarioRunner>> Create(const Scenario& scenario);

  Status run_events();
  Status run_event(const Event& e);

  Simulation& sim() { return *sim_; }
  const Scenario& scenario() const { return scenario_; }
  Result<Address> resolve(const AddressExpr& expr) const;
  Result<EnclaveId> actor_eid(std::string_view actor) const;
  Result<Label> label_for(std::string_view name) const;
  RunResult result() const;

 private:
  explicit ScenarioRunner(Scenario scenario) : scenario_(std::move(scenario)) {}
  Status execute(const Event& e, std::string& outcome);

  Scenario scenario_;
  std::unique_ptr<Simulation> sim_;
  std::optional<Bytes> sm_blob_;  // last sealed SM state
};

// run(): a pure function of (scenario, seed). The seed, when given,
// overrides the scenario's.
Result<RunResult> run_scenario(Scenario scenario, std::optional<std::uint64_t> seed = {});

}  // namespace cure

#endif  // CURE_SCENARIO_HPP_
