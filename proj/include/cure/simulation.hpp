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

#ifndef CURE_SIMULATION_HPP_
#define CURE_SIMULATION_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cure/bus.hpp"
#include "cure/cache.hpp"
#include "cure/cost_model.hpp"
#include "cure/crypto.hpp"
#include "cure/machine.hpp"
#include "cure/memory.hpp"
#include "cure/monitor.hpp"
#include "cure/package.hpp"
#include "cure/trace.hpp"

namespace cure {

// Physical memory map of the simulated machine.
inline constexpr Address kMainMemoryBase = 0x8000'0000;
inline constexpr std::uint64_t kMainMemoryBytes = 0x1000'0000;
inline constexpr Address kFirmwareBase = 0x8000'0000;
inline constexpr std::uint64_t kFirmwareBytes = 0x4'0000;
inline constexpr Address kSmBase = 0x8004'0000;
inline constexpr std::uint64_t kSmBytes = 0x4'0000;
inline constexpr Address kZeroSinkBase = 0x8008'0000;
inline constexpr std::uint64_t kZeroSinkBytes = 0x1'0000;
inline constexpr Address kOsBase = 0x8010'0000;
inline constexpr Address kEnclavePoolBase = 0x8200'0000;
inline constexpr Address kMmioBase = 0x1000'0000;
inline constexpr std::uint32_t kMmioStride = 0x1000;

struct PeripheralSpec {
  std::string name;
  bool dma_capable = false;
  // Initial arbiter bitmap; the OS read/write bits by default.
  std::uint32_t perm_bitmap = PeripheralDescriptor::rw_bits(EnclaveId::Os());
  std::optional<MemRegion> dma_allowed;
};

// Switches for the negative controls. Every defense is on by default.
struct DefenseSwitches {
  bool arbiter = true;
  bool dma_filter = true;
  bool page_table_verification = true;
  bool nvm_counter = true;
};

struct MachineSpec {
  std::uint64_t seed = 1;
  std::uint64_t ecosystem_seed = 1;
  bool fake_crypto = false;
  CacheGeometry geometry;
  std::uint32_t max_ways_per_enclave = PartitionedCache::kDefaultMaxWaysPerEnclave;
  CostModel costs;
  int cores = 4;
  std::vector<PeripheralSpec> peripherals;
  DefenseSwitches defenses;
  ViolationPolicy policy = ViolationPolicy::kLogOnly;
  std::optional<std::filesystem::path> nvm_path;
  bool record_trace = true;
};

struct CheckpointStats {
  std::string name;
  Cycles cycles = 0;
  std::uint64_t steps = 0;
  std::array<CacheStats, EnclaveId::kCount> cache{};
};

// One self-contained simulated machine: memory, L2, bus, cores, the SM and
// the untrusted OS-side helpers (region allocation, image loading, context
// scheduling). Not copyable or movable; the components hold references to
// each other.
class Simulation {
 public:
  static Result<std::unique_ptr<Simulation>> Create(const MachineSpec& spec);

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  const MachineSpec& spec() const { return spec_; }
  const CryptoSuite& crypto() const { return crypto_; }
  const Ecosystem& ecosystem() const { return ecosystem_; }
  PhysicalMemory& memory() { return memory_; }
  const PhysicalMemory& memory() const { return memory_; }
  Trace& trace() { return trace_; }
  const Trace& trace() const { return trace_; }
  PartitionedCache& cache() { return *cache_; }
  const PartitionedCache& cache() const { return *cache_; }
  Bus& bus() { return *bus_; }
  const Bus& bus() const { return *bus_; }
  Machine& machine() { return *machine_; }
  SecurityMonitor& sm() { return *sm_; }
  const SecurityMonitor& sm() const { return *sm_; }
  NvmCounter& nvm() { return *nvm_; }

  // Package signed with the ecosystem's provider key.
  Bytes make_package(const EnclaveConfig& config, ByteSpan binary) const;

  Result<Label> install(int core, ByteSpan package);
  Status update(int core, ByteSpan package);
  // OS side of setup: picks a region, loads the image there, then calls the
  // SM. `config` defaults to the installed package's config.
  Result<EnclaveId> setup(int core, const Label& label,
                          std::optional<PageTable> page_table = std::nullopt,
                          std::optional<EnclaveConfig> config = std::nullopt);
  Status teardown(int core, const Label& label);
  // Layout the next setup of `label` would get, for building page tables
  // ahead of the call.
  Result<EnclaveLayout> plan_layout(const Label& label,
                                    std::optional<EnclaveConfig> config = std::nullopt);

  // Brings `core` into context `eid` through the SM when it runs another one.
  Status ensure_context(int core, EnclaveId eid);
  // A data access by `actor` on `core`. Virtual addresses are translated by
  // the page-table walker first.
  Result<BusResponse> access(int core, EnclaveId actor, BusOp op, Address address,
                             std::uint32_t size, ByteSpan data = {}, bool is_virtual = false);
  // Transaction from a DMA-capable peripheral.
  Result<BusResponse> dma(std::string_view device, BusOp op, Address address,
                          std::uint32_t size, ByteSpan data = {});
  // SM-privileged read, used for scans after teardown.
  Bytes sm_read(Address address, std::uint32_t size);

  std::optional<EnclaveId> eid_of(const Label& label) const;
  const EnclaveLayout* layout_of(const Label& label) const;
  const std::map<Label, Bytes>& packages() const { return packages_; }
  std::optional<EnclaveConfig> installed_config(const Label& label) const;

  void checkpoint(std::string name);
  const std::vector<CheckpointStats>& checkpoints() const { return checkpoints_; }

  // Replaces the SM by a freshly booted one over the same hardware and NVM.
  Status reboot();

  // SHA-256 over the trace text and every nonzero memory page.
  Digest digest() const;
  std::string stats_json() const;

 private:
  explicit Simulation(const MachineSpec& spec);
  Status init();
  Result<Address> allocate_region(std::uint64_t size);

  MachineSpec spec_;
  const CryptoSuite& crypto_;
  Ecosystem ecosystem_;
  PhysicalMemory memory_;
  Trace trace_;
  std::unique_ptr<PartitionedCache> cache_;
  std::unique_ptr<Bus> bus_;
  std::unique_ptr<Machine> machine_;
  std::unique_ptr<NvmCounter> nvm_;
  std::unique_ptr<SecurityMonitor> sm_;
  std::map<Label, Bytes> packages_;
  std::map<Label, MemRegion> allocations_;
  std::vector<CheckpointStats> checkpoints_;
};

SmIdentity identity_from(const Ecosystem& ecosystem);

}  // namespace cure

#endif  // CURE_SIMULATION_HPP_
