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

#ifndef CURE_BUS_HPP_
#define CURE_BUS_HPP_

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "cure/cache.hpp"
#include "cure/cost_model.hpp"
#include "cure/memory.hpp"
#include "cure/trace.hpp"
#include "cure/types.hpp"

namespace cure {

// Address window in the arbiter's register encoding: a ∈ region iff
// (a & mask) == base. Only power-of-two sized, naturally aligned windows are
// representable.
struct MemRegion {
  Address base = 0;
  std::uint32_t mask = 0xFFFFFFFF;

  // size must be a power of two (or 2^32 when given as 0) and base aligned.
  static Result<MemRegion> Make(Address base, std::uint64_t size);

  bool contains(Address a) const { return (a & mask) == base; }
  std::uint64_t size() const { return std::uint64_t{~mask} + 1; }
  std::uint64_t end() const { return std::uint64_t{base} + size(); }
  bool overlaps(const MemRegion& other) const {
    return base < other.end() && other.base < end();
  }
  bool contains(const MemRegion& inner) const {
    return inner.base >= base && inner.end() <= end();
  }
  // Mask is a run of high ones and base has no bits outside it.
  bool well_formed() const;

  bool operator==(const MemRegion&) const = default;
};

std::uint64_t round_up_pow2(std::uint64_t n);

enum class Channel : std::uint8_t { kA, kC };
enum class BusOp : std::uint8_t { kRead, kWrite };

struct Origin {
  enum class Kind : std::uint8_t { kCore, kDma };
  Kind kind = Kind::kCore;
  int index = 0;

  static Origin Core(int i) { return Origin{Kind::kCore, i}; }
  static Origin Dma(int i) { return Origin{Kind::kDma, i}; }
  bool operator==(const Origin&) const = default;
};

std::string to_string(const Origin& origin);

// Parent-to-child request. Responses carry no eid and are not modeled as
// transactions.
struct BusTransaction {
  Channel channel = Channel::kA;
  EnclaveId eid;
  BusOp op = BusOp::kRead;
  Address address = 0;
  std::uint32_t size_bytes = 8;
  Bytes data;  // writes only; size_bytes long
  Origin origin;
};

struct ViolationRecord {
  EnclaveId offender;
  Origin origin;
  Address address = 0;
  BusOp op = BusOp::kRead;
  bool operator==(const ViolationRecord&) const = default;
};

enum class Verdict : std::uint8_t { kAllowed, kRedirected };

struct AccessDecision {
  Verdict verdict = Verdict::kAllowed;
  Address effective_address = 0;
  std::optional<ViolationRecord> violation;

  bool allowed() const { return verdict == Verdict::kAllowed; }
};

// A sub-window of an enclave region whose ownership the SM hands between the
// enclave and another context. Takes precedence over the region registers.
struct SharedWindow {
  MemRegion window;
  EnclaveId owner;
};

struct MemoryArbiterConfig {
  // Region register per eid. Only the 13 pool ids, the SM and the firmware
  // are programmable; the OS owns everything not claimed here.
  std::array<std::optional<MemRegion>, EnclaveId::kCount> regions;
  MemRegion zero_region;
  std::vector<SharedWindow> shared_windows;
  // False models an arbiter whose control logic was never enabled.
  bool enforcing = true;

  // Context that owns address a: a shared-window owner, a region owner, the
  // SM for the zero sink, or else the OS.
  EnclaveId owner_of(Address a) const;
  // Disjointness against every other configured region and the sink.
  Status check_region(EnclaveId eid, const MemRegion& region) const;
};

struct PeripheralDescriptor {
  std::string name;
  MemRegion mmio;
  std::uint32_t perm_bitmap = 0;  // bit 2e = read, bit 2e+1 = write
  bool dma_capable = false;
  std::optional<MemRegion> dma_allowed;
  std::optional<EnclaveId> exclusive_owner;
  Bytes internal_memory;

  static std::uint32_t perm_bit(EnclaveId eid, BusOp op) {
    return 1u << (2 * eid.value() + (op == BusOp::kWrite ? 1 : 0));
  }
  static std::uint32_t rw_bits(EnclaveId eid) {
    return perm_bit(eid, BusOp::kRead) | perm_bit(eid, BusOp::kWrite);
  }
};

// The three arbiter predicates. Pure: they inspect the configuration and
// produce a decision, nothing else.
AccessDecision check_memory_access(const BusTransaction& txn,
                                   const MemoryArbiterConfig& cfg);
AccessDecision check_peripheral_access(const BusTransaction& txn,
                                       const PeripheralDescriptor& p,
                                       const MemRegion& zero_region);
// A device with no allowed region (unbound) is deny-all.
AccessDecision check_dma_access(const PeripheralDescriptor& device,
                                const BusTransaction& txn,
                                const MemRegion& zero_region);

struct BusConfig {
  MemRegion main_memory;
  MemRegion zero_region;
};

struct BusResponse {
  AccessDecision decision;
  Bytes data;  // read data (zeros when redirected); empty for writes
  bool mmio = false;
  std::optional<CacheAccessResult> cache;
  Cycles cost = 0;
};

// System bus: arbitration, child dispatch, and the SM-only control window.
class Bus {
 public:
  Bus(BusConfig config, PhysicalMemory& memory, PartitionedCache& cache,
      Trace& trace, const CostModel& costs);

  Result<BusResponse> route(const BusTransaction& txn, int core = -1);

  // --- control window (caller must be the SM) ---
  Status program_region(EnclaveId caller, EnclaveId eid, std::optional<MemRegion> region);
  Status assign_shared_window(EnclaveId caller, const MemRegion& window, EnclaveId owner);
  Status remove_shared_window(EnclaveId caller, const MemRegion& window);
  Result<int> add_peripheral(EnclaveId caller, PeripheralDescriptor p);
  Status set_peripheral_permissions(EnclaveId caller, int index, std::uint32_t bitmap);
  Status bind_dma(EnclaveId caller, int index, std::optional<MemRegion> allowed);
  Status sanitize_peripheral(EnclaveId caller, int index);
  Status set_arbiter_enforcing(EnclaveId caller, bool on);
  Status set_dma_filter_enabled(EnclaveId caller, bool on);

  const MemoryArbiterConfig& arbiter() const { return arbiter_; }
  const BusConfig& config() const { return config_; }
  const std::vector<PeripheralDescriptor>& peripherals() const { return peripherals_; }
  PeripheralDescriptor& peripheral_mut(int index) { return peripherals_[index]; }
  std::optional<int> find_peripheral(std::string_view name) const;

  // Violation interrupts queued for the SM, oldest first.
  std::deque<ViolationRecord>& violations() { return violations_; }
  std::uint64_t total_violations() const { return total_violations_; }
  std::uint64_t violations_by(EnclaveId eid) const { return per_eid_violations_[eid.value()]; }

  bool dma_filter_enabled() const { return dma_filter_enabled_; }
  const CostModel& costs() const { return costs_; }

 private:
  std::optional<int> mmio_target(Address a) const;
  void enqueue(const AccessDecision& d);

  BusConfig config_;
  PhysicalMemory& memory_;
  PartitionedCache& cache_;
  Trace& trace_;
  const CostModel& costs_;
  MemoryArbiterConfig arbiter_;
  std::vector<PeripheralDescriptor> peripherals_;
  std::deque<ViolationRecord> violations_;
  std::uint64_t total_violations_ = 0;
  std::array<std::uint64_t, EnclaveId::kCount> per_eid_violations_{};
  bool dma_filter_enabled_ = true;
};

}  // namespace cure

#endif  // CURE_BUS_HPP_
