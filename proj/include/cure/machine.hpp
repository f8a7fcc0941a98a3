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

#ifndef CURE_MACHINE_HPP_
#define CURE_MACHINE_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "cure/bus.hpp"
#include "cure/cost_model.hpp"
#include "cure/trace.hpp"
#include "cure/types.hpp"

namespace cure {

enum class TrapClass : std::uint8_t {
  kExternalInterrupt,
  kTimer,
  kSyscall,
  kPageFault,
  kSoftware,
};

const char* to_string(TrapClass c);
std::optional<TrapClass> trap_class_from_string(std::string_view s);
constexpr bool is_interrupt(TrapClass c) {
  return c == TrapClass::kExternalInterrupt || c == TrapClass::kTimer ||
         c == TrapClass::kSoftware;
}

// Stands in for medeleg/mideleg/sedeleg/sideleg: which trap classes are
// taken by the SM rather than delegated to a lower level.
struct TrapDelegation {
  std::uint8_t traps_to_sm = 0;  // bit per TrapClass

  bool routes_to_sm(TrapClass c) const {
    return (traps_to_sm >> static_cast<unsigned>(c)) & 1u;
  }
  static TrapDelegation Os() { return {}; }
  static TrapDelegation UserEnclave() { return {0x1F}; }
  static TrapDelegation KernelEnclave() {
    return {static_cast<std::uint8_t>(1u << static_cast<unsigned>(TrapClass::kExternalInterrupt))};
  }
  bool operator==(const TrapDelegation&) const = default;
};

// L1 / TLB / BTB as presence-only tagged sets.
struct CoreLocalState {
  std::set<std::pair<std::uint32_t, std::uint8_t>> l1;   // (line address, eid)
  std::set<std::pair<std::uint32_t, std::uint8_t>> tlb;  // (virtual page, eid)
  std::set<std::pair<std::uint32_t, std::uint8_t>> btb;

  std::size_t entries() const { return l1.size() + tlb.size() + btb.size(); }
};

struct PageTableEntry {
  std::uint32_t virtual_page = 0;   // vaddr >> 12
  std::uint32_t physical_page = 0;  // paddr >> 12
  std::uint8_t perms = 0x3;         // bit0 R, bit1 W, bit2 X

  bool operator==(const PageTableEntry&) const = default;
};

// Logical two-level table (4 KiB pages, 32-bit physical addresses). root is
// the satp analogue.
struct PageTable {
  Address root = 0;
  std::vector<PageTableEntry> entries;
};

inline constexpr std::uint32_t kPageBytes = 4096;
inline constexpr std::uint32_t kPteValid = 1u << 0;

// In-memory PTE: [31:12] physical page number, bit0 V, bits1-3 R/W/X.
// A valid PTE with no R/W/X bits points at the next-level table.
constexpr std::uint32_t encode_leaf_pte(std::uint32_t physical_page, std::uint8_t perms) {
  return physical_page << 12 | static_cast<std::uint32_t>(perms & 0x7) << 1 | kPteValid;
}
constexpr std::uint32_t encode_table_pte(Address table) {
  return (table & ~(kPageBytes - 1)) | kPteValid;
}

struct PteWrite {
  Address address = 0;
  std::uint32_t value = 0;
};

// Physical placement of a logical page table: the root page plus one
// second-level page per distinct upper VPN, drawn from a fixed pool.
class PageTableImage {
 public:
  PageTableImage() = default;
  PageTableImage(Address root, std::vector<Address> spare_table_pages)
      : root_(root), spare_(std::move(spare_table_pages)) {}

  // PTE stores needed to add one mapping. Fails when the virtual page is
  // already mapped or the table pool is exhausted.
  Result<std::vector<PteWrite>> add(const PageTableEntry& e);

  Address root() const { return root_; }
  const std::vector<PageTableEntry>& entries() const { return entries_; }
  const std::map<std::uint32_t, Address>& second_level() const { return second_level_; }
  bool maps(std::uint32_t virtual_page) const;

 private:
  Address root_ = 0;
  std::vector<Address> spare_;
  std::size_t next_spare_ = 0;
  std::map<std::uint32_t, Address> second_level_;
  std::vector<PageTableEntry> entries_;
};

struct Core {
  int index = 0;
  EnclaveId eid_reg;
  Address mtvec_reg = 0;
  TrapDelegation delegation;
  bool interrupts_enabled = true;
  bool hyperthreading_enabled = true;
  CoreLocalState local;
  std::optional<Address> satp;  // active page-table root
  bool detached = false;        // hot-unplugged from the OS for an enclave RT
  EnclaveId saved_eid;          // context interrupted by the last trap
  std::vector<TrapClass> pending;  // traps that arrived while in the SM
};

enum class GatedRegister : std::uint8_t { kEid, kMtvec };

enum class TrapOutcome : std::uint8_t {
  kEnteredSm,        // control now at mtvec with eid 0xF
  kHandledLocally,   // delegated to the OS or the enclave runtime
  kDeferred,         // SM executing on this core; interrupts disabled
};

struct Translation {
  Address physical = 0;
  int walk_reads = 0;
};

// Cores plus the hardware paths that act on them. All costs are charged to
// the shared trace clock.
class Machine {
 public:
  Machine(int num_cores, Bus& bus, Trace& trace, const CostModel& costs);

  // Hardware gate: eid and mtvec accept writes only from a core whose eid is
  // 0xF. A rejected write leaves the core unchanged.
  Status write_gated_register(int core, GatedRegister which, std::uint32_t value);

  // Trap entry. If the class routes to the SM: L1 flush, then eid := 0xF,
  // interrupts off, pc := mtvec.
  TrapOutcome trap_to_machine(int core, TrapClass cause);
  // Environment call into the SM; never delegated, same hardware steps.
  void ecall_to_sm(int core);

  // SM-issued flush of TLB and BTB (the L1 is flushed by the trap path).
  void flush_tlb_btb(int core);
  // Full composite flush: L1 + TLB + BTB.
  void flush_core_local(int core);
  // Leaves SM context on `core`: interrupts back on, hyperthreading follows
  // the new eid, returns any traps deferred while in the SM.
  std::vector<TrapClass> leave_sm(int core);

  Result<Translation> ptw_translate(int core, Address vaddr);

  // A core-issued data access: records L1/TLB presence and routes the
  // transaction with the core's current eid.
  Result<BusResponse> core_access(int core, BusOp op, Address physical,
                                  std::uint32_t size, ByteSpan data = {},
                                  std::optional<std::uint32_t> virtual_page = {});

  Core& core(int i) { return cores_.at(i); }
  const Core& core(int i) const { return cores_.at(i); }
  int num_cores() const { return static_cast<int>(cores_.size()); }
  std::uint64_t gate_violations() const { return gate_violations_; }
  Bus& bus() { return bus_; }
  Trace& trace() { return trace_; }
  const CostModel& costs() const { return costs_; }

 private:
  void set_eid_hw(Core& c, EnclaveId eid, const char* how);

  std::vector<Core> cores_;
  Bus& bus_;
  Trace& trace_;
  const CostModel& costs_;
  std::uint64_t gate_violations_ = 0;
};

}  // namespace cure

#endif  // CURE_MACHINE_HPP_
