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

#include "cure/machine.hpp"

#include <algorithm>
#include <cstdio>

namespace cure {

const char* to_string(TrapClass c) {
  switch (c) {
    case TrapClass::kExternalInterrupt: return "external";
    case TrapClass::kTimer: return "timer";
    case TrapClass::kSyscall: return "syscall";
    case TrapClass::kPageFault: return "page-fault";
    case TrapClass::kSoftware: return "software";
  }
  return "?";
}

std::optional<TrapClass> trap_class_from_string(std::string_view s) {
  for (TrapClass c : {TrapClass::kExternalInterrupt, TrapClass::kTimer, TrapClass::kSyscall,
                      TrapClass::kPageFault, TrapClass::kSoftware}) {
    if (s == to_string(c)) return c;
  }
  return std::nullopt;
}

bool PageTableImage::maps(std::uint32_t virtual_page) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const PageTableEntry& e) {
    return e.virtual_page == virtual_page;
  });
}

Result<std::vector<PteWrite>> PageTableImage::add(const PageTableEntry& e) {
  if (maps(e.virtual_page)) {
    return MakeError(ErrorCode::kBadPageTables, "virtual page already mapped");
  }
  if (e.physical_page >= (1u << 20)) {
    return MakeError(ErrorCode::kBadPageTables, "physical page beyond 32-bit space");
  }
  std::vector<PteWrite> writes;
  const std::uint32_t vpn1 = (e.virtual_page >> 10) & 0x3FF;
  const std::uint32_t vpn0 = e.virtual_page & 0x3FF;
  auto it = second_level_.find(vpn1);
  if (it == second_level_.end()) {
    if (next_spare_ >= spare_.size()) {
      return MakeError(ErrorCode::kBadPageTables, "page-table area exhausted");
    }
    Address table = spare_[next_spare_++];
    it = second_level_.emplace(vpn1, table).first;
    writes.push_back(PteWrite{root_ + vpn1 * 4, encode_table_pte(table)});
  }
  writes.push_back(PteWrite{it->second + vpn0 * 4, encode_leaf_pte(e.physical_page, e.perms)});
  entries_.push_back(e);
  return writes;
}

Machine::Machine(int num_cores, Bus& bus, Trace& trace, const CostModel& costs)
    : bus_(bus), trace_(trace), costs_(costs) {
  cores_.resize(static_cast<std::size_t>(num_cores));
  for (int i = 0; i < num_cores; ++i) cores_[i].index = i;
}

void Machine::set_eid_hw(Core& c, EnclaveId eid, const char* how) {
  if (c.eid_reg != eid) {
    std::string note = to_string(c.eid_reg) + "->" + to_string(eid);
    trace_.append(c.index, eid, "eid", how, 0, std::move(note));
  }
  c.eid_reg = eid;
  c.hyperthreading_enabled = !eid.is_pool();
}

Status Machine::write_gated_register(int core_index, GatedRegister which,
                                     std::uint32_t value) {
  Core& c = core(core_index);
  char note[48];
  std::snprintf(note, sizeof note, "%s<-0x%x", which == GatedRegister::kEid ? "eid" : "mtvec",
                static_cast<unsigned>(value));
  if (!c.eid_reg.is_sm()) {
    ++gate_violations_;
    trace_.append(core_index, c.eid_reg, "gate_write", "rejected", 0, note);
    return MakeError(ErrorCode::kGateViolation,
                     "gated register written from " + to_string(c.eid_reg));
  }
  trace_.append(core_index, c.eid_reg, "gate_write", "accepted", 0, note);
  if (which == GatedRegister::kMtvec) {
    c.mtvec_reg = value;
  } else {
    set_eid_hw(c, EnclaveId(static_cast<std::uint8_t>(value)), "gate");
  }
  return {};
}

TrapOutcome Machine::trap_to_machine(int core_index, TrapClass cause) {
  Core& c = core(core_index);
  if (c.eid_reg.is_sm() || !c.interrupts_enabled) {
    c.pending.push_back(cause);
    trace_.append(core_index, c.eid_reg, "trap", "deferred", 0, to_string(cause));
    return TrapOutcome::kDeferred;
  }
  if (!c.delegation.routes_to_sm(cause)) {
    trace_.append(core_index, c.eid_reg, "trap", "local", 0, to_string(cause));
    return TrapOutcome::kHandledLocally;
  }
  trace_.append(core_index, c.eid_reg, "trap", "sm", 0, to_string(cause));
  ecall_to_sm(core_index);
  return TrapOutcome::kEnteredSm;
}

void Machine::ecall_to_sm(int core_index) {
  Core& c = core(core_index);
  // The L1 is flushed while the core still carries the old eid, so dirty
  // lines cannot be written back under SM identity.
  c.local.l1.clear();
  trace_.append(core_index, c.eid_reg, "flush", "l1", costs_.l1_flush_cycles);
  c.saved_eid = c.eid_reg;
  set_eid_hw(c, EnclaveId::Sm(), "trap");
  c.interrupts_enabled = false;
}

void Machine::flush_tlb_btb(int core_index) {
  Core& c = core(core_index);
  c.local.tlb.clear();
  c.local.btb.clear();
  trace_.append(core_index, c.eid_reg, "flush", "tlb+btb", costs_.tlb_flush_cycles);
}

void Machine::flush_core_local(int core_index) {
  Core& c = core(core_index);
  c.local = CoreLocalState{};
  trace_.append(core_index, c.eid_reg, "flush", "l1+tlb+btb",
                costs_.l1_flush_cycles + costs_.tlb_flush_cycles);
}

std::vector<TrapClass> Machine::leave_sm(int core_index) {
  Core& c = core(core_index);
  c.interrupts_enabled = true;
  c.hyperthreading_enabled = !c.eid_reg.is_pool();
  std::vector<TrapClass> pending;
  pending.swap(c.pending);
  return pending;
}

Result<Translation> Machine::ptw_translate(int core_index, Address vaddr) {
  Core& c = core(core_index);
  if (!c.satp) return MakeError(ErrorCode::kTranslationFault, "no active page table");
  Translation t;
  auto walk_read = [&](Address pte_addr) -> Result<std::uint32_t> {
    BusTransaction txn;
    txn.eid = c.eid_reg;
    txn.op = BusOp::kRead;
    txn.address = pte_addr;
    txn.size_bytes = 4;
    txn.origin = Origin::Core(core_index);
    Result<BusResponse> r = bus_.route(txn, core_index);
    ++t.walk_reads;
    if (!r.ok()) return MakeError(ErrorCode::kTranslationFault, r.error().message);
    if (!r->decision.allowed()) {
      return MakeError(ErrorCode::kTranslationFault, "page-table walk blocked by the bus");
    }
    const Bytes& d = r->data;
    return std::uint32_t{d[0]} | std::uint32_t{d[1]} << 8 | std::uint32_t{d[2]} << 16 |
           std::uint32_t{d[3]} << 24;
  };
  const std::uint32_t vpn1 = vaddr >> 22;
  const std::uint32_t vpn0 = (vaddr >> 12) & 0x3FF;
  Result<std::uint32_t> top = walk_read(*c.satp + vpn1 * 4);
  if (!top.ok()) return top.error();
  if ((*top & kPteValid) == 0 || (*top & 0xE) != 0) {
    return MakeError(ErrorCode::kTranslationFault, "invalid first-level entry");
  }
  Result<std::uint32_t> leaf = walk_read((*top & ~(kPageBytes - 1)) + vpn0 * 4);
  if (!leaf.ok()) return leaf.error();
  if ((*leaf & kPteValid) == 0 || (*leaf & 0xE) == 0) {
    return MakeError(ErrorCode::kTranslationFault, "invalid leaf entry");
  }
  t.physical = (*leaf & ~(kPageBytes - 1)) | (vaddr & (kPageBytes - 1));
  c.local.tlb.emplace(vaddr >> 12, c.eid_reg.value());
  return t;
}

Result<BusResponse> Machine::core_access(int core_index, BusOp op, Address physical,
                                         std::uint32_t size, ByteSpan data,
                                         std::optional<std::uint32_t> virtual_page) {
  Core& c = core(core_index);
  BusTransaction txn;
  txn.eid = c.eid_reg;
  txn.op = op;
  txn.address = physical;
  txn.size_bytes = size;
  txn.data.assign(data.begin(), data.end());
  txn.origin = Origin::Core(core_index);
  Result<BusResponse> r = bus_.route(txn, core_index);
  if (r.ok()) {
    c.local.l1.emplace(physical & ~63u, c.eid_reg.value());
    c.local.btb.emplace(physical >> 12, c.eid_reg.value());
    if (virtual_page) c.local.tlb.emplace(*virtual_page, c.eid_reg.value());
  }
  return r;
}

}  // namespace cure
