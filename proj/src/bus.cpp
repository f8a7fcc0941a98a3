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

#include "cure/bus.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>

namespace cure {

Result<MemRegion> MemRegion::Make(Address base, std::uint64_t size) {
  if (size == 0 || size > (std::uint64_t{1} << 32)) {
    return MakeError(ErrorCode::kMalformed, "region size out of range");
  }
  if (!std::has_single_bit(size)) {
    return MakeError(ErrorCode::kMalformed, "region size must be a power of two");
  }
  if ((base & (size - 1)) != 0) {
    return MakeError(ErrorCode::kMalformed, "region base not aligned to its size");
  }
  MemRegion r;
  r.base = base;
  r.mask = static_cast<std::uint32_t>(~(size - 1));
  return r;
}

bool MemRegion::well_formed() const {
  std::uint32_t inv = ~mask;
  return (inv & (inv + 1)) == 0 && (base & inv) == 0;
}

std::uint64_t round_up_pow2(std::uint64_t n) {
  return n <= 1 ? 1 : std::bit_ceil(n);
}

std::string to_string(const Origin& origin) {
  return (origin.kind == Origin::Kind::kCore ? "core" : "dma") +
         std::to_string(origin.index);
}

EnclaveId MemoryArbiterConfig::owner_of(Address a) const {
  for (const SharedWindow& w : shared_windows) {
    if (w.window.contains(a)) return w.owner;
  }
  for (std::uint8_t e = 1; e < EnclaveId::kCount; ++e) {
    if (regions[e] && regions[e]->contains(a)) return EnclaveId(e);
  }
  if (zero_region.contains(a)) return EnclaveId::Sm();
  return EnclaveId::Os();
}

Status MemoryArbiterConfig::check_region(EnclaveId eid, const MemRegion& region) const {
  if (!region.well_formed()) {
    return MakeError(ErrorCode::kMalformed, "region is not a base/mask window");
  }
  if (region.overlaps(zero_region)) {
    return MakeError(ErrorCode::kResourceUnavailable, "region overlaps the zero sink");
  }
  for (std::uint8_t e = 1; e < EnclaveId::kCount; ++e) {
    if (e == eid.value() || !regions[e]) continue;
    if (regions[e]->overlaps(region)) {
      return MakeError(ErrorCode::kResourceUnavailable,
                       "region overlaps the region of " + to_string(EnclaveId(e)));
    }
  }
  return {};
}

namespace {

Address sink_address(const MemRegion& zero_region, Address a) {
  return zero_region.base | (a & ~zero_region.mask);
}

AccessDecision redirect(const BusTransaction& txn, const MemRegion& zero_region) {
  return AccessDecision{
      Verdict::kRedirected, sink_address(zero_region, txn.address),
      ViolationRecord{txn.eid, txn.origin, txn.address, txn.op}};
}

AccessDecision allow(const BusTransaction& txn) {
  return AccessDecision{Verdict::kAllowed, txn.address, std::nullopt};
}

}  // namespace

AccessDecision check_memory_access(const BusTransaction& txn,
                                   const MemoryArbiterConfig& cfg) {
  if (!cfg.enforcing || txn.eid.is_sm()) return allow(txn);
  const EnclaveId owner = cfg.owner_of(txn.address);
  bool ok = false;
  if (txn.eid.is_firmware()) {
    ok = owner.is_firmware() || owner.is_os();
  } else {
    ok = owner == txn.eid;
  }
  return ok ? allow(txn) : redirect(txn, cfg.zero_region);
}

AccessDecision check_peripheral_access(const BusTransaction& txn,
                                       const PeripheralDescriptor& p,
                                       const MemRegion& zero_region) {
  if (txn.eid.is_sm()) return allow(txn);
  if ((p.perm_bitmap & PeripheralDescriptor::perm_bit(txn.eid, txn.op)) != 0) {
    return allow(txn);
  }
  return redirect(txn, zero_region);
}

AccessDecision check_dma_access(const PeripheralDescriptor& device,
                                const BusTransaction& txn,
                                const MemRegion& zero_region) {
  if (!device.dma_allowed || !device.dma_allowed->contains(txn.address)) {
    return redirect(txn, zero_region);
  }
  return allow(txn);
}

Bus::Bus(BusConfig config, PhysicalMemory& memory, PartitionedCache& cache,
         Trace& trace, const CostModel& costs)
    : config_(config), memory_(memory), cache_(cache), trace_(trace), costs_(costs) {
  arbiter_.zero_region = config_.zero_region;
}

std::optional<int> Bus::mmio_target(Address a) const {
  for (std::size_t i = 0; i < peripherals_.size(); ++i) {
    if (peripherals_[i].mmio.contains(a)) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::optional<int> Bus::find_peripheral(std::string_view name) const {
  for (std::size_t i = 0; i < peripherals_.size(); ++i) {
    if (peripherals_[i].name == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

void Bus::enqueue(const AccessDecision& d) {
  if (!d.violation) return;
  violations_.push_back(*d.violation);
  ++total_violations_;
  ++per_eid_violations_[d.violation->offender.value()];
}

Result<BusResponse> Bus::route(const BusTransaction& txn, int core) {
  const std::uint32_t size = txn.size_bytes;
  if (size == 0 || size > 64 || !std::has_single_bit(size) ||
      size > cache_.geometry().line_bytes || (txn.address & (size - 1)) != 0) {
    return MakeError(ErrorCode::kMalformed, "transaction size/alignment");
  }
  if (txn.op == BusOp::kWrite && txn.data.size() != size) {
    return MakeError(ErrorCode::kMalformed, "write data length differs from size");
  }

  BusResponse resp;
  const bool is_write = txn.op == BusOp::kWrite;
  const bool from_dma = txn.origin.kind == Origin::Kind::kDma;
  std::optional<int> mmio = from_dma ? std::nullopt : mmio_target(txn.address);
  const bool in_memory = config_.main_memory.contains(txn.address);
  if (!mmio && !in_memory && !from_dma) {
    return MakeError(ErrorCode::kUnmappedAddress, "no child decodes this address");
  }

  if (from_dma) {
    if (txn.origin.index < 0 ||
        static_cast<std::size_t>(txn.origin.index) >= peripherals_.size() ||
        !peripherals_[txn.origin.index].dma_capable) {
      return MakeError(ErrorCode::kMalformed, "origin is not a DMA-capable device");
    }
    if (!dma_filter_enabled_) {
      resp.decision = in_memory ? allow(txn) : redirect(txn, arbiter_.zero_region);
    } else {
      resp.decision = check_dma_access(peripherals_[txn.origin.index], txn,
                                       arbiter_.zero_region);
      if (resp.decision.allowed() && !in_memory) {
        resp.decision = redirect(txn, arbiter_.zero_region);
      }
    }
  } else if (mmio) {
    resp.mmio = true;
    resp.decision = check_peripheral_access(txn, peripherals_[*mmio], arbiter_.zero_region);
  } else {
    resp.decision = check_memory_access(txn, arbiter_);
  }
  enqueue(resp.decision);

  // Arbitration runs in parallel with routing: one bus step either way.
  resp.cost = costs_.bus_txn_cycles;
  if (!resp.decision.allowed()) {
    // Sink semantics: reads see zeros, writes vanish.
    if (!is_write) resp.data.assign(size, 0);
  } else if (resp.mmio) {
    PeripheralDescriptor& p = peripherals_[*mmio];
    std::size_t offset = txn.address - p.mmio.base;
    if (p.internal_memory.size() < offset + size) p.internal_memory.resize(offset + size, 0);
    if (is_write) {
      std::copy(txn.data.begin(), txn.data.end(),
                p.internal_memory.begin() + static_cast<std::ptrdiff_t>(offset));
    } else {
      resp.data.assign(p.internal_memory.begin() + static_cast<std::ptrdiff_t>(offset),
                       p.internal_memory.begin() + static_cast<std::ptrdiff_t>(offset + size));
    }
  } else {
    Bytes buffer = is_write ? txn.data : Bytes(size, 0);
    CacheAccessResult c = cache_.access(txn.eid, txn.address, is_write, buffer);
    if (c.hit) {
      resp.cost += costs_.l2_hit_cycles;
    } else {
      resp.cost += costs_.l2_miss_cycles + costs_.dram_cycles;
    }
    resp.cost += c.writebacks * costs_.dram_cycles;
    if (!is_write) resp.data = std::move(buffer);
    resp.cache = c;
  }

  if (trace_.recording()) {
    char note[96];
    const char* where = resp.mmio ? "mmio" : "mem";
    const char* cache_note = "";
    if (resp.cache) cache_note = resp.cache->hit ? " hit" : (resp.cache->bypassed ? " bypass" : " miss");
    std::snprintf(note, sizeof note, "%s %s 0x%08x/%u %s%s", is_write ? "w" : "r", where,
                  static_cast<unsigned>(txn.address), static_cast<unsigned>(size),
                  to_string(txn.origin).c_str(), cache_note);
    trace_.append(core, txn.eid, "bus",
                  resp.decision.allowed() ? "allowed" : "redirected", resp.cost, note);
  } else {
    trace_.append(core, txn.eid, "bus", "", resp.cost);
  }
  return resp;
}

Status Bus::program_region(EnclaveId caller, EnclaveId eid, std::optional<MemRegion> region) {
  if (!caller.is_sm()) return MakeError(ErrorCode::kNotSm, "arbiter control window");
  if (eid.is_os()) {
    return MakeError(ErrorCode::kMalformed, "the OS has no region register");
  }
  if (region) {
    Status s = arbiter_.check_region(eid, *region);
    if (!s) return s;
  }
  arbiter_.regions[eid.value()] = region;
  return {};
}

Status Bus::assign_shared_window(EnclaveId caller, const MemRegion& window, EnclaveId owner) {
  if (!caller.is_sm()) return MakeError(ErrorCode::kNotSm, "arbiter control window");
  if (!window.well_formed()) return MakeError(ErrorCode::kMalformed, "shared window");
  for (SharedWindow& w : arbiter_.shared_windows) {
    if (w.window == window) {
      w.owner = owner;
      return {};
    }
    if (w.window.overlaps(window)) {
      return MakeError(ErrorCode::kResourceUnavailable, "overlapping shared window");
    }
  }
  arbiter_.shared_windows.push_back(SharedWindow{window, owner});
  return {};
}

Status Bus::remove_shared_window(EnclaveId caller, const MemRegion& window) {
  if (!caller.is_sm()) return MakeError(ErrorCode::kNotSm, "arbiter control window");
  std::erase_if(arbiter_.shared_windows,
                [&](const SharedWindow& w) { return w.window == window; });
  return {};
}

Result<int> Bus::add_peripheral(EnclaveId caller, PeripheralDescriptor p) {
  if (!caller.is_sm()) return MakeError(ErrorCode::kNotSm, "peripheral registration");
  if (!p.mmio.well_formed()) return MakeError(ErrorCode::kMalformed, "mmio window");
  if (p.mmio.overlaps(config_.main_memory)) {
    return MakeError(ErrorCode::kMalformed, "mmio window overlaps main memory");
  }
  for (const PeripheralDescriptor& q : peripherals_) {
    if (q.name == p.name) return MakeError(ErrorCode::kMalformed, "duplicate peripheral");
    if (q.mmio.overlaps(p.mmio)) return MakeError(ErrorCode::kMalformed, "mmio overlap");
  }
  p.internal_memory.assign(static_cast<std::size_t>(std::min<std::uint64_t>(p.mmio.size(), 1u << 16)), 0);
  peripherals_.push_back(std::move(p));
  return static_cast<int>(peripherals_.size() - 1);
}

Status Bus::set_peripheral_permissions(EnclaveId caller, int index, std::uint32_t bitmap) {
  if (!caller.is_sm()) return MakeError(ErrorCode::kNotSm, "peripheral arbiter");
  peripherals_.at(index).perm_bitmap = bitmap;
  return {};
}

Status Bus::bind_dma(EnclaveId caller, int index, std::optional<MemRegion> allowed) {
  if (!caller.is_sm()) return MakeError(ErrorCode::kNotSm, "DMA port register");
  PeripheralDescriptor& p = peripherals_.at(index);
  if (!p.dma_capable) return MakeError(ErrorCode::kMalformed, "device is not DMA-capable");
  p.dma_allowed = allowed;
  return {};
}

Status Bus::sanitize_peripheral(EnclaveId caller, int index) {
  if (!caller.is_sm()) return MakeError(ErrorCode::kNotSm, "sanitize_peripheral");
  PeripheralDescriptor& p = peripherals_.at(index);
  std::fill(p.internal_memory.begin(), p.internal_memory.end(), 0);
  p.dma_allowed.reset();
  return {};
}

Status Bus::set_arbiter_enforcing(EnclaveId caller, bool on) {
  if (!caller.is_sm()) return MakeError(ErrorCode::kNotSm, "arbiter control window");
  arbiter_.enforcing = on;
  return {};
}

Status Bus::set_dma_filter_enabled(EnclaveId caller, bool on) {
  if (!caller.is_sm()) return MakeError(ErrorCode::kNotSm, "DMA port register");
  dma_filter_enabled_ = on;
  return {};
}

}  // namespace cure
