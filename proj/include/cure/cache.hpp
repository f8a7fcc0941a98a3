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

#ifndef CURE_CACHE_HPP_
#define CURE_CACHE_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cure/memory.hpp"
#include "cure/random.hpp"
#include "cure/types.hpp"

namespace cure {

struct CacheGeometry {
  std::uint32_t num_sets = 64;
  std::uint32_t num_ways = 16;
  std::uint32_t line_bytes = 64;

  Status validate() const;

  std::uint32_t set_index(Address a) const { return (a / line_bytes) & (num_sets - 1); }
  std::uint32_t tag(Address a) const { return a / line_bytes / num_sets; }
  Address line_base(Address a) const { return a & ~(line_bytes - 1); }
  Address address_of(std::uint32_t tag, std::uint32_t set) const {
    return (tag * num_sets + set) * line_bytes;
  }
};

enum class CacheMode : std::uint8_t { kBasic, kStrict };

struct CacheLine {
  bool valid = false;
  bool dirty = false;
  std::uint32_t tag = 0;
  EnclaveId line_eid;
};

struct WayEntry {
  bool excl = false;
  EnclaveId owner;
};

struct ModeEntry {
  CacheMode mode = CacheMode::kBasic;
  std::vector<std::uint32_t> allocated_ways;  // ascending
};

struct Eviction {
  std::uint32_t set = 0;
  std::uint32_t way = 0;
  EnclaveId owner;
  Address address = 0;
  bool written_back = false;
};

struct CacheAccessResult {
  bool hit = false;
  bool bypassed = false;  // no way may hold the line; served from DRAM
  std::uint32_t set = 0;
  std::uint32_t way = 0;
  std::optional<Eviction> evicted;
  std::uint32_t writebacks = 0;  // includes coherence write-backs
};

struct CacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;  // lines owned by this eid that were evicted
  std::uint64_t writebacks = 0;
};

// Shared last-level cache with per-line owner eids, a per-way exclusivity
// directory, and per-enclave CP-BASIC / CP-STRICT modes.
//
// Replacement draws from one xorshift64* stream per requesting eid, seeded
// from the simulation seed. A requester's draws therefore never shift another
// requester's replacement choices.
class PartitionedCache {
 public:
  static constexpr std::uint32_t kDefaultMaxWaysPerEnclave = 8;

  PartitionedCache(CacheGeometry geometry, PhysicalMemory& memory,
                   std::uint64_t seed,
                   std::uint32_t max_ways_per_enclave = kDefaultMaxWaysPerEnclave);

  // Serves one access of data.size() bytes at address (which must not cross
  // a line). Reads fill data; writes consume it.
  CacheAccessResult access(EnclaveId eid, Address address, bool is_write,
                           std::span<std::uint8_t> data);

  Result<std::uint32_t> select_victim(EnclaveId eid, std::uint32_t set_index);

  // SM-only configuration surface. `caller` is the eid of the issuing context.
  Status allocate_ways(EnclaveId caller, EnclaveId eid, std::uint32_t count);
  Status release_ways(EnclaveId caller, EnclaveId eid);
  Status set_mode(EnclaveId caller, EnclaveId eid, CacheMode mode);
  Result<std::size_t> flush_enclave_lines(EnclaveId caller, EnclaveId eid);

  // Writes back (optional) and invalidates every line whose address falls in
  // [base, base + length). Returns the number of invalidated lines.
  std::size_t flush_range(Address base, std::uint64_t length, bool write_back);
  void write_back_all();

  const CacheGeometry& geometry() const { return geometry_; }
  const CacheLine& line(std::uint32_t set, std::uint32_t way) const {
    return lines_[set * geometry_.num_ways + way];
  }
  std::span<const std::uint8_t> line_data(std::uint32_t set, std::uint32_t way) const;
  const WayEntry& way_entry(std::uint32_t way) const { return ways_[way]; }
  const ModeEntry& mode_entry(EnclaveId eid) const { return modes_[eid.value()]; }
  std::uint32_t max_ways_per_enclave() const { return max_ways_; }
  const CacheStats& stats(EnclaveId eid) const { return stats_[eid.value()]; }

  // Invoked on every replacement decision (eid, set, way).
  void set_victim_observer(std::function<void(EnclaveId, std::uint32_t, std::uint32_t)> f) {
    victim_observer_ = std::move(f);
  }

 private:
  CacheLine& line_ref(std::uint32_t set, std::uint32_t way) {
    return lines_[set * geometry_.num_ways + way];
  }
  std::span<std::uint8_t> data_ref(std::uint32_t set, std::uint32_t way);
  bool may_hit_in(EnclaveId eid, std::uint32_t way) const;
  // Writes back if dirty, then invalidates. Returns true if written back.
  bool evict_line(std::uint32_t set, std::uint32_t way);
  std::size_t flush_if(const std::function<bool(std::uint32_t, std::uint32_t,
                                                const CacheLine&)>& pred);

  CacheGeometry geometry_;
  PhysicalMemory& memory_;
  std::uint32_t max_ways_;
  std::vector<CacheLine> lines_;
  std::vector<std::uint8_t> data_;
  std::vector<WayEntry> ways_;
  std::array<ModeEntry, EnclaveId::kCount> modes_;
  std::array<Xorshift64Star, EnclaveId::kCount> rngs_;
  std::array<CacheStats, EnclaveId::kCount> stats_;
  std::function<void(EnclaveId, std::uint32_t, std::uint32_t)> victim_observer_;
};

}  // namespace cure

#endif  // CURE_CACHE_HPP_
