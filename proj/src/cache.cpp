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

#include "cure/cache.hpp"

#include <algorithm>
#include <bit>

namespace cure {

Status CacheGeometry::validate() const {
  if (num_sets == 0 || !std::has_single_bit(num_sets)) {
    return MakeError(ErrorCode::kMalformed, "num_sets must be a power of two");
  }
  if (line_bytes < 4 || !std::has_single_bit(line_bytes)) {
    return MakeError(ErrorCode::kMalformed, "line_bytes must be a power of two >= 4");
  }
  if (num_ways < 1 || num_ways > 32) {
    return MakeError(ErrorCode::kMalformed, "num_ways must be in [1, 32]");
  }
  return {};
}

PartitionedCache::PartitionedCache(CacheGeometry geometry, PhysicalMemory& memory,
                                   std::uint64_t seed,
                                   std::uint32_t max_ways_per_enclave)
    : geometry_(geometry),
      memory_(memory),
      max_ways_(max_ways_per_enclave),
      lines_(std::size_t{geometry.num_sets} * geometry.num_ways),
      data_(std::size_t{geometry.num_sets} * geometry.num_ways * geometry.line_bytes, 0),
      ways_(geometry.num_ways) {
  std::uint64_t s = seed;
  for (auto& rng : rngs_) rng = Xorshift64Star(splitmix64(s));
}

std::span<std::uint8_t> PartitionedCache::data_ref(std::uint32_t set, std::uint32_t way) {
  std::size_t index = (std::size_t{set} * geometry_.num_ways + way) * geometry_.line_bytes;
  return std::span<std::uint8_t>(data_).subspan(index, geometry_.line_bytes);
}

std::span<const std::uint8_t> PartitionedCache::line_data(std::uint32_t set,
                                                          std::uint32_t way) const {
  std::size_t index = (std::size_t{set} * geometry_.num_ways + way) * geometry_.line_bytes;
  return std::span<const std::uint8_t>(data_).subspan(index, geometry_.line_bytes);
}

bool PartitionedCache::may_hit_in(EnclaveId eid, std::uint32_t way) const {
  const ModeEntry& m = modes_[eid.value()];
  if (m.mode == CacheMode::kBasic) return true;
  return std::binary_search(m.allocated_ways.begin(), m.allocated_ways.end(), way);
}

bool PartitionedCache::evict_line(std::uint32_t set, std::uint32_t way) {
  CacheLine& l = line_ref(set, way);
  if (!l.valid) return false;
  bool wrote = false;
  if (l.dirty) {
    memory_.write(geometry_.address_of(l.tag, set), data_ref(set, way));
    ++stats_[l.line_eid.value()].writebacks;
    wrote = true;
  }
  l.valid = false;
  l.dirty = false;
  return wrote;
}

Result<std::uint32_t> PartitionedCache::select_victim(EnclaveId eid,
                                                      std::uint32_t set_index) {
  std::array<std::uint32_t, 32> candidates{};
  std::uint32_t n = 0;
  const ModeEntry& m = modes_[eid.value()];
  if (m.mode == CacheMode::kStrict) {
    for (std::uint32_t w : m.allocated_ways) candidates[n++] = w;
  } else {
    for (std::uint32_t w = 0; w < geometry_.num_ways; ++w) {
      const WayEntry& e = ways_[w];
      if (e.excl && e.owner != eid) continue;
      candidates[n++] = w;
    }
  }
  if (n == 0) {
    return MakeError(ErrorCode::kNoCandidateWay,
                     "no way may be filled by " + to_string(eid));
  }

  std::array<std::uint32_t, 32> invalid{};
  std::uint32_t n_invalid = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!line(set_index, candidates[i]).valid) invalid[n_invalid++] = candidates[i];
  }
  Xorshift64Star& rng = rngs_[eid.value()];
  std::uint32_t way = n_invalid > 0 ? invalid[rng.uniform(n_invalid)]
                                    : candidates[rng.uniform(n)];
  if (victim_observer_) victim_observer_(eid, set_index, way);
  return way;
}

CacheAccessResult PartitionedCache::access(EnclaveId eid, Address address,
                                           bool is_write,
                                           std::span<std::uint8_t> data) {
  CacheAccessResult result;
  const std::uint32_t set = geometry_.set_index(address);
  const std::uint32_t tag = geometry_.tag(address);
  const std::uint32_t offset = address & (geometry_.line_bytes - 1);
  result.set = set;
  CacheStats& st = stats_[eid.value()];

  for (std::uint32_t w = 0; w < geometry_.num_ways; ++w) {
    const CacheLine& l = line(set, w);
    if (l.valid && l.tag == tag && l.line_eid == eid && may_hit_in(eid, w)) {
      result.hit = true;
      result.way = w;
      ++st.hits;
      auto bytes = data_ref(set, w).subspan(offset, data.size());
      if (is_write) {
        std::copy(data.begin(), data.end(), bytes.begin());
        line_ref(set, w).dirty = true;
      } else {
        std::copy(bytes.begin(), bytes.end(), data.begin());
      }
      return result;
    }
  }
  ++st.misses;

  // One physical line has at most one cached copy: a copy held under another
  // owner (or outside the requester's permitted ways) is written back and
  // dropped before the refill so DRAM is current.
  for (std::uint32_t w = 0; w < geometry_.num_ways; ++w) {
    const CacheLine& l = line(set, w);
    if (l.valid && l.tag == tag) {
      if (evict_line(set, w)) ++result.writebacks;
    }
  }

  Result<std::uint32_t> victim = select_victim(eid, set);
  if (!victim.ok()) {
    result.bypassed = true;
    Address base = geometry_.line_base(address);
    if (is_write) {
      memory_.write(base + offset, data);
    } else {
      memory_.read(base + offset, data);
    }
    return result;
  }
  const std::uint32_t way = *victim;
  result.way = way;
  CacheLine& l = line_ref(set, way);
  if (l.valid) {
    Eviction ev{set, way, l.line_eid, geometry_.address_of(l.tag, set), false};
    ++stats_[l.line_eid.value()].evictions;
    ev.written_back = evict_line(set, way);
    if (ev.written_back) ++result.writebacks;
    result.evicted = ev;
  }
  auto line_bytes = data_ref(set, way);
  memory_.read(geometry_.line_base(address), line_bytes);
  l.valid = true;
  l.tag = tag;
  l.line_eid = eid;
  l.dirty = false;
  auto bytes = line_bytes.subspan(offset, data.size());
  if (is_write) {
    std::copy(data.begin(), data.end(), bytes.begin());
    l.dirty = true;
  } else {
    std::copy(bytes.begin(), bytes.end(), data.begin());
  }
  return result;
}

std::size_t PartitionedCache::flush_if(
    const std::function<bool(std::uint32_t, std::uint32_t, const CacheLine&)>& pred) {
  std::size_t count = 0;
  for (std::uint32_t s = 0; s < geometry_.num_sets; ++s) {
    for (std::uint32_t w = 0; w < geometry_.num_ways; ++w) {
      const CacheLine& l = line(s, w);
      if (l.valid && pred(s, w, l)) {
        evict_line(s, w);
        ++count;
      }
    }
  }
  return count;
}

Status PartitionedCache::allocate_ways(EnclaveId caller, EnclaveId eid,
                                       std::uint32_t count) {
  if (!caller.is_sm()) return MakeError(ErrorCode::kNotSm, "allocate_ways");
  if (!eid.is_pool() && !eid.is_sm()) {
    return MakeError(ErrorCode::kMalformed, "ways may only be owned by enclaves or the SM");
  }
  ModeEntry& m = modes_[eid.value()];
  if (m.allocated_ways.size() + count > max_ways_) {
    return MakeError(ErrorCode::kExceedsPerEnclaveMax,
                     "request exceeds the per-enclave way maximum");
  }
  std::vector<std::uint32_t> free_ways;
  for (std::uint32_t w = 0; w < geometry_.num_ways && free_ways.size() < count; ++w) {
    if (!ways_[w].excl) free_ways.push_back(w);
  }
  if (free_ways.size() < count) {
    return MakeError(ErrorCode::kWaysUnavailable, "not enough unallocated ways");
  }
  for (std::uint32_t w : free_ways) {
    for (std::uint32_t s = 0; s < geometry_.num_sets; ++s) {
      const CacheLine& l = line(s, w);
      if (l.valid && l.line_eid != eid) evict_line(s, w);
    }
    ways_[w] = WayEntry{true, eid};
    m.allocated_ways.push_back(w);
  }
  std::sort(m.allocated_ways.begin(), m.allocated_ways.end());
  return {};
}

Status PartitionedCache::release_ways(EnclaveId caller, EnclaveId eid) {
  if (!caller.is_sm()) return MakeError(ErrorCode::kNotSm, "release_ways");
  ModeEntry& m = modes_[eid.value()];
  for (std::uint32_t w : m.allocated_ways) ways_[w] = WayEntry{};
  m.allocated_ways.clear();
  m.mode = CacheMode::kBasic;
  flush_if([eid](std::uint32_t, std::uint32_t, const CacheLine& l) {
    return l.line_eid == eid;
  });
  return {};
}

Status PartitionedCache::set_mode(EnclaveId caller, EnclaveId eid, CacheMode mode) {
  if (!caller.is_sm()) return MakeError(ErrorCode::kNotSm, "set_mode");
  ModeEntry& m = modes_[eid.value()];
  if (mode == CacheMode::kBasic) {
    if (m.mode == CacheMode::kStrict || !m.allocated_ways.empty()) {
      return release_ways(caller, eid);
    }
    return {};
  }
  if (m.allocated_ways.empty()) {
    return MakeError(ErrorCode::kNoCandidateWay, "CP-STRICT needs allocated ways");
  }
  m.mode = CacheMode::kStrict;
  // Lines the enclave left in shared ways must not stay reachable.
  flush_if([this, eid](std::uint32_t, std::uint32_t w, const CacheLine& l) {
    return l.line_eid == eid && !may_hit_in(eid, w);
  });
  return {};
}

Result<std::size_t> PartitionedCache::flush_enclave_lines(EnclaveId caller, EnclaveId eid) {
  if (!caller.is_sm()) return MakeError(ErrorCode::kNotSm, "flush_enclave_lines");
  return flush_if([eid](std::uint32_t, std::uint32_t, const CacheLine& l) {
    return l.line_eid == eid;
  });
}

std::size_t PartitionedCache::flush_range(Address base, std::uint64_t length,
                                          bool write_back) {
  const std::uint64_t end = std::uint64_t{base} + length;
  std::size_t count = 0;
  for (std::uint32_t s = 0; s < geometry_.num_sets; ++s) {
    for (std::uint32_t w = 0; w < geometry_.num_ways; ++w) {
      CacheLine& l = line_ref(s, w);
      if (!l.valid) continue;
      std::uint64_t a = geometry_.address_of(l.tag, s);
      if (a + geometry_.line_bytes <= base || a >= end) continue;
      if (write_back) {
        evict_line(s, w);
      } else {
        l.valid = false;
        l.dirty = false;
      }
      ++count;
    }
  }
  return count;
}

void PartitionedCache::write_back_all() {
  for (std::uint32_t s = 0; s < geometry_.num_sets; ++s) {
    for (std::uint32_t w = 0; w < geometry_.num_ways; ++w) {
      CacheLine& l = line_ref(s, w);
      if (l.valid && l.dirty) {
        memory_.write(geometry_.address_of(l.tag, s), data_ref(s, w));
        l.dirty = false;
      }
    }
  }
}

}  // namespace cure
