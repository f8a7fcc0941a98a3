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

#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "cure/cache.hpp"
#include "test_support.hpp"

namespace cure {
namespace {

const EnclaveId kSm = EnclaveId::Sm();

struct CacheRig {
  PhysicalMemory memory;
  PartitionedCache cache;
  explicit CacheRig(std::uint64_t seed = 42, CacheGeometry g = {})
      : cache(g, memory, seed) {}

  CacheAccessResult read(EnclaveId eid, Address a) {
    Bytes b(8);
    return cache.access(eid, a, false, b);
  }
  CacheAccessResult write(EnclaveId eid, Address a, const Bytes& data) {
    Bytes b = data;
    return cache.access(eid, a, true, b);
  }
};

// Address of the i-th distinct line mapping to `set`.
Address in_set(const CacheGeometry& g, std::uint32_t set, std::uint32_t i) {
  return 0x8000'0000 + g.address_of(i, set);
}

TEST(CacheGeometryTest, AddressDecomposition) {
  CacheGeometry g;
  const Address a = 0x8123'4567;
  EXPECT_EQ(g.address_of(g.tag(a), g.set_index(a)), g.line_base(a));
  EXPECT_LT(g.set_index(a), g.num_sets);
  EXPECT_FALSE((CacheGeometry{48, 16, 64}).validate().ok());
  EXPECT_FALSE((CacheGeometry{64, 0, 64}).validate().ok());
  EXPECT_TRUE((CacheGeometry{2048, 16, 64}).validate().ok());
}

TEST(CacheAccessTest, ColdMissThenHit) {
  CacheRig rig;
  EXPECT_FALSE(rig.read(EnclaveId(2), 0x8000'1000).hit);
  EXPECT_TRUE(rig.read(EnclaveId(2), 0x8000'1000).hit);
}

TEST(CacheAccessTest, NoCrossEidHits) {
  CacheRig rig;
  rig.read(EnclaveId(2), 0x8000'1000);
  EXPECT_FALSE(rig.read(EnclaveId(3), 0x8000'1000).hit);
}

TEST(CacheAccessTest, CrossEidMissSeesWrittenData) {
  CacheRig rig;
  Bytes v = testing::pattern(8, 3);
  rig.write(EnclaveId(2), 0x8000'1000, v);
  Bytes out(8);
  auto r = rig.cache.access(EnclaveId::Os(), 0x8000'1000, false, out);
  EXPECT_FALSE(r.hit);
  EXPECT_EQ(out, v);  // the other copy was written back first
}

TEST(CacheAccessTest, StrictHitsOnlyInAllocatedWays) {
  CacheRig rig;
  const EnclaveId e(4);
  const Address a = 0x8000'2000;
  // Line lands somewhere while e is CP-BASIC.
  auto first = rig.read(e, a);
  ASSERT_OK(rig.cache.allocate_ways(kSm, e, 2));
  ASSERT_OK(rig.cache.set_mode(kSm, e, CacheMode::kStrict));
  const auto& ways = rig.cache.mode_entry(e).allocated_ways;
  bool inside = std::find(ways.begin(), ways.end(), first.way) != ways.end();
  auto again = rig.read(e, a);
  EXPECT_EQ(again.hit, inside);
  auto third = rig.read(e, a);
  EXPECT_TRUE(third.hit);
  EXPECT_TRUE(std::find(ways.begin(), ways.end(), third.way) != ways.end());
}

TEST(SelectVictimTest, SingletonStrictAllocation) {
  CacheRig rig;
  const EnclaveId e(3);
  // Take ways 0-4 for someone else first so e gets way 5.
  ASSERT_OK(rig.cache.allocate_ways(kSm, EnclaveId(1), 5));
  ASSERT_OK(rig.cache.allocate_ways(kSm, e, 1));
  ASSERT_OK(rig.cache.set_mode(kSm, e, CacheMode::kStrict));
  ASSERT_EQ(rig.cache.mode_entry(e).allocated_ways, std::vector<std::uint32_t>{5});
  for (int i = 0; i < 200; ++i) {
    auto v = rig.cache.select_victim(e, static_cast<std::uint32_t>(i % 64));
    ASSERT_OK(v);
    EXPECT_EQ(*v, 5u);
  }
}

TEST(SelectVictimTest, BasicSkipsOthersExclusiveWays) {
  CacheRig rig;
  ASSERT_OK(rig.cache.allocate_ways(kSm, EnclaveId(1), 6));  // ways 0-5
  ASSERT_OK(rig.cache.set_mode(kSm, EnclaveId(1), CacheMode::kStrict));
  // Fill set 0 so the invalid-first rule does not hide anything.
  for (std::uint32_t i = 0; i < 64; ++i) rig.read(EnclaveId(2), in_set(rig.cache.geometry(), 0, i));
  std::set<std::uint32_t> seen;
  for (int i = 0; i < 5000; ++i) {
    auto v = rig.cache.select_victim(EnclaveId(2), 0);
    ASSERT_OK(v);
    seen.insert(*v);
  }
  EXPECT_EQ(seen, (std::set<std::uint32_t>{6, 7, 8, 9, 10, 11, 12, 13, 14, 15}));
}

TEST(SelectVictimTest, PrefersInvalidWays) {
  CacheRig rig;
  const CacheGeometry& g = rig.cache.geometry();
  std::set<std::uint32_t> used;
  for (std::uint32_t i = 0; i < g.num_ways; ++i) {
    auto r = rig.read(EnclaveId::Os(), in_set(g, 7, i));
    EXPECT_FALSE(r.evicted.has_value());
    used.insert(r.way);
  }
  EXPECT_EQ(used.size(), g.num_ways);
  EXPECT_TRUE(rig.read(EnclaveId::Os(), in_set(g, 7, 99)).evicted.has_value());
}

TEST(SelectVictimTest, StrictWithoutWaysHasNoCandidate) {
  CacheRig rig;
  // Every way exclusive to other enclaves leaves a CP-BASIC requester with
  // nothing; the access is served from DRAM.
  for (std::uint8_t e = 1; e <= 2; ++e) {
    ASSERT_OK(rig.cache.allocate_ways(kSm, EnclaveId(e), 8));
  }
  EXPECT_CODE(rig.cache.select_victim(EnclaveId(3), 0), ErrorCode::kNoCandidateWay);
  auto r = rig.read(EnclaveId(3), 0x8000'0000);
  EXPECT_TRUE(r.bypassed);
  EXPECT_CODE(rig.cache.set_mode(kSm, EnclaveId(3), CacheMode::kStrict),
              ErrorCode::kNoCandidateWay);
}

// Seed 42, 16 free ways, 10^6 draws: chi-square against uniform and each
// way within 3 sigma of its expectation.
TEST(SelectVictimTest, UniformOverFreeWays) {
  CacheRig rig(42);
  CacheRig replay(42);
  constexpr int kDraws = 1'000'000;
  std::array<std::uint64_t, 16> count{};
  for (int i = 0; i < kDraws; ++i) {
    std::uint32_t w = *rig.cache.select_victim(EnclaveId::Os(), 3);
    ASSERT_LT(w, 16u);
    ++count[w];
    if (i < 1000) {
      ASSERT_EQ(w, *replay.cache.select_victim(EnclaveId::Os(), 3));
    }
  }
  const double expected = kDraws / 16.0;
  const double sigma = std::sqrt(kDraws * (1.0 / 16) * (15.0 / 16));
  double chi2 = 0;
  for (std::uint64_t c : count) {
    chi2 += (c - expected) * (c - expected) / expected;
    EXPECT_LT(std::abs(static_cast<double>(c) - expected), 3 * sigma);
  }
  EXPECT_LT(chi2, 37.70);  // 15 degrees of freedom, p = 0.001
}

TEST(AllocateWaysTest, CountingOverThePool) {
  CacheRig rig;
  ASSERT_OK(rig.cache.allocate_ways(kSm, EnclaveId(1), 1));
  EXPECT_EQ(rig.cache.mode_entry(EnclaveId(1)).allocated_ways.size(), 1u);
  ASSERT_OK(rig.cache.release_ways(kSm, EnclaveId(1)));
  for (std::uint8_t e = 1; e <= 8; ++e) ASSERT_OK(rig.cache.allocate_ways(kSm, EnclaveId(e), 2));
  EXPECT_CODE(rig.cache.allocate_ways(kSm, EnclaveId(9), 1), ErrorCode::kWaysUnavailable);
  // A way is exclusive to at most one eid.
  std::set<std::uint32_t> owned;
  for (std::uint8_t e = 1; e <= 8; ++e) {
    for (std::uint32_t w : rig.cache.mode_entry(EnclaveId(e)).allocated_ways) {
      EXPECT_TRUE(owned.insert(w).second);
      EXPECT_EQ(rig.cache.way_entry(w).owner, EnclaveId(e));
    }
  }
}

TEST(AllocateWaysTest, PerEnclaveMaximum) {
  CacheRig rig;
  EXPECT_CODE(rig.cache.allocate_ways(kSm, EnclaveId(1), 9), ErrorCode::kExceedsPerEnclaveMax);
  ASSERT_OK(rig.cache.allocate_ways(kSm, EnclaveId(1), 8));
  EXPECT_CODE(rig.cache.allocate_ways(kSm, EnclaveId(1), 1), ErrorCode::kExceedsPerEnclaveMax);
}

TEST(AllocateWaysTest, HandoverWritesBackResidentLines) {
  CacheRig rig;
  const CacheGeometry& g = rig.cache.geometry();
  std::vector<std::pair<Address, Bytes>> written;
  for (std::uint32_t i = 0; i < g.num_ways; ++i) {
    Address a = in_set(g, 1, i);
    written.emplace_back(a, testing::pattern(8, static_cast<std::uint8_t>(i)));
    rig.write(EnclaveId::Os(), a, written.back().second);
  }
  ASSERT_OK(rig.cache.allocate_ways(kSm, EnclaveId(5), 4));
  for (std::uint32_t w : rig.cache.mode_entry(EnclaveId(5)).allocated_ways) {
    EXPECT_FALSE(rig.cache.line(1, w).valid);
  }
  rig.cache.write_back_all();
  for (const auto& [a, v] : written) {
    Bytes b(8);
    rig.memory.read(a, b);
    EXPECT_EQ(b, v);
  }
}

TEST(AllocateWaysTest, SmOnly) {
  CacheRig rig;
  EXPECT_CODE(rig.cache.allocate_ways(EnclaveId::Os(), EnclaveId(1), 1), ErrorCode::kNotSm);
  EXPECT_CODE(rig.cache.set_mode(EnclaveId::Os(), EnclaveId(4), CacheMode::kStrict),
              ErrorCode::kNotSm);
  EXPECT_CODE(rig.cache.release_ways(EnclaveId(4), EnclaveId(4)), ErrorCode::kNotSm);
  EXPECT_CODE(rig.cache.flush_enclave_lines(EnclaveId::Firmware(), EnclaveId(4)),
              ErrorCode::kNotSm);
}

TEST(ReleaseWaysTest, DirectoryForgetsTheEnclave) {
  CacheRig rig;
  ASSERT_OK(rig.cache.allocate_ways(kSm, EnclaveId(4), 3));
  ASSERT_OK(rig.cache.set_mode(kSm, EnclaveId(4), CacheMode::kStrict));
  rig.read(EnclaveId(4), 0x8000'4000);
  ASSERT_OK(rig.cache.release_ways(kSm, EnclaveId(4)));
  for (std::uint32_t w = 0; w < 16; ++w) {
    EXPECT_FALSE(rig.cache.way_entry(w).excl && rig.cache.way_entry(w).owner == EnclaveId(4));
  }
  EXPECT_EQ(rig.cache.mode_entry(EnclaveId(4)).mode, CacheMode::kBasic);
  EXPECT_TRUE(rig.cache.mode_entry(EnclaveId(4)).allocated_ways.empty());
}

TEST(SetModeTest, MidRunSwitchConfinesFills) {
  CacheRig rig;
  const EnclaveId e(4);
  for (std::uint32_t i = 0; i < 40; ++i) rig.read(e, 0x8000'0000 + 64 * i);
  ASSERT_OK(rig.cache.allocate_ways(kSm, e, 2));
  ASSERT_OK(rig.cache.set_mode(kSm, e, CacheMode::kStrict));
  const auto ways = rig.cache.mode_entry(e).allocated_ways;
  for (std::uint32_t i = 0; i < 2000; ++i) {
    auto r = rig.read(e, 0x8010'0000 + 64 * i);
    if (!r.hit) {
      EXPECT_TRUE(std::find(ways.begin(), ways.end(), r.way) != ways.end());
    }
  }
}

TEST(FlushEnclaveLinesTest, CountsThenIdempotent) {
  CacheRig rig;
  for (std::uint32_t i = 0; i < 10; ++i) {
    rig.write(EnclaveId(2), 0x8000'0000 + 64 * i, testing::pattern(8, 1));
  }
  rig.read(EnclaveId(3), 0x8100'0000);
  EXPECT_EQ(*rig.cache.flush_enclave_lines(kSm, EnclaveId(2)), 10u);
  EXPECT_EQ(*rig.cache.flush_enclave_lines(kSm, EnclaveId(2)), 0u);
  Bytes b(8);
  rig.memory.read(0x8000'0000 + 64 * 9, b);
  EXPECT_EQ(b, testing::pattern(8, 1));
}

// Random traffic from four contexts, two of them CP-STRICT. Checks single
// ownership, no cross-eid hits, way confinement and write-back correctness
// against a flat image of every write.
TEST(CachePropertyTest, RandomTrafficKeepsInvariants) {
  CacheRig rig(7, CacheGeometry{16, 8, 64});
  ASSERT_OK(rig.cache.allocate_ways(kSm, EnclaveId(1), 2));
  ASSERT_OK(rig.cache.set_mode(kSm, EnclaveId(1), CacheMode::kStrict));
  ASSERT_OK(rig.cache.allocate_ways(kSm, EnclaveId(2), 3));
  ASSERT_OK(rig.cache.set_mode(kSm, EnclaveId(2), CacheMode::kStrict));
  std::vector<std::tuple<EnclaveId, std::uint32_t, std::uint32_t>> victims;
  rig.cache.set_victim_observer([&](EnclaveId e, std::uint32_t s, std::uint32_t w) {
    victims.emplace_back(e, s, w);
  });
  std::map<Address, std::uint8_t> flat;
  std::mt19937 rng(11);
  const EnclaveId actors[] = {EnclaveId::Os(), EnclaveId(1), EnclaveId(2), EnclaveId(3)};
  for (int i = 0; i < 50'000; ++i) {
    const EnclaveId e = actors[rng() % 4];
    const Address a = 0x8000'0000 + 8 * (rng() % 4096);
    if (rng() % 2) {
      Bytes v = testing::pattern(8, static_cast<std::uint8_t>(rng()));
      for (int k = 0; k < 8; ++k) flat[a + k] = v[k];
      rig.write(e, a, v);
    } else {
      Bytes out(8);
      auto r = rig.cache.access(e, a, false, out);
      if (r.hit) {
        ASSERT_EQ(rig.cache.line(r.set, r.way).line_eid, e);
      }
      for (int k = 0; k < 8; ++k) {
        auto it = flat.find(a + k);
        ASSERT_EQ(out[k], it == flat.end() ? 0 : it->second);
      }
    }
  }
  for (const auto& [e, s, w] : victims) {
    const WayEntry& we = rig.cache.way_entry(w);
    ASSERT_FALSE(we.excl && we.owner != e);
  }
  for (std::uint32_t s = 0; s < 16; ++s) {
    for (std::uint32_t w = 0; w < 8; ++w) {
      const CacheLine& l = rig.cache.line(s, w);
      if (!l.valid) continue;
      const ModeEntry& m = rig.cache.mode_entry(l.line_eid);
      if (m.mode == CacheMode::kStrict) {
        ASSERT_TRUE(std::binary_search(m.allocated_ways.begin(), m.allocated_ways.end(), w));
      }
    }
  }
  rig.cache.write_back_all();
  for (const auto& [a, v] : flat) ASSERT_EQ(rig.memory.read_u8(a), v);
}

}  // namespace
}  // namespace cure
