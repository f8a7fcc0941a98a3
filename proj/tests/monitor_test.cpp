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

#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "cure/monitor.hpp"
#include "test_support.hpp"

namespace cure {
namespace {

using testing::launch;
using testing::make_sim;
using testing::user_config;

Label L(std::string_view s) { return *make_label(s); }

std::array<std::uint8_t, 32> nonce_of(std::uint8_t v) {
  std::array<std::uint8_t, 32> n{};
  n.fill(v);
  return n;
}

PeripheralSpec dma_device(std::string name) {
  PeripheralSpec p;
  p.name = std::move(name);
  p.dma_capable = true;
  return p;
}

TEST(InstallTest, FreshMetaHasCounterZero) {
  auto sim = make_sim();
  Bytes pkg = sim->make_package(user_config("i"), test_binary("i", 100));
  ASSERT_OK(sim->install(0, pkg));
  const EnclaveMeta* m = sim->sm().find(L("i"));
  ASSERT_NE(m, nullptr);
  EXPECT_EQ(m->rollback_counter, 0u);
  EXPECT_FALSE(m->live());
  EXPECT_CODE(sim->install(0, pkg), ErrorCode::kDuplicateLabel);
}

TEST(InstallTest, FlippedBinaryByteIsBadSignature) {
  auto sim = make_sim();
  auto p = parse_package(sim->make_package(user_config("i"), test_binary("i", 100)));
  p->binary[5] ^= 1;
  EXPECT_CODE(sim->install(0, p->serialize()), ErrorCode::kBadSignature);
}

TEST(InstallTest, UnknownRootIsBadCertChain) {
  auto sim = make_sim();
  Ecosystem other = Ecosystem::FromSeed(sim->crypto().signatures, 77);
  Bytes pkg = build_package(sim->crypto().signatures, user_config("i"), test_binary("i", 10),
                            other.provider_sk, other.provider_cert).serialize();
  EXPECT_CODE(sim->install(0, pkg), ErrorCode::kBadCertChain);
}

TEST(LayoutTest, AreasAscendAndCoverOnlyTheRegion) {
  MemRegion r = *MemRegion::Make(0x8200'0000, 0x1'0000);
  auto l = EnclaveLayout::Make(r, 5000);
  ASSERT_OK(l);
  EXPECT_EQ(l->code_pages, 2u);
  EXPECT_EQ(l->code_base, r.base);
  EXPECT_LT(l->code_base, l->page_table_base);
  EXPECT_LT(l->page_table_base, l->state_base);
  EXPECT_LT(l->state_base, l->heap_base);
  EXPECT_LE(l->heap_base, l->heap_end);
  EXPECT_EQ(l->shared.base, l->heap_end);
  EXPECT_EQ(l->shared.end(), r.end());
  EXPECT_EQ(l->area_of(r.base - 1), LayoutArea::kOutside);
  EXPECT_EQ(l->area_of(l->state_base + 63), LayoutArea::kState);
  EXPECT_CODE(EnclaveLayout::Make(*MemRegion::Make(0x8200'0000, 0x4000), 5000),
              ErrorCode::kResourceUnavailable);
}

TEST(SetupTest, ThirteenEnclavesThenNoFreeEid) {
  auto sim = make_sim();
  std::set<std::uint8_t> eids;
  for (int i = 0; i < 13; ++i) {
    auto e = launch(*sim, user_config("e" + std::to_string(i)));
    ASSERT_OK(e);
    EXPECT_TRUE(e->is_pool());
    EXPECT_TRUE(eids.insert(e->value()).second);
    EXPECT_EQ(sim->sm().state().eid_pool.size() + sim->sm().live_count(), 13u);
  }
  EXPECT_CODE(launch(*sim, user_config("e13")), ErrorCode::kNoFreeEid);
  ASSERT_OK(sim->teardown(0, L("e4")));
  ASSERT_OK(sim->setup(0, L("e13")));
}

TEST(SetupTest, ArbiterCoversTheRoundedRegion) {
  auto sim = make_sim();
  auto e = launch(*sim, user_config("r", 100'000));
  ASSERT_OK(e);
  const auto& reg = sim->bus().arbiter().regions[e->value()];
  ASSERT_TRUE(reg.has_value());
  EXPECT_EQ(reg->size(), 131072u);
  EXPECT_EQ(*reg, sim->layout_of(L("r"))->region);
  EXPECT_EQ(sim->sm().find_live(*e)->runtime->state_at_setup.counter, 0u);
}

TEST(SetupTest, TamperedImageIsRejectedAndRolledBack) {
  auto sim = make_sim();
  Bytes bin = test_binary("t", 64);
  ASSERT_OK(sim->install(0, sim->make_package(user_config("t"), bin)));
  const Address base = 0x8F00'0000;
  for (std::size_t i = 0; i < bin.size(); ++i) {
    Bytes img = bin;
    img[i] ^= 0x01;
    sim->memory().write(base, img);
    SetupRequest req{L("t"), base, user_config("t"), std::nullopt};
    EXPECT_CODE(sim->sm().setup(0, req), ErrorCode::kBadSignature);
  }
  EXPECT_EQ(sim->sm().state().eid_pool.size(), 13u);
  for (std::uint8_t e = 1; e <= 13; ++e) EXPECT_FALSE(sim->bus().arbiter().regions[e].has_value());
  // The OS-supplied config is covered by the signature too.
  sim->memory().write(base, bin);
  EnclaveConfig more = user_config("t", 128 * 1024);
  EXPECT_CODE(sim->sm().setup(0, SetupRequest{L("t"), base, more, std::nullopt}),
              ErrorCode::kBadSignature);
  ASSERT_OK(sim->sm().setup(0, SetupRequest{L("t"), base, user_config("t"), std::nullopt}));
}

TEST(SetupTest, UnknownLabel) {
  auto sim = make_sim();
  EXPECT_CODE(sim->setup(0, L("nobody")), ErrorCode::kUnknownLabel);
}

TEST(TeardownTest, RegionReadsZeroAfterwards) {
  auto sim = make_sim();
  auto e = launch(*sim, user_config("z"));
  ASSERT_OK(e);
  const EnclaveLayout layout = *sim->layout_of(L("z"));
  for (Address a = layout.heap_base; a < layout.heap_base + 4096; a += 64) {
    ASSERT_OK(sim->access(1, *e, BusOp::kWrite, a, 8, testing::pattern(8, 1)));
  }
  ASSERT_OK(sim->teardown(0, L("z")));
  EXPECT_TRUE(testing::all_zero(sim->sm_read(layout.region.base,
                                             static_cast<std::uint32_t>(layout.region.size()))));
  for (Address a = layout.region.base; a < layout.region.end(); a += 512) {
    auto r = sim->access(0, EnclaveId::Os(), BusOp::kRead, a, 8);
    ASSERT_OK(r);
    EXPECT_TRUE(r->decision.allowed());
    EXPECT_EQ(r->data, Bytes(8, 0));
  }
  EXPECT_CODE(sim->sm().teardown(0, *e), ErrorCode::kNotLive);
}

TEST(TeardownTest, CounterIncrementsByOne) {
  auto sim = make_sim();
  ASSERT_OK(launch(*sim, user_config("c")));
  for (std::uint64_t i = 1; i <= 5; ++i) {
    ASSERT_OK(sim->teardown(0, L("c")));
    EXPECT_EQ(sim->sm().find(L("c"))->rollback_counter, i);
    EXPECT_EQ(sim->sm().find(L("c"))->sealed_state.counter, i);
    auto e = sim->setup(0, L("c"));
    ASSERT_OK(e);
    EXPECT_EQ(sim->sm().find_live(*e)->runtime->state_at_setup.counter, i);
  }
  ASSERT_OK(sim->teardown(0, L("c")));
  EXPECT_EQ(sim->sm().find(L("c"))->rollback_counter, 6u);
}

TEST(TeardownTest, CustomKeysSurvive) {
  auto sim = make_sim();
  auto e = launch(*sim, user_config("k"));
  const EnclaveLayout layout = *sim->layout_of(L("k"));
  EnclaveState st = sim->sm().find_live(*e)->runtime->state_at_setup;
  st.custom_keys.push_back(EnclaveState::CustomKey{1, 2, 3});
  Bytes raw = st.serialize();
  for (std::uint32_t off = 0; off < raw.size(); off += 8) {
    ASSERT_OK(sim->access(1, *e, BusOp::kWrite, layout.state_base + off, 8,
                          ByteSpan(raw).subspan(off, 8)));
  }
  ASSERT_OK(sim->teardown(0, L("k")));
  auto e2 = sim->setup(0, L("k"));
  ASSERT_OK(e2);
  const EnclaveState& back = sim->sm().find_live(*e2)->runtime->state_at_setup;
  ASSERT_EQ(back.custom_keys.size(), 1u);
  EXPECT_EQ(back.custom_keys[0][2], 3);
  EXPECT_EQ(back.comm_key, st.comm_key);
}

TEST(RollbackTest, ReplayedBlobIsDetected) {
  auto sim = make_sim();
  ASSERT_OK(launch(*sim, user_config("rb")));
  std::vector<Bytes> blobs;
  for (int i = 0; i < 3; ++i) {
    ASSERT_OK(sim->teardown(0, L("rb")));
    blobs.push_back(*sim->sm().load_sealed_state(L("rb")));
    if (i < 2) ASSERT_OK(sim->setup(0, L("rb")));
  }
  // Two teardowns ago, then one ago: both rejected.
  for (int i : {0, 1}) {
    ASSERT_OK(sim->sm().store_sealed_state(L("rb"), blobs[i]));
    EXPECT_CODE(sim->setup(0, L("rb")), ErrorCode::kRollbackDetected);
    EXPECT_EQ(sim->sm().live_count(), 0u);
  }
  // The current blob is not a rollback.
  ASSERT_OK(sim->sm().store_sealed_state(L("rb"), blobs[2]));
  ASSERT_OK(sim->setup(0, L("rb")));
}

TEST(RollbackTest, VersionCannotGoBack) {
  auto sim = make_sim();
  EnclaveConfig v2 = user_config("v");
  v2.version = 2;
  EnclaveConfig v1 = user_config("v");
  ASSERT_OK(sim->install(0, sim->make_package(v2, test_binary("v", 100))));
  ASSERT_OK(sim->setup(0, L("v")));
  ASSERT_OK(sim->teardown(0, L("v")));
  ASSERT_OK(sim->update(0, sim->make_package(v1, test_binary("v", 100))));
  EXPECT_CODE(sim->setup(0, L("v")), ErrorCode::kVersionRollback);
  EnclaveConfig v3 = user_config("v");
  v3.version = 3;
  ASSERT_OK(sim->update(0, sim->make_package(v3, test_binary("v3", 100))));
  ASSERT_OK(sim->setup(0, L("v")));
  EXPECT_CODE(sim->update(0, sim->make_package(v3, test_binary("v3", 100))),
              ErrorCode::kAlreadyLive);
}

TEST(PageTableTest, OsBuiltTablesInsideRegionAccepted) {
  auto sim = make_sim();
  ASSERT_OK(sim->install(0, sim->make_package(user_config("pt"), test_binary("pt", 5000))));
  auto layout = sim->plan_layout(L("pt"));
  ASSERT_OK(layout);
  PageTable pt = default_page_table(*layout);
  pt.root = layout->page_table_base + kPageBytes;
  pt.entries.push_back(PageTableEntry{kEnclaveHeapVirtual >> 12, layout->heap_base >> 12, 0x3});
  auto e = sim->setup(0, L("pt"), pt);
  ASSERT_OK(e);
  ASSERT_OK(sim->access(1, *e, BusOp::kWrite, kEnclaveHeapVirtual + 8, 8, testing::pattern(8, 2),
                        true));
  auto r = sim->access(1, *e, BusOp::kRead, kEnclaveHeapVirtual + 8, 8, {}, true);
  EXPECT_EQ(r->data, testing::pattern(8, 2));
}

class BadPageTableTest : public ::testing::TestWithParam<int> {};

TEST_P(BadPageTableTest, Rejected) {
  auto sim = make_sim();
  ASSERT_OK(sim->install(0, sim->make_package(user_config("pt"), test_binary("pt", 5000))));
  auto layout = sim->plan_layout(L("pt"));
  PageTable pt = default_page_table(*layout);
  switch (GetParam()) {
    case 0:  // a PTE into OS memory
      pt.entries.push_back(PageTableEntry{0x900, kOsBase >> 12, 0x3});
      break;
    case 1:  // root outside the region
      pt.root = kOsBase;
      break;
    case 2:  // a code page left unmapped
      pt.entries.erase(pt.entries.begin());
      break;
    case 3:  // mapping its own page tables
      pt.entries.push_back(PageTableEntry{0x900, layout->page_table_base >> 12, 0x3});
      break;
    case 4:  // the SM region
      pt.entries.push_back(PageTableEntry{0x900, kSmBase >> 12, 0x3});
      break;
    default:  // the same virtual page twice
      pt.entries.push_back(PageTableEntry{kEnclaveStateVirtual >> 12, layout->heap_base >> 12, 3});
  }
  EXPECT_CODE(sim->setup(0, L("pt"), pt), ErrorCode::kBadPageTables);
  EXPECT_EQ(sim->sm().live_count(), 0u);
}

INSTANTIATE_TEST_SUITE_P(Cases, BadPageTableTest, ::testing::Range(0, 6));

TEST(AddPageMappingTest, HeapGrowthAndRejections) {
  auto sim = make_sim();
  auto e = launch(*sim, user_config("h"));
  ASSERT_OK(e);
  const EnclaveLayout l = *sim->layout_of(L("h"));
  EXPECT_CODE(sim->access(1, *e, BusOp::kRead, kEnclaveHeapVirtual, 8, {}, true),
              ErrorCode::kTranslationFault);
  ASSERT_OK(sim->sm().add_page_mapping(0, *e, {kEnclaveHeapVirtual >> 12, l.heap_base >> 12, 3}));
  ASSERT_OK(sim->access(1, *e, BusOp::kRead, kEnclaveHeapVirtual, 8, {}, true));
  EXPECT_CODE(sim->sm().add_page_mapping(0, *e, {0x901, l.state_base >> 12, 3}),
              ErrorCode::kBadPageTables);
  EXPECT_CODE(sim->sm().add_page_mapping(0, *e, {kEnclaveHeapVirtual >> 12,
                                                 (l.heap_base >> 12) + 1, 3}),
              ErrorCode::kBadPageTables);
  EXPECT_CODE(sim->sm().add_page_mapping(0, *e, {0x902, kOsBase >> 12, 3}),
              ErrorCode::kBadPageTables);
  EXPECT_CODE(sim->sm().add_page_mapping(0, *e, {0x903, l.code_base >> 12, 3}),
              ErrorCode::kBadPageTables);
}

TEST(HandoffTest, WindowMovesBetweenEnclaveAndOs) {
  auto sim = make_sim();
  auto e = launch(*sim, user_config("s"));
  ASSERT_OK(e);
  const Address w = sim->layout_of(L("s"))->shared.base;
  ASSERT_OK(sim->access(1, *e, BusOp::kWrite, w, 8, testing::pattern(8, 4)));
  EXPECT_FALSE(sim->access(0, EnclaveId::Os(), BusOp::kRead, w, 8)->decision.allowed());

  ASSERT_OK(sim->sm().shared_memory_handoff(0, *e, *e, EnclaveId::Os()));
  EXPECT_EQ(sim->sm().ipi_count(EnclaveId::Os()), 1u);
  auto os = sim->access(0, EnclaveId::Os(), BusOp::kRead, w, 8);
  EXPECT_TRUE(os->decision.allowed());
  EXPECT_EQ(os->data, testing::pattern(8, 4));
  EXPECT_FALSE(sim->access(1, *e, BusOp::kRead, w, 8)->decision.allowed());
  EXPECT_CODE(sim->sm().shared_memory_handoff(0, *e, *e, EnclaveId::Os()), ErrorCode::kNotOwner);

  ASSERT_OK(sim->sm().shared_memory_handoff(0, *e, EnclaveId::Os(), *e));
  EXPECT_EQ(sim->sm().ipi_count(*e), 1u);
  EXPECT_TRUE(sim->access(1, *e, BusOp::kRead, w, 8)->decision.allowed());
  EXPECT_FALSE(sim->access(0, EnclaveId::Os(), BusOp::kRead, w, 8)->decision.allowed());
}

TEST(HandoffTest, EnclaveToEnclave) {
  auto sim = make_sim();
  auto a = launch(*sim, user_config("a"));
  auto b = launch(*sim, user_config("b"));
  const Address w = sim->layout_of(L("a"))->shared.base;
  ASSERT_OK(sim->access(1, *a, BusOp::kWrite, w + 16, 8, testing::pattern(8, 6)));
  ASSERT_OK(sim->sm().shared_memory_handoff(0, *a, *a, *b));
  auto r = sim->access(2, *b, BusOp::kRead, w + 16, 8);
  EXPECT_TRUE(r->decision.allowed());
  EXPECT_EQ(r->data, testing::pattern(8, 6));
  EXPECT_CODE(sim->sm().shared_memory_handoff(0, *a, EnclaveId::Os(), *a), ErrorCode::kNotOwner);
}

TEST(AttestTest, HonestReportVerifies) {
  auto sim = make_sim();
  auto e = launch(*sim, user_config("at"));
  auto rep = sim->sm().attest(0, *e, nonce_of(1));
  ASSERT_OK(rep);
  const Signature expected = sim->sm().find(L("at"))->sig;
  const auto& s = sim->crypto().signatures;
  EXPECT_TRUE(provider_verify_report(s, *rep, sim->ecosystem().vendor_root, expected, nonce_of(1)));
  EXPECT_FALSE(provider_verify_report(s, *rep, sim->ecosystem().vendor_root, expected, nonce_of(2)));
  RevocationList crl;
  crl.revoked.insert(sim->ecosystem().device_cert.subject_key);
  EXPECT_FALSE(provider_verify_report(s, *rep, sim->ecosystem().vendor_root, expected,
                                      nonce_of(1), crl));
  ASSERT_OK(sim->teardown(0, L("at")));
  EXPECT_CODE(sim->sm().attest(0, *e, nonce_of(1)), ErrorCode::kNotLive);
}

// The verifier accepts only the unmodified binary: a re-signed package
// with one byte changed attests under a different enclave signature.
TEST(AttestTest, SingleByteFlipsOfTheBinaryAreRejected) {
  MachineSpec spec = testing::fake_spec();
  auto sim = make_sim(spec);
  EnclaveConfig cfg = user_config("flip");
  const Bytes bin = test_binary("flip", 64);
  const Bytes genuine = sim->make_package(cfg, bin);
  const Signature expected = parse_package(genuine)->sig;
  const auto& s = sim->crypto().signatures;
  ASSERT_OK(sim->install(0, genuine));
  for (int i = -1; i < 64; ++i) {
    Bytes b = bin;
    if (i >= 0) b[i] ^= 0xFF;
    ASSERT_OK(sim->update(0, sim->make_package(cfg, b)));
    auto e = sim->setup(0, L("flip"));
    ASSERT_OK(e);
    auto rep = sim->sm().attest(0, *e, nonce_of(static_cast<std::uint8_t>(i + 2)));
    ASSERT_OK(rep);
    EXPECT_EQ(provider_verify_report(s, *rep, sim->ecosystem().vendor_root, expected,
                                     nonce_of(static_cast<std::uint8_t>(i + 2))),
              i < 0)
        << i;
    ASSERT_OK(sim->teardown(0, L("flip")));
  }
}

TEST(TrapNotifyTest, StormOfKInterrupts) {
  auto sim = make_sim();
  auto e = launch(*sim, user_config("n"));
  std::vector<TrapClass> seen;
  ASSERT_OK(sim->sm().register_trap_handler(*e, [&](TrapClass c) { seen.push_back(c); }));
  ASSERT_OK(sim->ensure_context(1, *e));
  EXPECT_EQ(sim->sm().deliver_trap(1, TrapClass::kTimer, 7), TrapOutcome::kEnteredSm);
  EXPECT_EQ(seen.size(), 7u);
  EXPECT_EQ(sim->sm().find_live(*e)->runtime->trap_notifications, 7u);
  EXPECT_TRUE(sim->machine().core(1).eid_reg.is_os());
  // A syscall is not an interrupt and is not reported.
  ASSERT_OK(sim->ensure_context(1, *e));
  sim->sm().deliver_trap(1, TrapClass::kSyscall);
  EXPECT_EQ(seen.size(), 7u);
}

TEST(ViolationTest, OsProbeIsLoggedWithEidZero) {
  auto sim = make_sim();
  auto e = launch(*sim, user_config("v"));
  const Address base = sim->layout_of(L("v"))->region.base;
  const std::size_t before = sim->sm().audit_log().size();
  ASSERT_OK(sim->access(0, EnclaveId::Os(), BusOp::kRead, base, 8));
  EXPECT_EQ(sim->sm().drain_violations(), 1u);
  ASSERT_EQ(sim->sm().audit_log().size(), before + 1);
  EXPECT_EQ(sim->sm().audit_log().back().violation.offender, EnclaveId::Os());
  EXPECT_EQ(sim->sm().audit_log().back().violation.address, base);
  (void)e;
}

TEST(ViolationTest, DmaOriginAndBurstOrder) {
  MachineSpec spec = testing::fake_spec();
  spec.peripherals.push_back(dma_device("dev"));
  auto sim = make_sim(spec);
  ASSERT_OK(launch(*sim, user_config("v")));
  const Address base = sim->layout_of(L("v"))->region.base;
  sim->sm().drain_violations();
  const std::size_t before = sim->sm().audit_log().size();
  for (int i = 0; i < 10; ++i) {
    ASSERT_OK(sim->dma("dev", BusOp::kRead, base + 8 * i, 8));
  }
  EXPECT_EQ(sim->sm().drain_violations(), 10u);
  const auto& log = sim->sm().audit_log();
  ASSERT_EQ(log.size(), before + 10);
  for (int i = 0; i < 10; ++i) {
    const ViolationRecord& v = log[before + i].violation;
    EXPECT_EQ(v.origin.kind, Origin::Kind::kDma);
    EXPECT_EQ(v.address, base + 8 * i);
  }
}

TEST(ViolationTest, RepeatOffenderIsTornDown) {
  MachineSpec spec = testing::fake_spec();
  spec.policy = ViolationPolicy::kTeardownRepeatOffender;
  auto sim = make_sim(spec);
  auto e = launch(*sim, user_config("bad"));
  for (int i = 0; i < 3; ++i) ASSERT_OK(sim->access(1, *e, BusOp::kRead, kOsBase + 8 * i, 8));
  sim->sm().drain_violations();
  EXPECT_EQ(sim->sm().live_count(), 0u);
  EXPECT_TRUE(sim->machine().core(1).eid_reg.is_os());
  EXPECT_EQ(sim->sm().find(L("bad"))->rollback_counter, 1u);
}

TEST(ViolationTest, LogOnlyByDefault) {
  auto sim = make_sim();
  auto e = launch(*sim, user_config("bad"));
  for (int i = 0; i < 10; ++i) ASSERT_OK(sim->access(1, *e, BusOp::kRead, kOsBase + 8 * i, 8));
  sim->sm().drain_violations();
  EXPECT_EQ(sim->sm().live_count(), 1u);
}

TEST(KernelEnclaveTest, CoresAndDeviceAreReserved) {
  MachineSpec spec = testing::fake_spec();
  spec.peripherals.push_back(dma_device("acc"));
  auto sim = make_sim(spec);
  const int acc = *sim->bus().find_peripheral("acc");
  sim->bus().peripheral_mut(acc).internal_memory[0] = 0xAA;
  EnclaveConfig k = user_config("kern");
  k.enclave_type = EnclaveType::kKernel;
  k.cores = 2;
  k.peripherals = {{"acc", true}};
  auto e = launch(*sim, k);
  ASSERT_OK(e);
  int detached = 0;
  for (int c = 0; c < 4; ++c) {
    const Core& core = sim->machine().core(c);
    if (core.detached) {
      ++detached;
      EXPECT_EQ(core.eid_reg, *e);
      EXPECT_EQ(core.delegation, TrapDelegation::KernelEnclave());
    }
  }
  EXPECT_EQ(detached, 2);
  const PeripheralDescriptor& p = sim->bus().peripherals()[acc];
  EXPECT_EQ(p.internal_memory[0], 0);
  EXPECT_EQ(p.exclusive_owner, *e);
  EXPECT_EQ(p.dma_allowed, sim->layout_of(L("kern"))->region);
  ASSERT_OK(sim->teardown(0, L("kern")));
  for (int c = 0; c < 4; ++c) {
    EXPECT_FALSE(sim->machine().core(c).detached);
    EXPECT_TRUE(sim->machine().core(c).eid_reg.is_os());
  }
  EXPECT_FALSE(sim->bus().peripherals()[acc].exclusive_owner.has_value());
  EXPECT_FALSE(sim->bus().peripherals()[acc].dma_allowed.has_value());
}

TEST(KernelEnclaveTest, NotEnoughCores) {
  MachineSpec spec = testing::fake_spec();
  spec.cores = 2;
  auto sim = make_sim(spec);
  EnclaveConfig k = user_config("kern");
  k.enclave_type = EnclaveType::kKernel;
  k.cores = 2;
  EXPECT_CODE(launch(*sim, k), ErrorCode::kResourceUnavailable);
  EXPECT_FALSE(sim->machine().core(1).detached);
  EXPECT_EQ(sim->sm().state().eid_pool.size(), 13u);
}

TEST(CachePartitionTest, StrictConfigAllocatesAndReleases) {
  auto sim = make_sim();
  EnclaveConfig c = user_config("cp");
  c.cache_mode = CacheRequest::kStrict;
  c.cache_ways = 3;
  auto e = launch(*sim, c);
  ASSERT_OK(e);
  EXPECT_EQ(sim->cache().mode_entry(*e).mode, CacheMode::kStrict);
  EXPECT_EQ(sim->cache().mode_entry(*e).allocated_ways.size(), 3u);
  ASSERT_OK(sim->sm().allocate_ways(0, *e, 1));
  EXPECT_EQ(sim->cache().mode_entry(*e).allocated_ways.size(), 4u);
  ASSERT_OK(sim->teardown(0, L("cp")));
  for (std::uint32_t w = 0; w < 16; ++w) EXPECT_FALSE(sim->cache().way_entry(w).excl);
  EXPECT_CODE(sim->sm().allocate_ways(0, *e, 1), ErrorCode::kNotLive);
}

TEST(SmStateTest, SealRestoreRollbackTamper) {
  auto sim = make_sim();
  ASSERT_OK(launch(*sim, user_config("p1")));
  ASSERT_OK(sim->teardown(0, L("p1")));
  auto first = sim->sm().seal_sm_state();
  ASSERT_OK(first);
  const Bytes state_before = sim->sm().state().serialize();
  ASSERT_OK(sim->reboot());
  EXPECT_EQ(sim->sm().find(L("p1")), nullptr);
  ASSERT_OK(sim->sm().restore_sm_state(*first));
  EXPECT_EQ(sim->sm().state().serialize(), state_before);

  auto second = sim->sm().seal_sm_state();
  ASSERT_OK(second);
  ASSERT_OK(sim->reboot());
  EXPECT_CODE(sim->sm().restore_sm_state(*first), ErrorCode::kRollbackDetected);
  Bytes bad = *second;
  bad[bad.size() - 3] ^= 0x10;
  EXPECT_CODE(sim->sm().restore_sm_state(bad), ErrorCode::kTamperDetected);
  ASSERT_OK(sim->sm().restore_sm_state(*second));
  ASSERT_OK(sim->setup(0, L("p1")));
}

TEST(SmStateTest, NvmCounterFilePersists) {
  auto path = std::filesystem::temp_directory_path() / "cure_nvm_test.ctr";
  std::filesystem::remove(path);
  {
    NvmCounter c(path);
    EXPECT_FALSE(c.read().has_value());
    ASSERT_OK(c.write(41));
  }
  NvmCounter again(path);
  EXPECT_EQ(again.read(), 41u);
  again.erase();
  EXPECT_FALSE(NvmCounter(path).read().has_value());
}

}  // namespace
}  // namespace cure
