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

// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are the
// constants next to each check. Exit status 1 when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cure/attacks.hpp"
#include "cure/scenario.hpp"
#include "cure/simulation.hpp"

namespace cure {
namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// First failure wins the detail line; later ones only count.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_++ == 0) first_ = what;
  }
  Outcome done(std::string summary) const {
    if (failures_ == 0) return {true, std::move(summary)};
    return {false, std::to_string(failures_) + " failures; first: " + first_};
  }
  std::uint64_t failures() const { return failures_; }

 private:
  std::uint64_t failures_ = 0;
  std::string first_;
};

MachineSpec quiet_spec(std::uint64_t seed = 1) {
  MachineSpec s;
  s.seed = seed;
  s.fake_crypto = true;
  s.record_trace = false;
  return s;
}

EnclaveConfig config(std::string_view name, std::uint64_t memory) {
  EnclaveConfig c;
  c.label = *make_label(name);
  c.memory_bytes = memory;
  return c;
}

Result<EnclaveId> launch(Simulation& sim, const EnclaveConfig& c, std::size_t binary = 3000) {
  Result<Label> l = sim.install(0, sim.make_package(c, test_binary(label_name(c.label), binary)));
  if (!l.ok()) return l.error();
  return sim.setup(0, *l);
}

std::string hex_addr(Address a) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%08llx", static_cast<unsigned long long>(a));
  return buf;
}

// 1. Isolation fuzz against a flat memory oracle.
Outcome run_fuzz(int transactions, bool arbiter) {
  MachineSpec spec = quiet_spec(101);
  spec.defenses.arbiter = arbiter;
  spec.cores = 5;
  PeripheralSpec dev;
  dev.name = "dma0";
  dev.dma_capable = true;
  spec.peripherals.push_back(dev);
  auto created = Simulation::Create(spec);
  if (!created.ok()) return {false, created.error().message};
  Simulation& sim = **created;
  Checker check;

  const std::uint64_t sizes[4] = {64 * 1024, 128 * 1024, 64 * 1024, 32 * 1024};
  std::vector<EnclaveId> eids;
  std::vector<MemRegion> regions;
  for (int i = 0; i < 4; ++i) {
    EnclaveConfig c = config("fuzz" + std::to_string(i), sizes[i]);
    if (i == 0) c.peripherals.push_back(PeripheralRequest{"dma0", true});
    Result<EnclaveId> e = launch(sim, c);
    if (!e.ok()) return {false, "setup: " + e.error().message};
    eids.push_back(*e);
    regions.push_back(sim.layout_of(c.label)->region);
    if (Status s = sim.ensure_context(i + 1, *e); !s) return {false, s.error().message};
  }
  const int dma_index = *sim.bus().find_peripheral("dma0");

  // Windows the fuzzer aims at, each snapshotted into the flat oracle.
  struct Window {
    Address base;
    std::uint64_t size;
  };
  std::vector<Window> windows = {
      {kFirmwareBase, 0x1'0000}, {kFirmwareBase + kFirmwareBytes - 0x1000, 0x1000},
      {kSmBase, 0x1'0000},       {kZeroSinkBase, kZeroSinkBytes},
      {kZeroSinkBase + kZeroSinkBytes, 0x1'0000},
      {kOsBase, 0x4'0000}};
  for (const MemRegion& r : regions) {
    windows.push_back({r.base, r.size()});
    windows.push_back({static_cast<Address>(r.end()), 0x1000});  // just past each region
  }
  std::map<Address, std::uint8_t> flat;  // sparse: only bytes that were snapshotted
  for (const Window& w : windows) {
    Bytes b = sim.sm_read(w.base, static_cast<std::uint32_t>(w.size));
    for (std::uint64_t i = 0; i < w.size; ++i) flat[w.base + i] = b[i];
  }

  const auto in = [](const MemRegion& r, Address a) { return r.contains(a); };
  const MemRegion fw = *MemRegion::Make(kFirmwareBase, kFirmwareBytes);
  const MemRegion sm_region = *MemRegion::Make(kSmBase, kSmBytes);
  const MemRegion sink = *MemRegion::Make(kZeroSinkBase, kZeroSinkBytes);
  // Independent statement of who may touch a physical address.
  const auto may = [&](EnclaveId who, bool is_dma, Address a) {
    if (is_dma) return in(regions[0], a);
    if (who.is_sm()) return true;
    for (std::size_t i = 0; i < regions.size(); ++i) {
      if (in(regions[i], a)) return who == eids[i];
    }
    if (in(fw, a)) return who.is_firmware();
    if (in(sm_region, a) || in(sink, a)) return false;
    return who.is_os() || who.is_firmware();
  };

  std::mt19937_64 rng(2024);
  std::vector<ViolationRecord> expected;
  std::size_t audit_cursor = sim.sm().audit_log().size();
  std::uint64_t redirected = 0;
  std::uint64_t allowed = 0;
  const auto reconcile = [&] {
    sim.sm().drain_violations();
    const auto& log = sim.sm().audit_log();
    check.expect(log.size() - audit_cursor == expected.size(),
                 "audit entries " + std::to_string(log.size() - audit_cursor) + " vs redirects " +
                     std::to_string(expected.size()));
    for (std::size_t i = 0; i < expected.size() && audit_cursor + i < log.size(); ++i) {
      check.expect(log[audit_cursor + i].violation == expected[i],
                   "violation record mismatch at " + hex_addr(expected[i].address));
    }
    audit_cursor = log.size();
    expected.clear();
  };

  for (int n = 0; n < transactions; ++n) {
    const Window& w = windows[rng() % windows.size()];
    const std::uint32_t size = 1u << (rng() % 7);
    const Address addr = w.base + (rng() % (w.size / size)) * size;
    const BusOp op = rng() % 2 ? BusOp::kWrite : BusOp::kRead;
    Bytes data;
    if (op == BusOp::kWrite) {
      data.resize(size);
      for (auto& b : data) b = static_cast<std::uint8_t>(rng());
    }
    // 0 OS, 1-4 enclaves, 5 firmware, 6 SM, 7 the bound DMA device.
    const int actor = static_cast<int>(rng() % 8);
    Result<BusResponse> r = MakeError(ErrorCode::kMalformed, "unset");
    EnclaveId who;
    Origin origin = Origin::Core(0);
    if (actor == 0) {
      who = EnclaveId::Os();
      r = sim.access(0, who, op, addr, size, data);
    } else if (actor <= 4) {
      who = eids[actor - 1];
      origin = Origin::Core(actor);
      r = sim.access(actor, who, op, addr, size, data);
    } else if (actor == 5) {
      who = EnclaveId::Firmware();
      BusTransaction t;
      t.eid = who;
      t.op = op;
      t.address = addr;
      t.size_bytes = size;
      t.data = data;
      t.origin = origin;
      r = sim.bus().route(t, 0);
    } else if (actor == 6) {
      who = EnclaveId::Sm();
      r = sim.access(0, who, op, addr, size, data);
    } else {
      who = eids[0];
      origin = Origin::Dma(dma_index);
      r = sim.dma("dma0", op, addr, size, data);
    }
    if (!r.ok()) {
      check.expect(false, "transaction failed: " + r.error().message);
      continue;
    }
    const bool want = may(who, actor == 7, addr);
    check.expect(r->decision.allowed() == want,
                 to_string(who) + (op == BusOp::kRead ? " read " : " write ") + hex_addr(addr) + 
                     ": decision");
    if (op == BusOp::kRead) {
      bool match = r->data.size() == size;
      for (std::uint32_t i = 0; match && i < size; ++i) {
        match = r->data[i] == (want ? flat[addr + i] : 0);
      }
      check.expect(match, to_string(who) + " read " + hex_addr(addr) + ": data");
    } else if (r->decision.allowed()) {
      for (std::uint32_t i = 0; i < size; ++i) flat[addr + i] = data[i];
    }
    if (r->decision.allowed()) {
      ++allowed;
    } else {
      ++redirected;
      check.expect(r->decision.violation.has_value(), "redirect without a violation record");
      expected.push_back(ViolationRecord{who, origin, addr, op});
    }
    if (n % 4096 == 4095) reconcile();
  }
  reconcile();
  return check.done(std::to_string(transactions) + " transactions, " + std::to_string(allowed) +
                    " allowed, " + std::to_string(redirected) + " redirected, 0 mismatches");
}

Outcome isolation_fuzz() {
  constexpr int kTransactions = 1'000'000;
  Outcome o = run_fuzz(kTransactions, true);
  // The oracle must notice an arbiter that lets everything through.
  if (o.pass && run_fuzz(10'000, false).pass) {
    return {false, "fuzz with the arbiter disabled found nothing"};
  }
  if (o.pass) o.detail += "; negative control caught";
  return o;
}

// 2. check_memory_access against an exhaustive truth table.
Outcome truth_table() {
  MemoryArbiterConfig cfg;
  const auto region = [](Address base, std::uint64_t size) { return *MemRegion::Make(base, size); };
  cfg.regions[EnclaveId::Firmware().value()] = region(0x00, 0x10);
  cfg.regions[EnclaveId::Sm().value()] = region(0x10, 0x10);
  cfg.zero_region = region(0x20, 0x10);
  cfg.regions[1] = region(0x40, 0x20);
  cfg.regions[2] = region(0x60, 0x10);
  cfg.regions[3] = region(0x80, 0x10);
  cfg.regions[5] = region(0xC0, 0x10);
  cfg.shared_windows.push_back(SharedWindow{region(0x50, 0x10), EnclaveId(3)});

  // Contexts allowed in each 16-byte slot of the 256-byte address space,
  // written out by hand. The SM (15) appears everywhere.
  const std::vector<std::set<int>> table = {
      {14, 15},    // 0x00 firmware
      {15},        // 0x10 SM
      {15},        // 0x20 zero sink
      {0, 14, 15}, // 0x30 OS
      {1, 15},     // 0x40 enclave 1
      {3, 15},     // 0x50 enclave 1's window, handed to 3
      {2, 15},     // 0x60 enclave 2
      {0, 14, 15}, // 0x70
      {3, 15},     // 0x80 enclave 3
      {0, 14, 15}, // 0x90
      {0, 14, 15}, // 0xa0
      {0, 14, 15}, // 0xb0
      {5, 15},     // 0xc0 enclave 5
      {0, 14, 15}, // 0xd0
      {0, 14, 15}, // 0xe0
      {0, 14, 15}, // 0xf0
  };
  Checker check;
  int tuples = 0;
  for (int e = 0; e < EnclaveId::kCount; ++e) {
    for (Address a = 0; a < 0x100; ++a) {
      for (BusOp op : {BusOp::kRead, BusOp::kWrite}) {
        BusTransaction t;
        t.eid = EnclaveId(static_cast<std::uint8_t>(e));
        t.op = op;
        t.address = a;
        t.size_bytes = 1;
        const AccessDecision d = check_memory_access(t, cfg);
        const bool want = table[a / 16].count(e) != 0;
        const std::string where = "eid " + std::to_string(e) + " " + hex_addr(a);
        check.expect(d.allowed() == want, where);
        if (!d.allowed()) {
          check.expect(cfg.zero_region.contains(d.effective_address), where + " sink");
          check.expect(d.violation && d.violation->offender == t.eid, where + " record");
        } else {
          check.expect(d.effective_address == a, where + " address");
        }
        ++tuples;
      }
    }
  }
  return check.done(std::to_string(tuples) + " (eid, address, op) tuples, exact");
}

// 3. Prime+probe contrast and negative controls.
Outcome prime_probe_contrast() {
  constexpr double kBasicMin = 0.99;
  constexpr double kStrictLo = 0.45;
  constexpr double kStrictHi = 0.55;
  constexpr int kTrials = 1000;
  const Scenario sc = builtin_attack_scenario(quiet_spec(7));
  Checker check;
  AttackParams p;
  p.trials = kTrials;
  p.variant = "basic";
  Result<AttackResult> basic = attack_prime_probe(sc, p);
  p.variant = "strict";
  Result<AttackResult> strict = attack_prime_probe(sc, p);
  if (!basic.ok() || !strict.ok()) return {false, "attack run failed"};
  check.expect(basic->accuracy >= kBasicMin, "basic accuracy " + std::to_string(basic->accuracy));
  check.expect(strict->accuracy >= kStrictLo && strict->accuracy <= kStrictHi,
               "strict accuracy " + std::to_string(strict->accuracy));
  std::string flips;
  for (const std::string& name : attack_names()) {
    AttackParams q;
    q.trials = 200;
    Result<AttackResult> on = run_attack(name, sc, q);
    q.negative_control = true;
    Result<AttackResult> off = run_attack(name, sc, q);
    check.expect(on.ok() && on->verdict == AttackVerdict::kContained, name + " not contained");
    check.expect(off.ok() && off->verdict == AttackVerdict::kLeaked,
                 name + " negative control did not leak");
    flips += " " + name;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "basic %.3f, strict %.3f over %d trials; verdicts flip for",
                basic->accuracy, strict->accuracy, kTrials);
  return check.done(buf + flips);
}

// 4. Way confinement under random traffic.
Outcome way_confinement() {
  constexpr int kAccesses = 100'000;
  MachineSpec spec = quiet_spec(13);
  auto created = Simulation::Create(spec);
  if (!created.ok()) return {false, created.error().message};
  Simulation& sim = **created;
  Checker check;

  std::uint64_t selections = 0;
  sim.cache().set_victim_observer([&](EnclaveId eid, std::uint32_t, std::uint32_t way) {
    ++selections;
    const WayEntry& w = sim.cache().way_entry(way);
    check.expect(!w.excl || w.owner == eid,
                 to_string(eid) + " chose way " + std::to_string(way) + " of " + to_string(w.owner));
  });

  struct Actor {
    EnclaveId eid;
    MemRegion region;
    int core;
  };
  std::vector<Actor> actors;
  const std::uint32_t ways[3] = {2, 4, 0};
  for (int i = 0; i < 3; ++i) {
    EnclaveConfig c = config("conf" + std::to_string(i), 256 * 1024);
    if (ways[i]) {
      c.cache_mode = CacheRequest::kStrict;
      c.cache_ways = ways[i];
    }
    Result<EnclaveId> e = launch(sim, c);
    if (!e.ok()) return {false, "setup: " + e.error().message};
    actors.push_back({*e, sim.layout_of(c.label)->region, i + 1});
  }
  actors.push_back({EnclaveId::Os(), *MemRegion::Make(kOsBase, 0x10'0000), 0});

  const CacheGeometry& g = sim.cache().geometry();
  const auto scan = [&] {
    for (std::uint32_t s = 0; s < g.num_sets; ++s) {
      for (std::uint32_t w = 0; w < g.num_ways; ++w) {
        const CacheLine& l = sim.cache().line(s, w);
        if (!l.valid) continue;
        const ModeEntry& m = sim.cache().mode_entry(l.line_eid);
        if (m.mode == CacheMode::kStrict) {
          check.expect(std::count(m.allocated_ways.begin(), m.allocated_ways.end(), w) == 1,
                       to_string(l.line_eid) + " line in way " + std::to_string(w));
        }
        const WayEntry& we = sim.cache().way_entry(w);
        check.expect(!we.excl || we.owner == l.line_eid,
                     to_string(l.line_eid) + " line in exclusive way " + std::to_string(w));
      }
    }
  };

  std::mt19937_64 rng(99);
  for (int n = 0; n < kAccesses; ++n) {
    const Actor& a = actors[rng() % actors.size()];
    // Mostly its own memory, sometimes someone else's.
    const Actor& target = rng() % 8 == 0 ? actors[rng() % actors.size()] : a;
    const Address addr = target.region.base + (rng() % (target.region.size() / 8)) * 8;
    const BusOp op = rng() % 3 == 0 ? BusOp::kWrite : BusOp::kRead;
    Bytes data(op == BusOp::kWrite ? 8 : 0, static_cast<std::uint8_t>(n));
    Result<BusResponse> r = sim.access(a.core, a.eid, op, addr, 8, data);
    check.expect(r.ok(), "access failed");
    if (n % 5000 == 4999) scan();
  }
  scan();
  return check.done(std::to_string(kAccesses) + " accesses, " + std::to_string(selections) +
                    " victim selections, all confined");
}

// 5. Randomized lifecycle sequences.
Outcome lifecycle_properties() {
  constexpr int kSequences = 10'000;
  constexpr int kLabels = 16;
  constexpr std::uint64_t kRegionBytes = 32 * 1024;
  Checker check;
  std::uint64_t setups = 0, teardowns = 0, caps = 0, illegal = 0, zero_scans = 0;
  std::mt19937_64 rng(5);
  std::vector<Label> labels;
  for (int i = 0; i < kLabels; ++i) labels.push_back(*make_label("lc" + std::to_string(i)));

  for (int seq = 0; seq < kSequences && check.failures() == 0; ++seq) {
    auto created = Simulation::Create(quiet_spec(static_cast<std::uint64_t>(seq)));
    if (!created.ok()) return {false, created.error().message};
    Simulation& sim = **created;
    for (const Label& l : labels) {
      EnclaveConfig c = config(label_name(l), kRegionBytes);
      if (!sim.install(0, sim.make_package(c, test_binary(label_name(l), 1000))).ok()) {
        return {false, "install failed"};
      }
    }
    std::map<Label, EnclaveId> live;
    std::map<Label, MemRegion> region;
    std::map<Label, std::uint64_t> counter;
    const int length = 10 + static_cast<int>(rng() % 40);
    for (int step = 0; step < length; ++step) {
      const Label& l = labels[rng() % kLabels];
      const std::string name = "seq " + std::to_string(seq) + " " + label_name(l) + ": ";
      const int kind = static_cast<int>(rng() % 10);
      if (kind < 6) {
        Result<EnclaveId> e = sim.setup(0, l);
        if (live.count(l)) {
          ++illegal;
          check.expect(!e.ok() && e.code() == ErrorCode::kAlreadyLive, name + "double setup");
        } else if (live.size() == 13) {
          ++caps;
          check.expect(!e.ok() && e.code() == ErrorCode::kNoFreeEid, name + "14th setup");
        } else if (e.ok()) {
          ++setups;
          check.expect(e->is_pool(), name + "eid outside the pool");
          for (const auto& [other, id] : live) check.expect(id != *e, name + "eid reused");
          live[l] = *e;
          region[l] = sim.layout_of(l)->region;
          const EnclaveMeta* m = sim.sm().find(l);
          check.expect(m->runtime->state_at_setup.counter == counter[l], name + "stale state");
        } else {
          check.expect(false, name + "setup failed: " + e.error().message);
        }
      } else if (kind < 9) {
        Status s = sim.teardown(0, l);
        if (!live.count(l)) {
          ++illegal;
          check.expect(!s.ok() && s.code() == ErrorCode::kNotLive, name + "teardown of non-live");
        } else {
          ++teardowns;
          check.expect(s.ok(), name + "teardown failed");
          live.erase(l);
          ++counter[l];
          check.expect(sim.sm().find(l)->rollback_counter == counter[l], name + "counter");
          const MemRegion& r = region[l];
          Bytes b = sim.sm_read(r.base, static_cast<std::uint32_t>(r.size()));
          ++zero_scans;
          check.expect(std::all_of(b.begin(), b.end(), [](std::uint8_t x) { return x == 0; }),
                       name + "region not zeroed");
        }
      } else if (!live.empty()) {
        // A live enclave dirties its heap so zeroing has something to erase.
        auto it = live.begin();
        std::advance(it, static_cast<long>(rng() % live.size()));
        const EnclaveLayout& layout = *sim.layout_of(it->first);
        Bytes data(64, 0xA5);
        Result<BusResponse> w = sim.access(1, it->second, BusOp::kWrite,
                                           layout.heap_base + (rng() % 16) * 64, 64, data);
        check.expect(w.ok() && w->decision.allowed(), name + "own heap write");
      }
      // Pool conservation after every event.
      const auto& pool = sim.sm().state().eid_pool;
      std::set<std::uint8_t> free(pool.begin(), pool.end());
      check.expect(free.size() == pool.size(), name + "duplicate pool entry");
      check.expect(pool.size() + sim.sm().live_count() == 13, name + "pool + live != 13");
      check.expect(sim.sm().live_count() == live.size(), name + "live count");
      for (const auto& [other, id] : live) {
        check.expect(free.count(id.value()) == 0, name + "live eid in the pool");
      }
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "%d sequences: %llu setups, %llu teardowns (%llu zero scans), %llu cap hits, "
                "%llu illegal calls refused",
                kSequences, static_cast<unsigned long long>(setups),
                static_cast<unsigned long long>(teardowns),
                static_cast<unsigned long long>(zero_scans), static_cast<unsigned long long>(caps),
                static_cast<unsigned long long>(illegal));
  if (caps == 0) return {false, "the 13-enclave cap was never reached"};
  return check.done(buf);
}

// 6. Rollback and attestation, with the real signature and AEAD suites.
Outcome rollback_and_attestation() {
  constexpr int kRounds = 8;
  MachineSpec spec;
  spec.record_trace = false;
  auto created = Simulation::Create(spec);
  if (!created.ok()) return {false, created.error().message};
  Simulation& sim = **created;
  Checker check;
  const Label rb = *make_label("rb");

  if (!launch(sim, config("rb", 64 * 1024)).ok()) return {false, "setup failed"};
  std::vector<Bytes> blobs;
  for (int i = 0; i < kRounds; ++i) {
    check.expect(sim.teardown(0, rb).ok(), "teardown");
    blobs.push_back(*sim.sm().load_sealed_state(rb));
    if (i + 1 < kRounds) check.expect(sim.setup(0, rb).ok(), "setup");
  }
  for (int i = 0; i + 1 < kRounds; ++i) {
    (void)sim.sm().store_sealed_state(rb, blobs[i]);
    Result<EnclaveId> e = sim.setup(0, rb);
    check.expect(!e.ok() && e.code() == ErrorCode::kRollbackDetected,
                 "enclave blob " + std::to_string(i) + " replayed");
  }
  (void)sim.sm().store_sealed_state(rb, blobs.back());
  check.expect(sim.setup(0, rb).ok(), "current blob refused");
  check.expect(sim.teardown(0, rb).ok(), "teardown");

  std::vector<Bytes> sm_blobs;
  for (int i = 0; i < kRounds; ++i) sm_blobs.push_back(*sim.sm().seal_sm_state());
  for (int i = 0; i + 1 < kRounds; ++i) {
    check.expect(sim.reboot().ok(), "reboot");
    Status s = sim.sm().restore_sm_state(sm_blobs[i]);
    check.expect(!s.ok() && s.code() == ErrorCode::kRollbackDetected,
                 "SM blob " + std::to_string(i) + " replayed");
  }
  check.expect(sim.reboot().ok() && sim.sm().restore_sm_state(sm_blobs.back()).ok(),
               "current SM blob refused");

  // Attestation: only the unmodified binary and config verify.
  const auto& s = sim.crypto().signatures;
  const EnclaveConfig cfg = config("att", 64 * 1024);
  const Bytes bin = test_binary("att", 64);
  const Bytes genuine = sim.make_package(cfg, bin);
  const Signature expected = parse_package(genuine)->sig;
  const Label att = cfg.label;
  check.expect(sim.install(0, genuine).ok(), "install");
  std::uint8_t nonce_seed = 0;
  const auto attest_with = [&](const Bytes& package) -> std::optional<bool> {
    if (!sim.update(0, package).ok()) return std::nullopt;
    Result<EnclaveId> e = sim.setup(0, att);
    if (!e.ok()) return std::nullopt;
    std::array<std::uint8_t, 32> nonce{};
    nonce.fill(++nonce_seed);
    Result<AttestationReport> rep = sim.sm().attest(0, *e, nonce);
    std::optional<bool> ok;
    if (rep.ok()) {
      ok = provider_verify_report(s, *rep, sim.ecosystem().vendor_root, expected, nonce);
      std::array<std::uint8_t, 32> stale = nonce;
      stale[0] ^= 1;
      check.expect(!provider_verify_report(s, *rep, sim.ecosystem().vendor_root, expected, stale),
                   "report accepted under another nonce");
    }
    (void)sim.teardown(0, att);
    return ok;
  };
  check.expect(attest_with(genuine) == std::optional<bool>(true), "genuine report rejected");
  int rejected = 0;
  for (std::size_t i = 0; i < bin.size(); ++i) {
    Bytes b = bin;
    b[i] ^= static_cast<std::uint8_t>(1 + i % 255);
    const bool ok = attest_with(sim.make_package(cfg, b)) == std::optional<bool>(false);
    check.expect(ok, "flip of byte " + std::to_string(i) + " accepted");
    rejected += ok;
  }
  EnclaveConfig bigger = cfg;
  bigger.memory_bytes *= 2;
  check.expect(attest_with(sim.make_package(bigger, bin)) == std::optional<bool>(false),
               "config change accepted");
  return check.done(std::to_string(kRounds - 1) + " enclave and " + std::to_string(kRounds - 1) +
                    " SM replays refused; genuine accepted, " + std::to_string(rejected) +
                    "/64 flips rejected");
}

// 7. Context-switch flush cost under the default model.
Outcome context_switch_cost() {
  constexpr Cycles kTlbBtb = 28;
  constexpr Cycles kL1 = 3141;
  MachineSpec spec;
  spec.fake_crypto = true;
  auto created = Simulation::Create(spec);
  if (!created.ok()) return {false, created.error().message};
  Simulation& sim = **created;
  Result<EnclaveId> e = launch(sim, config("cs", 64 * 1024));
  if (!e.ok()) return {false, e.error().message};
  Checker check;
  std::string summary;
  for (EnclaveId to : {*e, EnclaveId::Os()}) {
    const std::size_t first = sim.trace().records().size();
    const Cycles t0 = sim.trace().cycles();
    check.expect(sim.ensure_context(1, to).ok(), "switch failed");
    Cycles flush = 0;
    for (std::size_t i = first; i < sim.trace().records().size(); ++i) {
      const TraceRecord& r = sim.trace().records()[i];
      if (std::string_view(r.kind) == "flush") flush += r.cost;
    }
    const Cycles total = sim.trace().cycles() - t0;
    check.expect(flush == kTlbBtb + kL1, "flush cycles " + std::to_string(flush));
    check.expect(total == kTlbBtb + kL1, "switch cycles " + std::to_string(total));
    summary += (summary.empty() ? "" : ", ") + std::string(to.is_os() ? "to OS " : "to enclave ") +
               std::to_string(flush);
  }
  return check.done(summary + " cycles (28 + 3141)");
}

// 8. Partitioning overhead trend.
Outcome overhead_trend() {
  const std::vector<std::uint32_t> ways = {1, 2, 4, 8, 16};
  Result<std::vector<OverheadPoint>> pts = partition_overhead(quiet_spec(), ways);
  if (!pts.ok()) return {false, pts.error().message};
  Checker check;
  check.expect(pts->front().cycles > pts->back().cycles, "1 way is not slower than 16");
  std::string summary;
  for (std::size_t i = 0; i < pts->size(); ++i) {
    if (i > 0) {
      check.expect((*pts)[i].overhead <= (*pts)[i - 1].overhead,
                   "overhead rises at " + std::to_string((*pts)[i].ways) + " ways");
    }
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s%u:%.3f", i ? " " : "", (*pts)[i].ways, (*pts)[i].overhead);
    summary += buf;
  }
  return check.done("overhead by ways " + summary);
}

// 9. Determinism of every shipped scenario.
Outcome determinism() {
  const auto dir = std::filesystem::path(CURE_SOURCE_DIR) / "scenarios";
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Checker check;
  for (const auto& f : files) {
    Result<Scenario> sc = load_scenario(f);
    if (!sc.ok()) {
      check.expect(false, f.filename().string() + ": " + sc.error().message);
      continue;
    }
    Result<RunResult> a = run_scenario(*sc);
    Result<RunResult> b = run_scenario(*sc);
    check.expect(a.ok() && b.ok(), f.filename().string() + " failed to run");
    if (a.ok() && b.ok()) {
      check.expect(a->trace_tsv == b->trace_tsv && a->digest == b->digest,
                   f.filename().string() + " traces differ");
    }
  }
  return check.done(std::to_string(files.size()) + " scenarios, byte-identical traces");
}

}  // namespace
}  // namespace cure

int main() {
  using namespace cure;
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"isolation fuzz", isolation_fuzz},
      {"arbiter truth table", truth_table},
      {"prime+probe contrast", prime_probe_contrast},
      {"way confinement", way_confinement},
      {"lifecycle properties", lifecycle_properties},
      {"rollback and attestation", rollback_and_attestation},
      {"context switch cost", context_switch_cost},
      {"partitioning overhead trend", overhead_trend},
      {"determinism", determinism},
  };
  int failed = 0;
  int n = 0;
  for (const Criterion& c : criteria) {
    ++n;
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome o = c.run();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", n, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
