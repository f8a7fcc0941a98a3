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

#include "cure/attacks.hpp"

#include <algorithm>
#include <charconv>

namespace cure {
namespace {

constexpr int kOsCore = 0;
constexpr int kVictimCore = 1;
constexpr int kAttackerCore = 2;

bool all_zero(const Bytes& b) {
  return std::all_of(b.begin(), b.end(), [](std::uint8_t x) { return x == 0; });
}

Result<std::unique_ptr<ScenarioRunner>> start(const Scenario& scenario) {
  Result<std::unique_ptr<ScenarioRunner>> r = ScenarioRunner::Create(scenario);
  if (!r.ok()) return r.error();
  Status s = (*r)->run_events();
  if (!s) return s.error();
  return r;
}

const Bytes* package_for(const Scenario& sc, std::string_view name) {
  for (const auto& [key, bytes] : sc.packages) {
    Result<EnclavePackage> p = parse_package(bytes);
    if (!p.ok()) continue;
    Result<EnclaveConfig> c = parse_config(p->config_bytes);
    if (c.ok() && label_name(c->label) == name) return &bytes;
  }
  return nullptr;
}

Status ensure_installed(ScenarioRunner& r, std::string_view name) {
  Result<Label> label = make_label(name);
  if (!label.ok()) return label.error();
  if (r.sim().sm().find(*label)) return {};
  const Bytes* pkg = package_for(r.scenario(), name);
  if (!pkg) {
    return MakeError(ErrorCode::kUnknownLabel, "scenario has no package for " + std::string(name));
  }
  Result<Label> installed = r.sim().install(kOsCore, *pkg);
  if (!installed.ok()) return installed.error();
  return {};
}

Result<EnclaveId> ensure_live(ScenarioRunner& r, std::string_view name,
                              std::optional<PageTable> pt = std::nullopt) {
  Result<Label> label = make_label(name);
  if (!label.ok()) return label.error();
  if (std::optional<EnclaveId> eid = r.sim().eid_of(*label)) return *eid;
  Status s = ensure_installed(r, name);
  if (!s) return s.error();
  return r.sim().setup(kOsCore, *label, std::move(pt));
}

// The victim writes a nonzero secret over the first lines of its heap.
Status plant_secret(Simulation& sim, EnclaveId victim, const EnclaveLayout& layout) {
  const std::uint32_t line = sim.cache().geometry().line_bytes;
  if (layout.heap_end - layout.heap_base < 4 * line) {
    return MakeError(ErrorCode::kResourceUnavailable, "victim heap too small for the secret");
  }
  for (std::uint32_t l = 0; l < 4; ++l) {
    Bytes secret(line);
    for (std::uint32_t i = 0; i < line; ++i) secret[i] = static_cast<std::uint8_t>(0xA5 ^ (l * line + i)) | 1;
    Result<BusResponse> w =
        sim.access(kVictimCore, victim, BusOp::kWrite, layout.heap_base + l * line, line, secret);
    if (!w.ok()) return w.error();
  }
  return sim.ensure_context(kVictimCore, EnclaveId::Os());
}

struct Sweep {
  std::uint64_t probes = 0;
  std::uint64_t leaks = 0;
};

std::string describe(const char* what, const Sweep& s) {
  return std::string(what) + ": " + std::to_string(s.leaks) + "/" + std::to_string(s.probes) +
         " probes leaked";
}

AttackResult finish(std::uint64_t probes, std::uint64_t leaks, std::string detail) {
  AttackResult res;
  res.probes = probes;
  res.leaks = leaks;
  res.verdict = leaks ? AttackVerdict::kLeaked : AttackVerdict::kContained;
  res.detail = std::move(detail);
  return res;
}

std::string hex(Address a) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", a);
  return buf;
}

}  // namespace

const char* to_string(AttackVerdict v) {
  return v == AttackVerdict::kContained ? "contained" : "leaked";
}

Status AttackParams::apply(const std::map<std::string, std::string>& fields) {
  for (const auto& [key, value] : fields) {
    auto as_int = [&](int& out) -> Status {
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
      if (ec != std::errc() || p != value.data() + value.size() || out < 0) {
        return MakeError(ErrorCode::kScenarioError, "attack." + key + ": not a count");
      }
      return {};
    };
    if (key == "victim") {
      victim = value;
    } else if (key == "attacker") {
      attacker = value;
    } else if (key == "device") {
      device = value;
    } else if (key == "variant") {
      if (value != "strict" && value != "basic" && value != "idle") {
        return MakeError(ErrorCode::kScenarioError, "attack.variant: strict, basic or idle");
      }
      variant = value;
    } else if (key == "trials") {
      if (Status s = as_int(trials); !s) return s;
    } else if (key == "training_trials") {
      if (Status s = as_int(training_trials); !s) return s;
    } else if (key == "victim_ways") {
      int w = 0;
      if (Status s = as_int(w); !s) return s;
      victim_ways = static_cast<std::uint32_t>(w);
    } else {
      return MakeError(ErrorCode::kScenarioError, "attack." + key + ": unknown field");
    }
  }
  return {};
}

Result<AttackResult> attack_os_probe(const Scenario& scenario, const AttackParams& params) {
  Scenario sc = scenario;
  sc.spec.defenses.arbiter = sc.spec.defenses.arbiter && !params.negative_control;
  Result<std::unique_ptr<ScenarioRunner>> runner = start(sc);
  if (!runner.ok()) return runner.error();
  Simulation& sim = (*runner)->sim();
  Result<EnclaveId> victim = ensure_live(**runner, params.victim);
  if (!victim.ok()) return victim.error();
  const EnclaveLayout layout = *sim.layout_of(*make_label(params.victim));
  if (Status s = plant_secret(sim, *victim, layout); !s) return s.error();
  const std::uint32_t line = sim.cache().geometry().line_bytes;

  // Window data the OS is handed is OS-visible by construction.
  Bytes window(line, 0x5A);
  Result<BusResponse> w =
      sim.access(kVictimCore, *victim, BusOp::kWrite, layout.shared.base, line, window);
  if (!w.ok()) return w.error();
  if (Status s = sim.ensure_context(kVictimCore, EnclaveId::Os()); !s) return s.error();
  if (Status s = sim.sm().shared_memory_handoff(kOsCore, *victim, *victim, EnclaveId::Os()); !s) {
    return s.error();
  }

  Sweep sweep;
  for (std::uint64_t a = layout.region.base; a < layout.region.end(); a += line) {
    if (layout.shared.contains(static_cast<Address>(a))) continue;
    const std::uint64_t before = sim.bus().total_violations();
    Result<BusResponse> r =
        sim.access(kOsCore, EnclaveId::Os(), BusOp::kRead, static_cast<Address>(a), line);
    if (!r.ok()) return r.error();
    ++sweep.probes;
    const bool flagged = !r->decision.allowed() && sim.bus().total_violations() == before + 1;
    if (!all_zero(r->data) || !flagged) ++sweep.leaks;
  }
  sim.sm().drain_violations();
  return finish(sweep.probes, sweep.leaks, describe("os sweep", sweep));
}

Result<AttackResult> attack_dma(const Scenario& scenario, const AttackParams& params) {
  Scenario sc = scenario;
  sc.spec.defenses.dma_filter = sc.spec.defenses.dma_filter && !params.negative_control;
  Result<std::unique_ptr<ScenarioRunner>> runner = start(sc);
  if (!runner.ok()) return runner.error();
  Simulation& sim = (*runner)->sim();
  if (!sim.bus().find_peripheral(params.device)) {
    return MakeError(ErrorCode::kScenarioError, "no peripheral " + params.device);
  }
  Result<EnclaveId> victim = ensure_live(**runner, params.victim);
  if (!victim.ok()) return victim.error();
  const EnclaveLayout layout = *sim.layout_of(*make_label(params.victim));
  if (Status s = plant_secret(sim, *victim, layout); !s) return s.error();
  const std::uint32_t line = sim.cache().geometry().line_bytes;
  const Bytes secret = sim.sm_read(layout.heap_base, line);

  auto sweep = [&](Sweep& out) -> Status {
    for (std::uint64_t a = layout.region.base; a < layout.region.end(); a += line) {
      Result<BusResponse> r = sim.dma(params.device, BusOp::kRead, static_cast<Address>(a), line);
      if (!r.ok()) return r.error();
      ++out.probes;
      if (r->decision.allowed() || !all_zero(r->data)) ++out.leaks;
    }
    // A write into the victim must vanish.
    Bytes junk(line, 0xFF);
    Result<BusResponse> r = sim.dma(params.device, BusOp::kWrite, layout.heap_base, line, junk);
    if (!r.ok()) return r.error();
    ++out.probes;
    if (r->decision.allowed() || sim.sm_read(layout.heap_base, line) != secret) ++out.leaks;
    return {};
  };

  Sweep unbound;
  if (const PeripheralDescriptor& p =
          sim.bus().peripherals()[*sim.bus().find_peripheral(params.device)];
      !p.exclusive_owner) {
    if (Status s = sweep(unbound); !s) return s.error();
  }
  Result<EnclaveId> attacker = ensure_live(**runner, params.attacker);
  if (!attacker.ok()) return attacker.error();
  const PeripheralDescriptor& p = sim.bus().peripherals()[*sim.bus().find_peripheral(params.device)];
  if (p.exclusive_owner != *attacker) {
    return MakeError(ErrorCode::kScenarioError,
                     params.attacker + " does not own " + params.device + " after setup");
  }
  Sweep bound;
  if (Status s = sweep(bound); !s) return s.error();
  sim.sm().drain_violations();
  return finish(unbound.probes + bound.probes, unbound.leaks + bound.leaks,
                describe("unbound device", unbound) + "; " + describe("bound to attacker", bound));
}

Result<AttackResult> attack_prime_probe(const Scenario& scenario, const AttackParams& params) {
  Scenario sc = scenario;
  sc.spec.record_trace = false;
  const std::string variant = params.negative_control ? "basic" : params.variant;
  Result<std::unique_ptr<ScenarioRunner>> runner = start(sc);
  if (!runner.ok()) return runner.error();
  Simulation& sim = (*runner)->sim();
  Result<EnclaveId> victim = ensure_live(**runner, params.victim);
  if (!victim.ok()) return victim.error();
  const EnclaveLayout layout = *sim.layout_of(*make_label(params.victim));
  if (variant == "strict" && sim.cache().mode_entry(*victim).mode != CacheMode::kStrict) {
    if (Status s = sim.sm().allocate_ways(kOsCore, *victim, params.victim_ways); !s) return s.error();
    if (Status s = sim.sm().set_cache_mode(kOsCore, *victim, CacheMode::kStrict); !s) {
      return s.error();
    }
  }
  if (variant != "strict" && sim.cache().mode_entry(*victim).mode == CacheMode::kStrict) {
    if (Status s = sim.sm().set_cache_mode(kOsCore, *victim, CacheMode::kBasic); !s) {
      return s.error();
    }
  }
  if (Status s = sim.ensure_context(kVictimCore, *victim); !s) return s.error();

  const CacheGeometry& g = sim.cache().geometry();
  const std::uint32_t sets[2] = {5 % g.num_sets, (5 + g.num_sets / 2) % g.num_sets};
  const std::uint32_t page = g.num_sets * g.line_bytes;  // same-set stride
  // The OS primes every way it may fill.
  std::uint32_t os_ways = 0;
  for (std::uint32_t w = 0; w < g.num_ways; ++w) os_ways += sim.cache().way_entry(w).excl ? 0 : 1;
  const std::uint32_t victim_lines =
      std::min<std::uint64_t>(8, layout.region.size() / page);

  auto os_read = [&](Address a) -> Result<bool> {
    Result<BusResponse> r = sim.access(kOsCore, EnclaveId::Os(), BusOp::kRead, a, 8);
    if (!r.ok()) return r.error();
    return r->cache && r->cache->hit;
  };
  auto trial = [&](int bit) -> Result<std::vector<std::uint8_t>> {
    for (int pass = 0; pass < 64; ++pass) {
      bool all_hit = true;
      for (std::uint32_t s : sets) {
        for (std::uint32_t j = 0; j < os_ways; ++j) {
          Result<bool> h = os_read(kOsBase + s * g.line_bytes + j * page);
          if (!h.ok()) return h.error();
          all_hit = all_hit && *h;
        }
      }
      if (all_hit) break;
    }
    if (variant != "idle") {
      for (std::uint32_t j = 0; j < victim_lines; ++j) {
        Result<BusResponse> r = sim.access(kVictimCore, *victim, BusOp::kRead,
                                           layout.region.base + sets[bit] * g.line_bytes + j * page, 8);
        if (!r.ok()) return r.error();
      }
    }
    std::vector<std::uint8_t> v;
    for (std::uint32_t s : sets) {
      for (std::uint32_t j = 0; j < os_ways; ++j) {
        Result<bool> h = os_read(kOsBase + s * g.line_bytes + j * page);
        if (!h.ok()) return h.error();
        v.push_back(*h ? 0 : 1);
      }
    }
    return v;
  };

  // Nearest-centroid distinguisher over the miss vectors.
  const std::size_t dims = 2 * os_ways;
  std::vector<double> centroid[2] = {std::vector<double>(dims, 0.0), std::vector<double>(dims, 0.0)};
  int counts[2] = {0, 0};
  for (int i = 0; i < params.training_trials; ++i) {
    const int bit = i & 1;
    Result<std::vector<std::uint8_t>> v = trial(bit);
    if (!v.ok()) return v.error();
    for (std::size_t d = 0; d < dims; ++d) centroid[bit][d] += (*v)[d];
    ++counts[bit];
  }
  for (int b = 0; b < 2; ++b) {
    for (double& x : centroid[b]) x /= std::max(1, counts[b]);
  }
  Xorshift64Star rng(sc.spec.seed ^ 0x7072696D65ULL);
  int correct = 0;
  for (int i = 0; i < params.trials; ++i) {
    const int bit = static_cast<int>(rng.next() & 1);
    Result<std::vector<std::uint8_t>> v = trial(bit);
    if (!v.ok()) return v.error();
    double dist[2] = {0.0, 0.0};
    for (int b = 0; b < 2; ++b) {
      for (std::size_t d = 0; d < dims; ++d) {
        const double diff = (*v)[d] - centroid[b][d];
        dist[b] += diff * diff;
      }
    }
    int guess = 0;
    if (dist[1] < dist[0]) {
      guess = 1;
    } else if (dist[1] == dist[0]) {
      guess = static_cast<int>(rng.next() & 1);
    }
    correct += guess == bit ? 1 : 0;
  }
  AttackResult res;
  res.probes = static_cast<std::uint64_t>(params.trials);
  res.leaks = static_cast<std::uint64_t>(correct);
  res.accuracy = params.trials ? static_cast<double>(correct) / params.trials : 0.0;
  // Better than chance by more than the sampling margin counts as a leak.
  res.verdict = res.accuracy > 0.55 ? AttackVerdict::kLeaked : AttackVerdict::kContained;
  char buf[128];
  std::snprintf(buf, sizeof buf, "variant %s, %u attacker ways, accuracy %.4f over %d trials",
                variant.c_str(), os_ways, res.accuracy, params.trials);
  res.detail = buf;
  return res;
}

Result<AttackResult> attack_pt_escape(const Scenario& scenario, const AttackParams& params) {
  Scenario sc = scenario;
  if (params.negative_control) {
    sc.spec.defenses.page_table_verification = false;
    sc.spec.defenses.arbiter = false;
  }
  Result<std::unique_ptr<ScenarioRunner>> runner = start(sc);
  if (!runner.ok()) return runner.error();
  Simulation& sim = (*runner)->sim();
  Result<EnclaveId> victim = ensure_live(**runner, params.victim);
  if (!victim.ok()) return victim.error();
  const EnclaveLayout victim_layout = *sim.layout_of(*make_label(params.victim));
  if (Status s = plant_secret(sim, *victim, victim_layout); !s) return s.error();
  const std::uint32_t line = sim.cache().geometry().line_bytes;
  const std::uint32_t secret_page = victim_layout.heap_base >> 12;

  std::uint64_t probes = 0;
  std::uint64_t leaks = 0;
  std::string detail;
  Result<Label> attacker_label = make_label(params.attacker);
  if (!attacker_label.ok()) return attacker_label.error();
  if (sim.eid_of(*attacker_label)) {
    return MakeError(ErrorCode::kScenarioError, params.attacker + " must not be live yet");
  }
  if (Status s = ensure_installed(**runner, params.attacker); !s) return s.error();

  // Phase 1: the OS hands the SM a table mapping the victim's secret page.
  Result<EnclaveLayout> planned = sim.plan_layout(*attacker_label);
  if (!planned.ok()) return planned.error();
  PageTable evil = default_page_table(*planned);
  evil.entries.push_back(PageTableEntry{kEnclaveHeapVirtual >> 12, secret_page, 0x3});
  Result<EnclaveId> attacker = sim.setup(kOsCore, *attacker_label, evil);
  ++probes;
  if (attacker.ok()) {
    Result<BusResponse> r = sim.access(kAttackerCore, *attacker, BusOp::kRead,
                                       kEnclaveHeapVirtual, line, {}, true);
    if (!r.ok()) return r.error();
    if (!all_zero(r->data) || r->decision.allowed()) ++leaks;
    detail = "malicious table accepted";
  } else if (attacker.code() == ErrorCode::kBadPageTables) {
    detail = "malicious table rejected";
    attacker = sim.setup(kOsCore, *attacker_label);
    if (!attacker.ok()) return attacker.error();
  } else {
    return attacker.error();
  }

  // Phase 2: the enclave rewrites the leaf PTE of its own state page.
  const EnclaveMeta* meta = sim.sm().find_live(*attacker);
  if (!meta->runtime->page_table) {
    return MakeError(ErrorCode::kScenarioError, params.attacker + " has no page table");
  }
  const PageTableImage& image = *meta->runtime->page_table;
  const std::uint32_t vpn = kEnclaveStateVirtual >> 12;
  auto second = image.second_level().find(vpn >> 10);
  if (second == image.second_level().end()) {
    return MakeError(ErrorCode::kScenarioError, "state page is not mapped");
  }
  const Address pte_addr = second->second + (vpn & 0x3FF) * 4;
  const std::uint32_t pte = encode_leaf_pte(secret_page, 0x3);
  Bytes pte_bytes = {static_cast<std::uint8_t>(pte), static_cast<std::uint8_t>(pte >> 8),
                     static_cast<std::uint8_t>(pte >> 16), static_cast<std::uint8_t>(pte >> 24)};
  Result<BusResponse> w =
      sim.access(kAttackerCore, *attacker, BusOp::kWrite, pte_addr, 4, pte_bytes);
  if (!w.ok()) return w.error();
  Result<BusResponse> r = sim.access(kAttackerCore, *attacker, BusOp::kRead,
                                     kEnclaveStateVirtual, line, {}, true);
  ++probes;
  if (!r.ok()) {
    detail += "; rewritten mapping faulted (" + r.error().message + ")";
  } else {
    const bool leaked = !all_zero(r->data) || r->decision.allowed();
    leaks += leaked ? 1 : 0;
    detail += leaked ? "; rewritten mapping read victim data"
                     : "; rewritten mapping redirected to " + hex(r->decision.effective_address);
  }
  if (Status s = sim.ensure_context(kAttackerCore, EnclaveId::Os()); !s) return s.error();
  sim.sm().drain_violations();
  return finish(probes, leaks, detail);
}

Result<AttackResult> attack_rollback(const Scenario& scenario, const AttackParams& params) {
  Result<std::unique_ptr<ScenarioRunner>> runner = start(scenario);
  if (!runner.ok()) return runner.error();
  Simulation& sim = (*runner)->sim();
  Result<Label> label = make_label(params.victim);
  if (!label.ok()) return label.error();
  if (sim.eid_of(*label)) {
    if (Status s = sim.teardown(kOsCore, *label); !s) return s.error();
  }
  if (Status s = ensure_installed(**runner, params.victim); !s) return s.error();

  std::vector<Bytes> blobs;
  for (int i = 0; i < 3; ++i) {
    Result<EnclaveId> eid = sim.setup(kOsCore, *label);
    if (!eid.ok()) return eid.error();
    if (Status s = sim.teardown(kOsCore, *label); !s) return s.error();
    Result<Bytes> b = sim.sm().load_sealed_state(*label);
    if (!b.ok()) return b.error();
    blobs.push_back(std::move(*b));
  }
  std::uint64_t probes = 0;
  std::uint64_t leaks = 0;
  std::string detail;
  // Every earlier blob must be refused.
  for (std::size_t i = 0; i + 1 < blobs.size(); ++i) {
    if (Status s = sim.sm().store_sealed_state(*label, blobs[i]); !s) return s.error();
    Result<EnclaveId> eid = sim.setup(kOsCore, *label);
    ++probes;
    if (eid.ok()) {
      ++leaks;
      if (Status s = sim.teardown(kOsCore, *label); !s) return s.error();
    } else if (eid.code() != ErrorCode::kRollbackDetected) {
      return eid.error();
    }
  }
  // The current blob is not a rollback.
  if (Status s = sim.sm().store_sealed_state(*label, blobs.back()); !s) return s.error();
  Result<EnclaveId> current = sim.setup(kOsCore, *label);
  if (!current.ok()) return current.error();
  if (Status s = sim.teardown(kOsCore, *label); !s) return s.error();
  detail = std::to_string(blobs.size() - 1) + " stale enclave blobs replayed";

  // SM state: reboot with a stale sealed copy.
  Result<Bytes> stale = sim.sm().seal_sm_state();
  if (!stale.ok()) return stale.error();
  if (Result<EnclaveId> e = sim.setup(kOsCore, *label); !e.ok()) return e.error();
  if (Status s = sim.teardown(kOsCore, *label); !s) return s.error();
  Result<Bytes> fresh = sim.sm().seal_sm_state();
  if (!fresh.ok()) return fresh.error();
  if (Status s = sim.reboot(); !s) return s.error();
  if (params.negative_control || !sim.spec().defenses.nvm_counter) sim.nvm().erase();
  Status restored = sim.sm().restore_sm_state(*stale);
  ++probes;
  if (restored) {
    ++leaks;
    detail += "; stale SM state accepted";
  } else if (restored.code() == ErrorCode::kRollbackDetected) {
    detail += "; stale SM state refused";
    if (Status s = sim.sm().restore_sm_state(*fresh); !s) return s.error();
  } else {
    return restored.error();
  }
  return finish(probes, leaks, detail);
}

const std::vector<std::string>& attack_names() {
  static const auto* names =
      new std::vector<std::string>{"os_probe", "dma", "prime_probe", "pt_escape", "rollback"};
  return *names;
}

Result<AttackResult> run_attack(std::string_view name, const Scenario& scenario,
                                const AttackParams& params) {
  if (name == "os_probe") return attack_os_probe(scenario, params);
  if (name == "dma") return attack_dma(scenario, params);
  if (name == "prime_probe") return attack_prime_probe(scenario, params);
  if (name == "pt_escape") return attack_pt_escape(scenario, params);
  if (name == "rollback") return attack_rollback(scenario, params);
  return MakeError(ErrorCode::kScenarioError, "unknown attack '" + std::string(name) + "'");
}

Bytes test_binary(std::string_view name, std::size_t n) {
  Bytes out;
  Digest block = sha256(ByteSpan(reinterpret_cast<const std::uint8_t*>(name.data()), name.size()));
  while (out.size() < n) {
    out.insert(out.end(), block.begin(), block.end());
    block = sha256(block);
  }
  out.resize(n);
  return out;
}

Bytes build_test_package(const MachineSpec& spec, const EnclaveConfig& config, ByteSpan binary) {
  const CryptoSuite& crypto = spec.fake_crypto ? CryptoSuite::Fake() : CryptoSuite::Real();
  const Ecosystem eco = Ecosystem::FromSeed(crypto.signatures, spec.ecosystem_seed);
  return build_package(crypto.signatures, config, binary, eco.provider_sk, eco.provider_cert)
      .serialize();
}

Scenario builtin_attack_scenario(const MachineSpec& spec) {
  Scenario sc;
  sc.spec = spec;
  if (std::none_of(sc.spec.peripherals.begin(), sc.spec.peripherals.end(),
                   [](const PeripheralSpec& p) { return p.name == "dma0"; })) {
    PeripheralSpec dev;
    dev.name = "dma0";
    dev.dma_capable = true;
    sc.spec.peripherals.push_back(dev);
  }
  EnclaveConfig victim;
  victim.label = *make_label("victim");
  victim.memory_bytes = 64 * 1024;
  sc.packages["victim"] = build_test_package(sc.spec, victim, test_binary("victim", 6000));
  EnclaveConfig attacker;
  attacker.label = *make_label("attacker");
  attacker.memory_bytes = 64 * 1024;
  attacker.peripherals.push_back(PeripheralRequest{"dma0", true});
  sc.packages["attacker"] = build_test_package(sc.spec, attacker, test_binary("attacker", 3000));
  return sc;
}

Result<std::vector<OverheadPoint>> partition_overhead(const MachineSpec& spec,
                                                      const std::vector<std::uint32_t>& ways,
                                                      std::uint32_t lines_per_set, int rounds) {
  std::vector<OverheadPoint> points;
  for (std::uint32_t w : ways) {
    MachineSpec s = spec;
    s.record_trace = false;
    s.max_ways_per_enclave = s.geometry.num_ways;
    const CacheGeometry& g = s.geometry;
    const std::uint32_t page = g.num_sets * g.line_bytes;
    EnclaveConfig cfg;
    cfg.label = *make_label("workload");
    cfg.memory_bytes = round_up_pow2(std::max<std::uint64_t>(64 * 1024,
                                                             std::uint64_t{lines_per_set} * page));
    cfg.cache_mode = CacheRequest::kStrict;
    cfg.cache_ways = w;
    Result<std::unique_ptr<Simulation>> sim = Simulation::Create(s);
    if (!sim.ok()) return sim.error();
    Simulation& m = **sim;
    Result<Label> label = m.install(kOsCore, m.make_package(cfg, test_binary("workload", 4096)));
    if (!label.ok()) return label.error();
    Result<EnclaveId> eid = m.setup(kOsCore, *label);
    if (!eid.ok()) return eid.error();
    if (Status st = m.ensure_context(kVictimCore, *eid); !st) return st.error();
    const Address base = m.layout_of(*label)->region.base;
    const Cycles c0 = m.trace().cycles();
    const CacheStats s0 = m.cache().stats(*eid);
    for (int r = 0; r < rounds; ++r) {
      for (std::uint32_t j = 0; j < lines_per_set; ++j) {
        for (std::uint32_t set = 0; set < g.num_sets; ++set) {
          Result<BusResponse> resp = m.access(kVictimCore, *eid, BusOp::kRead,
                                              base + j * page + set * g.line_bytes, 8);
          if (!resp.ok()) return resp.error();
        }
      }
    }
    OverheadPoint p;
    p.ways = w;
    p.cycles = m.trace().cycles() - c0;
    p.hits = m.cache().stats(*eid).hits - s0.hits;
    p.misses = m.cache().stats(*eid).misses - s0.misses;
    points.push_back(p);
  }
  if (!points.empty()) {
    const double ref = static_cast<double>(points.back().cycles);
    for (OverheadPoint& p : points) p.overhead = (static_cast<double>(p.cycles) - ref) / ref;
  }
  return points;
}

}  // namespace cure
