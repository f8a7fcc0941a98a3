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

#include "cure/simulation.hpp"

#include <algorithm>

#include "json.hpp"

namespace cure {

SmIdentity identity_from(const Ecosystem& ecosystem) {
  SmIdentity id;
  id.device_sk = ecosystem.device_sk;
  id.device_cert = ecosystem.device_cert;
  id.provider_root = ecosystem.store_root;
  return id;
}

Simulation::Simulation(const MachineSpec& spec)
    : spec_(spec),
      crypto_(spec.fake_crypto ? CryptoSuite::Fake() : CryptoSuite::Real()),
      ecosystem_(Ecosystem::FromSeed(crypto_.signatures, spec.ecosystem_seed)) {}

Result<std::unique_ptr<Simulation>> Simulation::Create(const MachineSpec& spec) {
  Status g = spec.geometry.validate();
  if (!g) return g.error();
  if (spec.cores < 1 || spec.cores > 64) {
    return MakeError(ErrorCode::kMalformed, "core count must be in [1, 64]");
  }
  if (spec.max_ways_per_enclave < 1 || spec.max_ways_per_enclave > spec.geometry.num_ways) {
    return MakeError(ErrorCode::kMalformed, "max_ways_per_enclave must be in [1, ways]");
  }
  std::unique_ptr<Simulation> sim(new Simulation(spec));
  Status s = sim->init();
  if (!s) return s.error();
  return sim;
}

Status Simulation::init() {
  trace_.set_recording(spec_.record_trace);
  cache_ = std::make_unique<PartitionedCache>(spec_.geometry, memory_, spec_.seed,
                                              spec_.max_ways_per_enclave);
  BusConfig bc;
  bc.main_memory = *MemRegion::Make(kMainMemoryBase, kMainMemoryBytes);
  bc.zero_region = *MemRegion::Make(kZeroSinkBase, kZeroSinkBytes);
  bus_ = std::make_unique<Bus>(bc, memory_, *cache_, trace_, spec_.costs);
  machine_ = std::make_unique<Machine>(spec_.cores, *bus_, trace_, spec_.costs);
  nvm_ = spec_.nvm_path ? std::make_unique<NvmCounter>(*spec_.nvm_path)
                        : std::make_unique<NvmCounter>();

  for (std::size_t i = 0; i < spec_.peripherals.size(); ++i) {
    const PeripheralSpec& ps = spec_.peripherals[i];
    PeripheralDescriptor d;
    d.name = ps.name;
    d.mmio = *MemRegion::Make(kMmioBase + static_cast<Address>(i) * kMmioStride, kMmioStride);
    d.perm_bitmap = ps.perm_bitmap;
    d.dma_capable = ps.dma_capable;
    d.dma_allowed = ps.dma_allowed;
    Result<int> r = bus_->add_peripheral(EnclaveId::Sm(), std::move(d));
    if (!r.ok()) return r.error();
  }
  if (!spec_.defenses.arbiter) (void)bus_->set_arbiter_enforcing(EnclaveId::Sm(), false);
  if (!spec_.defenses.dma_filter) (void)bus_->set_dma_filter_enabled(EnclaveId::Sm(), false);
  return reboot();
}

Status Simulation::reboot() {
  if (sm_ && sm_->live_count() != 0) {
    return MakeError(ErrorCode::kAlreadyLive, "reboot with live enclaves");
  }
  SmOptions options;
  options.policy = spec_.policy;
  options.verify_page_tables = spec_.defenses.page_table_verification;
  sm_ = std::make_unique<SecurityMonitor>(*machine_, *bus_, *cache_, memory_, trace_, crypto_,
                                          identity_from(ecosystem_), *nvm_, options);
  return sm_->boot(*MemRegion::Make(kSmBase, kSmBytes),
                   *MemRegion::Make(kFirmwareBase, kFirmwareBytes));
}

Bytes Simulation::make_package(const EnclaveConfig& config, ByteSpan binary) const {
  return build_package(crypto_.signatures, config, binary, ecosystem_.provider_sk,
                       ecosystem_.provider_cert)
      .serialize();
}

Result<Label> Simulation::install(int core, ByteSpan package) {
  Result<Label> r = sm_->install(core, package);
  if (r.ok()) packages_[*r] = Bytes(package.begin(), package.end());
  return r;
}

Status Simulation::update(int core, ByteSpan package) {
  Status s = sm_->update(core, package);
  if (s) {
    Result<EnclavePackage> p = parse_package(package);
    Result<EnclaveConfig> c = parse_config(p->config_bytes);
    packages_[c->label] = Bytes(package.begin(), package.end());
  }
  return s;
}

std::optional<EnclaveConfig> Simulation::installed_config(const Label& label) const {
  auto it = packages_.find(label);
  if (it == packages_.end()) return std::nullopt;
  Result<EnclavePackage> p = parse_package(it->second);
  if (!p.ok()) return std::nullopt;
  Result<EnclaveConfig> c = parse_config(p->config_bytes);
  if (!c.ok()) return std::nullopt;
  return *c;
}

Result<Address> Simulation::allocate_region(std::uint64_t size) {
  const std::uint64_t end = std::uint64_t{kMainMemoryBase} + kMainMemoryBytes;
  for (std::uint64_t base = kEnclavePoolBase; base + size <= end; base += size) {
    MemRegion candidate = *MemRegion::Make(static_cast<Address>(base), size);
    bool taken = std::any_of(allocations_.begin(), allocations_.end(),
                             [&](const auto& kv) { return kv.second.overlaps(candidate); });
    if (!taken) return static_cast<Address>(base);
  }
  return MakeError(ErrorCode::kResourceUnavailable, "no free memory for the enclave");
}

Result<EnclaveId> Simulation::setup(int core, const Label& label,
                                    std::optional<PageTable> page_table,
                                    std::optional<EnclaveConfig> config) {
  auto pkg_it = packages_.find(label);
  if (pkg_it == packages_.end()) {
    // The SM reports the unknown label itself.
    SetupRequest req;
    req.label = label;
    req.region_base = kEnclavePoolBase;
    return sm_->setup(core, req);
  }
  Result<EnclavePackage> pkg = parse_package(pkg_it->second);
  if (!pkg.ok()) return pkg.error();
  if (!config) {
    Result<EnclaveConfig> c = parse_config(pkg->config_bytes);
    if (!c.ok()) return c.error();
    config = *c;
  }
  const std::uint64_t size = round_up_pow2(std::max<std::uint64_t>(config->memory_bytes, 1));
  if (size > kMainMemoryBytes) {
    return MakeError(ErrorCode::kResourceUnavailable, "enclave larger than main memory");
  }
  Result<Address> base = allocate_region(size);
  if (!base.ok()) return base.error();

  // The OS loader: write the binary at the start of the region.
  cache_->flush_range(*base, size, true);
  memory_.zero(*base, size);
  memory_.write(*base, pkg->binary);

  SetupRequest req;
  req.label = label;
  req.region_base = *base;
  req.config = *config;
  req.page_table = std::move(page_table);
  Result<EnclaveId> r = sm_->setup(core, req);
  if (r.ok()) allocations_[label] = *MemRegion::Make(*base, size);
  return r;
}

Result<EnclaveLayout> Simulation::plan_layout(const Label& label,
                                              std::optional<EnclaveConfig> config) {
  auto pkg_it = packages_.find(label);
  if (pkg_it == packages_.end()) return MakeError(ErrorCode::kUnknownLabel, label_name(label));
  Result<EnclavePackage> pkg = parse_package(pkg_it->second);
  if (!pkg.ok()) return pkg.error();
  if (!config) {
    Result<EnclaveConfig> c = parse_config(pkg->config_bytes);
    if (!c.ok()) return c.error();
    config = *c;
  }
  const std::uint64_t size = round_up_pow2(std::max<std::uint64_t>(config->memory_bytes, 1));
  Result<Address> base = allocate_region(size);
  if (!base.ok()) return base.error();
  return EnclaveLayout::Make(*MemRegion::Make(*base, size), pkg->binary.size());
}

Status Simulation::teardown(int core, const Label& label) {
  std::optional<EnclaveId> eid = eid_of(label);
  if (!eid) {
    return sm_->teardown(core, EnclaveId(0));
  }
  Status s = sm_->teardown(core, *eid);
  if (s) allocations_.erase(label);
  return s;
}

std::optional<EnclaveId> Simulation::eid_of(const Label& label) const {
  const EnclaveMeta* m = sm_->find(label);
  if (!m || !m->runtime) return std::nullopt;
  return m->runtime->eid;
}

const EnclaveLayout* Simulation::layout_of(const Label& label) const {
  const EnclaveMeta* m = sm_->find(label);
  if (!m || !m->runtime) return nullptr;
  return &m->runtime->layout;
}

Status Simulation::ensure_context(int core, EnclaveId eid) {
  if (core < 0 || core >= machine_->num_cores()) {
    return MakeError(ErrorCode::kMalformed, "no core " + std::to_string(core));
  }
  Core& c = machine_->core(core);
  if (c.eid_reg == eid) return {};
  if (c.detached) {
    return MakeError(ErrorCode::kResourceUnavailable,
                     "core " + std::to_string(core) + " is reserved for " + to_string(c.eid_reg));
  }
  if (eid.is_sm()) {
    return MakeError(ErrorCode::kMalformed, "the SM is entered through SM calls only");
  }
  if (!c.eid_reg.is_os()) {
    Status s = sm_->context_switch(core, SwitchDirection::kToOs);
    if (!s) return s;
  }
  if (eid.is_os()) return {};
  return sm_->context_switch(core, SwitchDirection::kToEnclave, eid);
}

Result<BusResponse> Simulation::access(int core, EnclaveId actor, BusOp op, Address address,
                                       std::uint32_t size, ByteSpan data, bool is_virtual) {
  if (actor.is_sm()) {
    BusTransaction txn;
    txn.eid = actor;
    txn.op = op;
    txn.address = address;
    txn.size_bytes = size;
    txn.data.assign(data.begin(), data.end());
    txn.origin = Origin::Core(core);
    return bus_->route(txn, core);
  }
  Status s = ensure_context(core, actor);
  if (!s) return s.error();
  std::optional<std::uint32_t> vpn;
  Address physical = address;
  if (is_virtual) {
    Result<Translation> t = machine_->ptw_translate(core, address);
    if (!t.ok()) {
      trace_.append(core, actor, "ptw", "fault", 0, t.error().message);
      return t.error();
    }
    physical = t->physical;
    vpn = address >> 12;
  }
  return machine_->core_access(core, op, physical, size, data, vpn);
}

Result<BusResponse> Simulation::dma(std::string_view device, BusOp op, Address address,
                                    std::uint32_t size, ByteSpan data) {
  std::optional<int> idx = bus_->find_peripheral(device);
  if (!idx) return MakeError(ErrorCode::kMalformed, "no peripheral " + std::string(device));
  const PeripheralDescriptor& p = bus_->peripherals()[*idx];
  BusTransaction txn;
  // A bound device carries its owner's id; an unbound one the OS id.
  txn.eid = p.exclusive_owner.value_or(EnclaveId::Os());
  txn.op = op;
  txn.address = address;
  txn.size_bytes = size;
  txn.data.assign(data.begin(), data.end());
  txn.origin = Origin::Dma(*idx);
  return bus_->route(txn);
}

Bytes Simulation::sm_read(Address address, std::uint32_t size) {
  Bytes out(size);
  const std::uint32_t line = cache_->geometry().line_bytes;
  for (std::uint32_t off = 0; off < size; off += line) {
    const std::uint32_t n = std::min(line, size - off);
    BusTransaction txn;
    txn.eid = EnclaveId::Sm();
    txn.op = BusOp::kRead;
    txn.address = address + off;
    txn.size_bytes = n;
    Result<BusResponse> r = bus_->route(txn);
    if (r.ok()) std::copy(r->data.begin(), r->data.end(), out.begin() + off);
  }
  return out;
}

void Simulation::checkpoint(std::string name) {
  trace_.append(-1, EnclaveId::Os(), "checkpoint", "ok", 0, name);
  CheckpointStats cp;
  cp.name = std::move(name);
  cp.cycles = trace_.cycles();
  cp.steps = trace_.steps();
  for (int e = 0; e < EnclaveId::kCount; ++e) {
    cp.cache[e] = cache_->stats(EnclaveId(static_cast<std::uint8_t>(e)));
  }
  checkpoints_.push_back(std::move(cp));
}

Digest Simulation::digest() const {
  Bytes buf;
  const std::string tsv = trace_.to_tsv();
  buf.insert(buf.end(), tsv.begin(), tsv.end());
  for (const auto& [page, data] : memory_.pages()) {
    if (std::all_of(data->begin(), data->end(), [](std::uint8_t b) { return b == 0; })) continue;
    put_u32(buf, page);
    put_bytes(buf, *data);
  }
  return sha256(buf);
}

namespace {

nlohmann::json cache_json(const CacheStats& s) {
  return {{"hits", s.hits}, {"misses", s.misses}, {"evictions", s.evictions},
          {"writebacks", s.writebacks}};
}

}  // namespace

std::string Simulation::stats_json() const {
  nlohmann::json j;
  j["cycles"] = trace_.cycles();
  j["steps"] = trace_.steps();
  j["seed"] = spec_.seed;
  j["digest"] = to_hex(digest());
  Cycles flush = 0;
  std::uint64_t bus_txns = 0;
  for (const TraceRecord& r : trace_.records()) {
    if (std::string_view(r.kind) == "flush") flush += r.cost;
    if (std::string_view(r.kind) == "bus") ++bus_txns;
  }
  j["flush_cycles"] = flush;
  j["bus_transactions"] = bus_txns;
  j["violations"] = bus_->total_violations();
  j["gate_violations"] = machine_->gate_violations();
  j["audit_log_entries"] = sm_->audit_log().size();
  nlohmann::json per = nlohmann::json::object();
  for (int e = 0; e < EnclaveId::kCount; ++e) {
    const EnclaveId id(static_cast<std::uint8_t>(e));
    const CacheStats& cs = cache_->stats(id);
    const std::uint64_t v = bus_->violations_by(id);
    if (cs.hits + cs.misses + cs.evictions + cs.writebacks + v == 0) continue;
    nlohmann::json entry = cache_json(cs);
    entry["violations"] = v;
    per[to_string(id)] = entry;
  }
  j["per_eid"] = per;
  nlohmann::json cps = nlohmann::json::array();
  for (const CheckpointStats& cp : checkpoints_) {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    for (const CacheStats& cs : cp.cache) {
      hits += cs.hits;
      misses += cs.misses;
    }
    cps.push_back({{"name", cp.name}, {"cycles", cp.cycles}, {"steps", cp.steps},
                   {"hits", hits}, {"misses", misses}});
  }
  j["checkpoints"] = cps;
  return j.dump(2);
}

}  // namespace cure
