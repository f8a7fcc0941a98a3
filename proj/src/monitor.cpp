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

#include "cure/monitor.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cure {

namespace {

constexpr std::array<std::uint8_t, 4> kSmStateMagic = {'S', 'M', 'S', '1'};
constexpr std::string_view kSmStateDomain = "cure-sm-state";
// Read/write bits of the 13 pool ids in a peripheral bitmap.
constexpr std::uint32_t kPoolPermMask = 0x0FFFFFFC;

std::string hex32(Address a) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", static_cast<unsigned>(a));
  return buf;
}

ByteSpan as_bytes(std::string_view s) {
  return ByteSpan(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

Error resource_error(const Error& e) {
  return MakeError(ErrorCode::kResourceUnavailable,
                   std::string(to_string(e.code)) + ": " + e.message);
}

}  // namespace

// ---------------------------------------------------------------------------
// EnclaveState

Bytes EnclaveState::serialize() const {
  Bytes out;
  out.reserve(kBytes);
  put_bytes(out, comm_key);
  put_u64(out, counter);
  const std::size_t n = std::min(custom_keys.size(), kMaxCustomKeys);
  put_u8(out, static_cast<std::uint8_t>(n));
  for (std::size_t i = 0; i < n; ++i) put_bytes(out, custom_keys[i]);
  out.resize(kBytes, 0);
  return out;
}

Result<EnclaveState> EnclaveState::Parse(ByteSpan bytes) {
  if (bytes.size() != kBytes) return MakeError(ErrorCode::kMalformed, "state is not 64 bytes");
  ByteReader r(bytes);
  EnclaveState s;
  std::uint8_t n = 0;
  if (!r.array(s.comm_key) || !r.u64(s.counter) || !r.u8(n)) {
    return MakeError(ErrorCode::kMalformed, "state header");
  }
  if (n > kMaxCustomKeys) return MakeError(ErrorCode::kMalformed, "too many custom keys");
  for (std::uint8_t i = 0; i < n; ++i) {
    CustomKey k{};
    if (!r.array(k)) return MakeError(ErrorCode::kMalformed, "custom key");
    s.custom_keys.push_back(k);
  }
  Bytes rest;
  if (!r.bytes(r.remaining(), rest) ||
      std::any_of(rest.begin(), rest.end(), [](std::uint8_t b) { return b != 0; })) {
    return MakeError(ErrorCode::kMalformed, "nonzero padding");
  }
  return s;
}

// ---------------------------------------------------------------------------
// EnclaveLayout

const char* to_string(LayoutArea a) {
  switch (a) {
    case LayoutArea::kCode: return "code";
    case LayoutArea::kPageTables: return "page-tables";
    case LayoutArea::kState: return "state";
    case LayoutArea::kHeap: return "heap";
    case LayoutArea::kShared: return "shared";
    case LayoutArea::kOutside: return "outside";
  }
  return "?";
}

Result<EnclaveLayout> EnclaveLayout::Make(const MemRegion& region, std::uint64_t image_bytes) {
  EnclaveLayout l;
  l.region = region;
  const std::uint64_t code_pages =
      std::max<std::uint64_t>(1, (image_bytes + kPageBytes - 1) / kPageBytes);
  // code + tables + state + shared, heap may be empty
  const std::uint64_t needed = (code_pages + kPageTablePages + 2) * kPageBytes;
  if (region.size() < needed) {
    return MakeError(ErrorCode::kResourceUnavailable,
                     "region of " + std::to_string(region.size()) + " bytes cannot hold " +
                         std::to_string(needed) + " bytes of layout");
  }
  l.code_base = region.base;
  l.code_pages = static_cast<std::uint32_t>(code_pages);
  l.page_table_base = l.code_base + l.code_pages * kPageBytes;
  l.state_base = l.page_table_base + kPageTablePages * kPageBytes;
  l.heap_base = l.state_base + kPageBytes;
  l.heap_end = static_cast<Address>(region.end() - kPageBytes);
  l.shared = *MemRegion::Make(l.heap_end, kPageBytes);
  return l;
}

LayoutArea EnclaveLayout::area_of(Address a) const {
  if (!region.contains(a)) return LayoutArea::kOutside;
  if (a < page_table_base) return LayoutArea::kCode;
  if (a < state_base) return LayoutArea::kPageTables;
  if (a < heap_base) return LayoutArea::kState;
  if (a < heap_end) return LayoutArea::kHeap;
  return LayoutArea::kShared;
}

std::vector<Address> EnclaveLayout::spare_table_pages() const {
  std::vector<Address> pages;
  for (std::uint32_t i = 0; i < kPageTablePages; ++i) {
    pages.push_back(page_table_base + i * kPageBytes);
  }
  return pages;
}

PageTable default_page_table(const EnclaveLayout& layout) {
  PageTable pt;
  pt.root = layout.page_table_base;
  for (std::uint32_t i = 0; i < layout.code_pages; ++i) {
    pt.entries.push_back(PageTableEntry{(kEnclaveCodeVirtual >> 12) + i,
                                        (layout.code_base >> 12) + i, 0x7});
  }
  pt.entries.push_back(PageTableEntry{kEnclaveStateVirtual >> 12, layout.state_base >> 12, 0x3});
  pt.entries.push_back(PageTableEntry{kEnclaveSharedVirtual >> 12, layout.shared.base >> 12, 0x3});
  return pt;
}

// ---------------------------------------------------------------------------
// NvmCounter

std::optional<std::uint64_t> NvmCounter::read() const {
  if (!path_) return value_;
  std::ifstream in(*path_);
  std::uint64_t v = 0;
  if (!(in >> v)) return std::nullopt;
  return v;
}

Status NvmCounter::write(std::uint64_t value) {
  if (!path_) {
    value_ = value;
    return {};
  }
  std::ofstream out(*path_, std::ios::trunc);
  out << value << "\n";
  if (!out) return MakeError(ErrorCode::kIoError, "cannot write " + path_->string());
  return {};
}

void NvmCounter::erase() {
  if (!path_) {
    value_.reset();
    return;
  }
  std::error_code ec;
  std::filesystem::remove(*path_, ec);
}

// ---------------------------------------------------------------------------
// SmState

Bytes SmState::serialize() const {
  Bytes out;
  put_bytes(out, kSmStateMagic);
  put_bytes(out, device_sk);
  put_bytes(out, device_pk);
  put_bytes(out, device_cert.serialize());
  put_bytes(out, provider_root);
  put_u64(out, key_counter);
  put_u32(out, static_cast<std::uint32_t>(enclaves.size()));
  for (const auto& [label, m] : enclaves) {
    put_bytes(out, m.label);
    put_bytes(out, m.sig);
    put_bytes(out, m.provider_cert.serialize());
    put_u32(out, m.format_version);
    put_u32(out, static_cast<std::uint32_t>(m.config_bytes.size()));
    put_bytes(out, m.config_bytes);
    put_u64(out, m.binary_bytes);
    put_bytes(out, m.sealing_key);
    Bytes blob = m.sealed_state.serialize();
    put_u32(out, static_cast<std::uint32_t>(blob.size()));
    put_bytes(out, blob);
    put_u64(out, m.rollback_counter);
    put_u32(out, m.max_version_set_up);
  }
  return out;
}

Result<SmState> SmState::Parse(ByteSpan bytes) {
  ByteReader r(bytes);
  std::array<std::uint8_t, 4> magic{};
  SmState s;
  std::array<std::uint8_t, Certificate::kBytes> cert{};
  std::uint32_t n = 0;
  if (!r.array(magic) || magic != kSmStateMagic) {
    return MakeError(ErrorCode::kMalformed, "SM state magic");
  }
  if (!r.array(s.device_sk) || !r.array(s.device_pk) || !r.array(cert) ||
      !r.array(s.provider_root) || !r.u64(s.key_counter) || !r.u32(n)) {
    return MakeError(ErrorCode::kTruncated, "SM state header");
  }
  s.device_cert = *Certificate::Parse(cert);
  for (std::uint32_t i = 0; i < n; ++i) {
    EnclaveMeta m;
    std::uint32_t cfg_len = 0;
    std::uint32_t blob_len = 0;
    Bytes blob;
    if (!r.array(m.label) || !r.array(m.sig) || !r.array(cert) || !r.u32(m.format_version) ||
        !r.u32(cfg_len) || !r.bytes(cfg_len, m.config_bytes) || !r.u64(m.binary_bytes) ||
        !r.array(m.sealing_key) || !r.u32(blob_len) || !r.bytes(blob_len, blob) ||
        !r.u64(m.rollback_counter) || !r.u32(m.max_version_set_up)) {
      return MakeError(ErrorCode::kTruncated, "enclave record " + std::to_string(i));
    }
    m.provider_cert = *Certificate::Parse(cert);
    Result<SealedBlob> sealed = SealedBlob::Parse(blob);
    if (!sealed.ok()) return sealed.error();
    m.sealed_state = std::move(*sealed);
    if (s.enclaves.count(m.label) != 0) {
      return MakeError(ErrorCode::kMalformed, "duplicate enclave record");
    }
    Label label = m.label;
    s.enclaves.emplace(label, std::move(m));
  }
  if (r.remaining() != 0) return MakeError(ErrorCode::kMalformed, "trailing bytes");
  return s;
}

// ---------------------------------------------------------------------------
// SM call bracket

// Enters the SM on construction unless the core already runs it, and leaves
// to return_to on destruction. A trap has already performed the entry when
// `trapped` is set.
class SecurityMonitor::Call {
 public:
  Call(SecurityMonitor& sm, int core, bool trapped = false) : sm_(sm), core_(core) {
    Core& c = sm.machine_.core(core);
    if (trapped) {
      return_to_ = c.saved_eid;
      sm.drain_violations();
    } else if (c.eid_reg.is_sm()) {
      owns_ = false;
    } else {
      return_to_ = c.eid_reg;
      sm.enter(core);
    }
  }
  ~Call() {
    if (owns_) sm_.exit_to(core_, return_to_);
  }
  Call(const Call&) = delete;
  Call& operator=(const Call&) = delete;

  EnclaveId return_to() const { return return_to_; }
  void set_return(EnclaveId eid) { return_to_ = eid; }
  bool owns() const { return owns_; }

 private:
  SecurityMonitor& sm_;
  int core_;
  bool owns_ = true;
  EnclaveId return_to_;
};

SecurityMonitor::SecurityMonitor(Machine& machine, Bus& bus, PartitionedCache& cache,
                                 PhysicalMemory& memory, Trace& trace,
                                 const CryptoSuite& crypto, const SmIdentity& identity,
                                 NvmCounter& nvm, SmOptions options)
    : machine_(machine),
      bus_(bus),
      cache_(cache),
      memory_(memory),
      trace_(trace),
      crypto_(crypto),
      nvm_(nvm),
      options_(options) {
  state_.device_sk = identity.device_sk;
  state_.device_pk = crypto.signatures.public_key(identity.device_sk);
  state_.device_cert = identity.device_cert;
  state_.provider_root = identity.provider_root;
  for (std::uint8_t e = EnclaveId::kFirstPool; e <= EnclaveId::kLastPool; ++e) {
    state_.eid_pool.insert(e);
  }
}

Status SecurityMonitor::boot(const MemRegion& sm_region, const MemRegion& firmware_region) {
  Status s = bus_.program_region(EnclaveId::Sm(), EnclaveId::Sm(), sm_region);
  if (!s) return s;
  s = bus_.program_region(EnclaveId::Sm(), EnclaveId::Firmware(), firmware_region);
  if (!s) return s;
  for (int i = 0; i < machine_.num_cores(); ++i) machine_.core(i).mtvec_reg = sm_region.base;
  return {};
}

void SecurityMonitor::enter(int core) {
  machine_.ecall_to_sm(core);
  drain_violations();
}

void SecurityMonitor::exit_to(int core, EnclaveId eid) {
  Core& c = machine_.core(core);
  machine_.flush_tlb_btb(core);
  c.delegation = TrapDelegation::Os();
  c.satp.reset();
  if (const EnclaveMeta* m = find_live(eid)) {
    const EnclaveRuntime& rt = *m->runtime;
    if (rt.type == EnclaveType::kKernel) {
      c.delegation = TrapDelegation::KernelEnclave();
    } else {
      c.delegation = TrapDelegation::UserEnclave();
      if (rt.page_table) c.satp = rt.page_table->root();
    }
  }
  (void)machine_.write_gated_register(core, GatedRegister::kEid, eid.value());
  std::vector<TrapClass> pending = machine_.leave_sm(core);
  for (TrapClass t : pending) deliver_trap(core, t);
}

void SecurityMonitor::record(int core, const char* op, const Status& s, std::string note) {
  std::string text = op;
  if (!note.empty()) text += " " + note;
  if (!s.ok()) text += " (" + s.error().message + ")";
  trace_.append(core, EnclaveId::Sm(), "sm", s.ok() ? "ok" : to_string(s.code()).data(), 0,
                std::move(text));
}

Status SecurityMonitor::sm_write(int core, Address address, ByteSpan data) {
  BusTransaction txn;
  txn.eid = EnclaveId::Sm();
  txn.op = BusOp::kWrite;
  txn.address = address;
  txn.size_bytes = static_cast<std::uint32_t>(data.size());
  txn.data.assign(data.begin(), data.end());
  txn.origin = Origin::Core(core);
  Result<BusResponse> r = bus_.route(txn, core);
  if (!r.ok()) return r.error();
  return {};
}

AeadKey SecurityMonitor::derive_key(std::string_view purpose) {
  Bytes msg;
  put_bytes(msg, as_bytes("cure-sm-key"));
  put_bytes(msg, state_.device_sk);
  put_u64(msg, state_.key_counter++);
  put_bytes(msg, as_bytes(purpose));
  return sha256(msg);
}

AeadKey SecurityMonitor::sm_sealing_key() const {
  Bytes msg;
  put_bytes(msg, as_bytes("cure-sm-seal"));
  put_bytes(msg, state_.device_sk);
  return sha256(msg);
}

EnclaveMeta* SecurityMonitor::find_mut(const Label& label) {
  auto it = state_.enclaves.find(label);
  return it == state_.enclaves.end() ? nullptr : &it->second;
}

const EnclaveMeta* SecurityMonitor::find(const Label& label) const {
  auto it = state_.enclaves.find(label);
  return it == state_.enclaves.end() ? nullptr : &it->second;
}

EnclaveMeta* SecurityMonitor::find_live_mut(EnclaveId eid) {
  if (!eid.is_pool()) return nullptr;
  for (auto& [label, m] : state_.enclaves) {
    if (m.runtime && m.runtime->eid == eid) return &m;
  }
  return nullptr;
}

const EnclaveMeta* SecurityMonitor::find_live(EnclaveId eid) const {
  return const_cast<SecurityMonitor*>(this)->find_live_mut(eid);
}

std::optional<Label> SecurityMonitor::label_of(EnclaveId eid) const {
  const EnclaveMeta* m = find_live(eid);
  if (!m) return std::nullopt;
  return m->label;
}

std::size_t SecurityMonitor::live_count() const {
  return static_cast<std::size_t>(
      std::count_if(state_.enclaves.begin(), state_.enclaves.end(),
                    [](const auto& kv) { return kv.second.live(); }));
}

// ---------------------------------------------------------------------------
// Installation

Result<Label> SecurityMonitor::install(int core, ByteSpan package_bytes) {
  Call call(*this, core);
  Result<VerifiedPackage> v =
      verify_package(crypto_.signatures, package_bytes, state_.provider_root);
  if (!v.ok()) {
    record(core, "install", v.error(), "");
    return v.error();
  }
  const Label label = v->config.label;
  if (find(label)) {
    Error e = MakeError(ErrorCode::kDuplicateLabel, "label already installed");
    record(core, "install", e, label_name(label));
    return e;
  }
  EnclaveMeta m;
  m.label = label;
  m.sig = v->package.sig;
  m.provider_cert = v->package.cert;
  m.format_version = v->package.format_version;
  m.config_bytes = v->package.config_bytes;
  m.binary_bytes = v->package.binary.size();
  m.sealing_key = derive_key("K_encl");
  EnclaveState initial;
  initial.comm_key = derive_key("K_com");
  initial.counter = 0;
  m.sealed_state = seal(crypto_.aead, m.sealing_key, initial.serialize(), 0, label);
  m.rollback_counter = 0;
  state_.enclaves.emplace(label, std::move(m));
  record(core, "install", {}, label_name(label));
  return label;
}

Status SecurityMonitor::update(int core, ByteSpan package_bytes) {
  Call call(*this, core);
  Result<VerifiedPackage> v =
      verify_package(crypto_.signatures, package_bytes, state_.provider_root);
  Status s;
  std::string note;
  if (!v.ok()) {
    s = v.error();
  } else {
    note = label_name(v->config.label) + " v" + std::to_string(v->config.version);
    EnclaveMeta* m = find_mut(v->config.label);
    if (!m) {
      s = MakeError(ErrorCode::kUnknownLabel, "label not installed");
    } else if (m->live()) {
      s = MakeError(ErrorCode::kAlreadyLive, "cannot update a live enclave");
    } else {
      m->sig = v->package.sig;
      m->provider_cert = v->package.cert;
      m->format_version = v->package.format_version;
      m->config_bytes = v->package.config_bytes;
      m->binary_bytes = v->package.binary.size();
    }
  }
  record(core, "update", s, note);
  return s;
}

// ---------------------------------------------------------------------------
// Page tables

Result<PageTableImage> SecurityMonitor::verify_page_tables(const EnclaveMeta& meta,
                                                           const EnclaveRuntime& rt,
                                                           const PageTable& pt) const {
  (void)meta;
  const EnclaveLayout& l = rt.layout;
  if (pt.root % kPageBytes != 0 || l.area_of(pt.root) != LayoutArea::kPageTables) {
    return MakeError(ErrorCode::kBadPageTables,
                     "root " + hex32(pt.root) + " is not a page-table page of the enclave");
  }
  std::vector<Address> spare = l.spare_table_pages();
  std::erase(spare, pt.root);
  PageTableImage image(pt.root, std::move(spare));
  std::set<std::uint32_t> code_mapped;
  bool state_mapped = false;
  for (std::size_t i = 0; i < pt.entries.size(); ++i) {
    const PageTableEntry& e = pt.entries[i];
    const std::string which = "entry " + std::to_string(i);
    if ((e.perms & 0x7) == 0) {
      return MakeError(ErrorCode::kBadPageTables, which + " has no permissions");
    }
    const Address target = e.physical_page << 12;
    if (e.physical_page >= (1u << 20)) {
      return MakeError(ErrorCode::kBadPageTables, which + " maps beyond 32-bit space");
    }
    switch (l.area_of(target)) {
      case LayoutArea::kOutside:
        return MakeError(ErrorCode::kBadPageTables,
                         which + " maps " + hex32(target) + " outside the enclave region");
      case LayoutArea::kPageTables:
        return MakeError(ErrorCode::kBadPageTables, which + " aliases the page tables");
      case LayoutArea::kState:
        if (state_mapped) {
          return MakeError(ErrorCode::kBadPageTables, which + " aliases the state area");
        }
        state_mapped = true;
        break;
      case LayoutArea::kCode:
        code_mapped.insert(e.physical_page);
        break;
      case LayoutArea::kHeap:
      case LayoutArea::kShared:
        break;
    }
    Result<std::vector<PteWrite>> w = image.add(e);
    if (!w.ok()) return MakeError(ErrorCode::kBadPageTables, which + ": " + w.error().message);
  }
  for (std::uint32_t i = 0; i < l.code_pages; ++i) {
    if (code_mapped.count((l.code_base >> 12) + i) == 0) {
      return MakeError(ErrorCode::kBadPageTables,
                       "code page " + hex32(l.code_base + i * kPageBytes) + " is not mapped");
    }
  }
  return image;
}

Status SecurityMonitor::write_page_table(int core, EnclaveRuntime& rt,
                                         const PageTableImage& image) {
  // Stale entries left by the OS must not survive in the table pages.
  const EnclaveLayout& l = rt.layout;
  cache_.flush_range(l.page_table_base, EnclaveLayout::kPageTablePages * kPageBytes, false);
  memory_.zero(l.page_table_base, EnclaveLayout::kPageTablePages * kPageBytes);
  std::vector<Address> spare = l.spare_table_pages();
  std::erase(spare, image.root());
  PageTableImage placed(image.root(), std::move(spare));
  for (const PageTableEntry& e : image.entries()) {
    Result<std::vector<PteWrite>> writes = placed.add(e);
    if (!writes.ok()) return MakeError(ErrorCode::kBadPageTables, writes.error().message);
    for (const PteWrite& w : *writes) {
      Bytes b;
      put_u32(b, w.value);
      Status s = sm_write(core, w.address, b);
      if (!s) return s;
    }
  }
  rt.page_table = std::move(placed);
  return {};
}

Status SecurityMonitor::add_page_mapping(int core, EnclaveId eid, const PageTableEntry& pte) {
  Call call(*this, core);
  Status s;
  EnclaveMeta* m = find_live_mut(eid);
  if (!m) {
    s = MakeError(ErrorCode::kNotLive, "no live enclave " + to_string(eid));
  } else if (m->runtime->type != EnclaveType::kUser || !m->runtime->page_table) {
    s = MakeError(ErrorCode::kBadPageTables, "enclave has no SM-managed page table");
  } else {
    EnclaveRuntime& rt = *m->runtime;
    const Address target = pte.physical_page << 12;
    const LayoutArea area =
        pte.physical_page >= (1u << 20) ? LayoutArea::kOutside : rt.layout.area_of(target);
    if ((pte.perms & 0x7) == 0) {
      s = MakeError(ErrorCode::kBadPageTables, "entry has no permissions");
    } else if (area != LayoutArea::kHeap && area != LayoutArea::kShared) {
      s = MakeError(ErrorCode::kBadPageTables,
                    "entry maps " + hex32(target) + " into the " + to_string(area) + " area");
    } else {
      Result<std::vector<PteWrite>> writes = rt.page_table->add(pte);
      if (!writes.ok()) {
        s = MakeError(ErrorCode::kBadPageTables, writes.error().message);
      } else {
        for (const PteWrite& w : *writes) {
          Bytes b;
          put_u32(b, w.value);
          s = sm_write(core, w.address, b);
          if (!s) break;
        }
        // The TLB may cache a previous miss for this page on enclave cores.
        for (int i = 0; i < machine_.num_cores(); ++i) {
          std::erase_if(machine_.core(i).local.tlb, [&](const auto& t) {
            return t.first == pte.virtual_page && t.second == eid.value();
          });
        }
      }
    }
  }
  char note[64];
  std::snprintf(note, sizeof note, "%s vpn=0x%x ppn=0x%x", to_string(eid).c_str(),
                static_cast<unsigned>(pte.virtual_page), static_cast<unsigned>(pte.physical_page));
  record(core, "add_page_mapping", s, note);
  return s;
}

// ---------------------------------------------------------------------------
// Setup and teardown

Result<EnclaveId> SecurityMonitor::setup(int core, const SetupRequest& req) {
  Call call(*this, core);
  Result<EnclaveId> r = do_setup(core, req);
  std::string note = label_name(req.label);
  if (r.ok()) note += " eid=" + to_string(*r);
  record(core, "setup", r.ok() ? Status{} : Status{r.error()}, note);
  if (r.ok() && find_live(*r)->runtime->type == EnclaveType::kKernel) {
    // Hand each reserved core to the enclave runtime.
    for (int c : find_live(*r)->runtime->cores) {
      Call entry(*this, c);
      entry.set_return(*r);
    }
  }
  return r;
}

Result<EnclaveId> SecurityMonitor::do_setup(int core, const SetupRequest& req) {
  EnclaveMeta* meta = find_mut(req.label);
  if (!meta) return MakeError(ErrorCode::kUnknownLabel, "label not installed");
  if (meta->live()) return MakeError(ErrorCode::kAlreadyLive, "enclave already set up");
  const EnclaveConfig& cfg = req.config;
  if (cfg.version < meta->max_version_set_up) {
    return MakeError(ErrorCode::kVersionRollback,
                     "version " + std::to_string(cfg.version) + " below " +
                         std::to_string(meta->max_version_set_up));
  }
  if (state_.eid_pool.empty()) return MakeError(ErrorCode::kNoFreeEid, "all 13 ids in use");

  // (1) claim a pool id and program its region register.
  Result<MemRegion> region =
      MemRegion::Make(req.region_base, round_up_pow2(std::max<std::uint64_t>(cfg.memory_bytes, 1)));
  if (!region.ok()) return resource_error(region.error());
  if (!bus_.config().main_memory.contains(*region)) {
    return MakeError(ErrorCode::kResourceUnavailable, "region outside main memory");
  }
  if (bus_.arbiter().zero_region.overlaps(*region)) {
    return MakeError(ErrorCode::kResourceUnavailable, "region overlaps the zero sink");
  }
  const EnclaveId eid(*state_.eid_pool.begin());
  Status s = bus_.program_region(EnclaveId::Sm(), eid, *region);
  if (!s) return resource_error(s.error());
  state_.eid_pool.erase(state_.eid_pool.begin());

  EnclaveRuntime rt;
  rt.eid = eid;
  rt.type = cfg.enclave_type;
  rt.config = cfg;
  rt.shared_owner = eid;
  bool ways_allocated = false;
  bool wrote_private_areas = false;

  auto fail = [&](Error e) -> Result<EnclaveId> {
    for (int idx : rt.peripherals) restore_peripheral(rt, idx);
    if (ways_allocated) (void)cache_.release_ways(EnclaveId::Sm(), eid);
    if (wrote_private_areas) {
      const Address base = rt.layout.page_table_base;
      const std::uint64_t len = rt.layout.heap_base - base;
      cache_.flush_range(base, len, false);
      memory_.zero(base, len);
    }
    for (int c : rt.cores) machine_.core(c).detached = false;
    (void)bus_.program_region(EnclaveId::Sm(), eid, std::nullopt);
    state_.eid_pool.insert(eid.value());
    return e;
  };

  Result<EnclaveLayout> layout = EnclaveLayout::Make(*region, meta->binary_bytes);
  if (!layout.ok()) return fail(layout.error());
  rt.layout = *layout;

  // (2) re-verify the loaded image and the configuration.
  cache_.flush_range(region->base, region->size(), true);
  Bytes image(static_cast<std::size_t>(meta->binary_bytes));
  memory_.read(region->base, image);
  if (!verify_enclave_signature(crypto_.signatures, meta->provider_cert, meta->format_version,
                                serialize_config(cfg), image, meta->sig)) {
    return fail(MakeError(ErrorCode::kBadSignature, "loaded image or config does not match"));
  }
  Status valid = cfg.validate();
  if (!valid) return fail(valid.error());

  for (const PeripheralRequest& pr : cfg.peripherals) {
    Result<int> idx = assign_peripheral(rt, pr);
    if (!idx.ok()) return fail(idx.error());
  }
  if (cfg.cache_mode == CacheRequest::kStrict) {
    s = cache_.allocate_ways(EnclaveId::Sm(), eid, cfg.cache_ways);
    if (!s) return fail(resource_error(s.error()));
    ways_allocated = true;
    s = cache_.set_mode(EnclaveId::Sm(), eid, CacheMode::kStrict);
    if (!s) return fail(resource_error(s.error()));
  }
  if (cfg.enclave_type == EnclaveType::kKernel) {
    for (int c = machine_.num_cores() - 1; c >= 1 && rt.cores.size() < cfg.cores; --c) {
      Core& k = machine_.core(c);
      if (c != core && !k.detached && k.eid_reg.is_os()) {
        k.detached = true;
        rt.cores.push_back(c);
      }
    }
    if (rt.cores.size() < cfg.cores) {
      return fail(MakeError(ErrorCode::kResourceUnavailable, "not enough cores to detach"));
    }
  }

  // (3) unseal the state and install it.
  Result<Bytes> plain = unseal(crypto_.aead, meta->sealing_key, meta->sealed_state,
                               meta->rollback_counter);
  if (!plain.ok()) return fail(plain.error());
  Result<EnclaveState> st = EnclaveState::Parse(*plain);
  if (!st.ok()) return fail(MakeError(ErrorCode::kTamperDetected, st.error().message));
  if (st->counter != meta->rollback_counter) {
    return fail(MakeError(ErrorCode::kRollbackDetected, "state counter differs from D_encl"));
  }
  rt.state_at_setup = *st;
  wrote_private_areas = true;
  cache_.flush_range(rt.layout.state_base, kPageBytes, false);
  memory_.zero(rt.layout.state_base, kPageBytes);
  s = sm_write(core, rt.layout.state_base, st->serialize());
  if (!s) return fail(s.error());

  if (rt.type == EnclaveType::kUser) {
    PageTable pt = req.page_table ? *req.page_table : default_page_table(rt.layout);
    PageTableImage checked;
    if (options_.verify_page_tables) {
      Result<PageTableImage> v = verify_page_tables(*meta, rt, pt);
      if (!v.ok()) return fail(v.error());
      checked = std::move(*v);
    } else {
      // Negative control: install whatever the OS built.
      std::vector<Address> spare = rt.layout.spare_table_pages();
      std::erase(spare, pt.root);
      checked = PageTableImage(pt.root, std::move(spare));
      for (const PageTableEntry& e : pt.entries) (void)checked.add(e);
    }
    s = write_page_table(core, rt, checked);
    if (!s) return fail(s.error());
  }

  meta->max_version_set_up = std::max(meta->max_version_set_up, cfg.version);
  meta->runtime = std::move(rt);
  handlers_[eid.value()] = nullptr;
  return eid;
}

Result<int> SecurityMonitor::assign_peripheral(EnclaveRuntime& rt, const PeripheralRequest& pr) {
  std::optional<int> idx = bus_.find_peripheral(pr.name);
  if (!idx) return MakeError(ErrorCode::kResourceUnavailable, "no peripheral " + pr.name);
  PeripheralDescriptor& p = bus_.peripheral_mut(*idx);
  if (p.exclusive_owner) {
    return MakeError(ErrorCode::kResourceUnavailable,
                     pr.name + " is held by " + to_string(*p.exclusive_owner));
  }
  rt.prior_perm_bitmaps[*idx] = p.perm_bitmap;
  rt.prior_dma[*idx] = p.dma_allowed;
  if (pr.exclusive) {
    if ((p.perm_bitmap & kPoolPermMask) != 0) {
      return MakeError(ErrorCode::kResourceUnavailable, pr.name + " is shared with an enclave");
    }
    (void)bus_.sanitize_peripheral(EnclaveId::Sm(), *idx);
    (void)bus_.set_peripheral_permissions(EnclaveId::Sm(), *idx,
                                          PeripheralDescriptor::rw_bits(rt.eid));
    p.exclusive_owner = rt.eid;
    if (p.dma_capable) (void)bus_.bind_dma(EnclaveId::Sm(), *idx, rt.layout.region);
  } else {
    if (p.dma_capable) {
      return MakeError(ErrorCode::kResourceUnavailable,
                       pr.name + " does DMA and can only be assigned exclusively");
    }
    (void)bus_.set_peripheral_permissions(
        EnclaveId::Sm(), *idx, p.perm_bitmap | PeripheralDescriptor::rw_bits(rt.eid));
  }
  rt.peripherals.push_back(*idx);
  return *idx;
}

void SecurityMonitor::restore_peripheral(const EnclaveRuntime& rt, int idx) {
  PeripheralDescriptor& p = bus_.peripheral_mut(idx);
  if (p.exclusive_owner == rt.eid) {
    (void)bus_.sanitize_peripheral(EnclaveId::Sm(), idx);
    p.exclusive_owner.reset();
    auto perm = rt.prior_perm_bitmaps.find(idx);
    (void)bus_.set_peripheral_permissions(
        EnclaveId::Sm(), idx, perm == rt.prior_perm_bitmaps.end() ? 0 : perm->second);
    auto dma = rt.prior_dma.find(idx);
    if (p.dma_capable && dma != rt.prior_dma.end()) {
      (void)bus_.bind_dma(EnclaveId::Sm(), idx, dma->second);
    }
  } else {
    (void)bus_.set_peripheral_permissions(
        EnclaveId::Sm(), idx, p.perm_bitmap & ~PeripheralDescriptor::rw_bits(rt.eid));
  }
}

Status SecurityMonitor::teardown(int core, EnclaveId eid) {
  Call call(*this, core);
  EnclaveMeta* m = find_live_mut(eid);
  Status s;
  std::string note = to_string(eid);
  if (!m) {
    s = MakeError(ErrorCode::kNotLive, "no live enclave " + to_string(eid));
  } else {
    note = label_name(m->label) + " " + note;
    if (call.return_to() == eid) call.set_return(EnclaveId::Os());
    s = do_teardown(core, *m);
  }
  record(core, "teardown", s, note);
  return s;
}

Status SecurityMonitor::do_teardown(int core, EnclaveMeta& meta) {
  EnclaveRuntime& rt = *meta.runtime;
  const EnclaveId eid = rt.eid;
  // Park every other core still executing the enclave.
  for (int c = 0; c < machine_.num_cores(); ++c) {
    if (c == core) continue;
    Core& k = machine_.core(c);
    const bool reserved = std::find(rt.cores.begin(), rt.cores.end(), c) != rt.cores.end();
    if (k.eid_reg == eid || reserved) {
      Call park(*this, c);
      park.set_return(EnclaveId::Os());
      k.detached = false;
    }
  }

  // Current state: the enclave may have changed its custom keys.
  cache_.flush_range(rt.layout.region.base, rt.layout.region.size(), true);
  Bytes raw(EnclaveState::kBytes);
  memory_.read(rt.layout.state_base, raw);
  Result<EnclaveState> parsed = EnclaveState::Parse(raw);
  EnclaveState st = parsed.ok() ? *parsed : rt.state_at_setup;
  st.comm_key = rt.state_at_setup.comm_key;
  const std::uint64_t next = meta.rollback_counter + 1;
  st.counter = next;
  meta.sealed_state = seal(crypto_.aead, meta.sealing_key, st.serialize(), next, meta.label);
  meta.rollback_counter = next;

  // Scrub the region, then hand every primitive back.
  (void)cache_.flush_enclave_lines(EnclaveId::Sm(), eid);
  cache_.flush_range(rt.layout.region.base, rt.layout.region.size(), false);
  memory_.zero(rt.layout.region.base, rt.layout.region.size());
  for (int idx : rt.peripherals) restore_peripheral(rt, idx);
  (void)cache_.release_ways(EnclaveId::Sm(), eid);
  (void)bus_.remove_shared_window(EnclaveId::Sm(), rt.layout.shared);
  (void)bus_.program_region(EnclaveId::Sm(), eid, std::nullopt);
  for (int c = 0; c < machine_.num_cores(); ++c) {
    CoreLocalState& local = machine_.core(c).local;
    auto owned = [&](const auto& t) { return t.second == eid.value(); };
    std::erase_if(local.l1, owned);
    std::erase_if(local.tlb, owned);
    std::erase_if(local.btb, owned);
  }
  handlers_[eid.value()] = nullptr;
  meta.runtime.reset();
  state_.eid_pool.insert(eid.value());
  return {};
}

// ---------------------------------------------------------------------------
// Context switches and traps

Status SecurityMonitor::context_switch(int core, SwitchDirection direction, EnclaveId target) {
  Core& c = machine_.core(core);
  if (direction == SwitchDirection::kToEnclave) {
    const EnclaveMeta* m = find_live(target);
    Status s;
    if (target.is_firmware()) {
      // The firmware is scheduled like a user context.
    } else if (!m) {
      s = MakeError(ErrorCode::kNotLive, "no live enclave " + to_string(target));
    } else if (m->runtime->type != EnclaveType::kUser) {
      s = MakeError(ErrorCode::kResourceUnavailable, "kernel enclaves own their cores");
    } else if (c.detached || !c.eid_reg.is_os()) {
      s = MakeError(ErrorCode::kResourceUnavailable, "core is not running the OS");
    }
    if (!s) {
      record(core, "context_switch", s, "to_enclave " + to_string(target));
      return s;
    }
    Call call(*this, core);
    call.set_return(target);
    record(core, "context_switch", {}, "to_enclave " + to_string(target));
    return {};
  }
  const EnclaveId from = c.eid_reg;
  const EnclaveMeta* m = find_live(from);
  if (!from.is_firmware() && (!m || m->runtime->type != EnclaveType::kUser)) {
    Status s = MakeError(ErrorCode::kNotLive, "core is not running a user enclave");
    record(core, "context_switch", s, "to_os");
    return s;
  }
  Call call(*this, core);
  call.set_return(EnclaveId::Os());
  record(core, "context_switch", {}, "to_os from " + to_string(from));
  return {};
}

TrapOutcome SecurityMonitor::deliver_trap(int core, TrapClass cause, int burst) {
  const TrapOutcome first = machine_.trap_to_machine(core, cause);
  if (first != TrapOutcome::kEnteredSm) {
    for (int i = 1; i < burst; ++i) (void)machine_.trap_to_machine(core, cause);
    return first;
  }
  // The rest of the burst lands while the SM runs with interrupts off.
  for (int i = 1; i < burst; ++i) (void)machine_.trap_to_machine(core, cause);
  Call call(*this, core, /*trapped=*/true);
  Core& c = machine_.core(core);
  EnclaveMeta* m = find_live_mut(call.return_to());
  std::vector<TrapClass> pending;
  pending.swap(c.pending);
  if (m && m->runtime->type == EnclaveType::kUser) {
    EnclaveRuntime& rt = *m->runtime;
    std::uint64_t notified = 0;
    auto notify = [&](TrapClass t) {
      if (!is_interrupt(t)) return;
      ++notified;
      ++rt.trap_notifications;
      if (handlers_[rt.eid.value()]) handlers_[rt.eid.value()](t);
    };
    notify(cause);
    for (TrapClass t : pending) notify(t);
    record(core, "trap", {},
           std::string(to_string(cause)) + " from " + to_string(rt.eid) + " notified=" +
               std::to_string(notified) + ", to_os");
    call.set_return(EnclaveId::Os());
  } else {
    record(core, "trap", {},
           std::string(to_string(cause)) + " from " + to_string(call.return_to()) +
               " forwarded to the OS");
  }
  for (TrapClass t : pending) trace_.append(core, EnclaveId::Sm(), "trap", "forwarded", 0,
                                            to_string(t));
  return first;
}

Status SecurityMonitor::register_trap_handler(EnclaveId caller,
                                              std::function<void(TrapClass)> handler) {
  if (!find_live(caller)) return MakeError(ErrorCode::kNotLive, "caller is not a live enclave");
  handlers_[caller.value()] = std::move(handler);
  return {};
}

// ---------------------------------------------------------------------------
// Shared memory, attestation, violations

Status SecurityMonitor::shared_memory_handoff(int core, EnclaveId enclave, EnclaveId from,
                                              EnclaveId to) {
  Call call(*this, core);
  EnclaveMeta* m = find_live_mut(enclave);
  Status s;
  std::string note = to_string(enclave) + " " + to_string(from) + "->" + to_string(to);
  if (!m) {
    s = MakeError(ErrorCode::kNotLive, "no live enclave " + to_string(enclave));
  } else if (m->runtime->shared_owner != from) {
    s = MakeError(ErrorCode::kNotOwner,
                  to_string(from) + " does not own the window; " +
                      to_string(m->runtime->shared_owner) + " does");
  } else if (!(to.is_os() || to == enclave || find_live(to))) {
    s = MakeError(ErrorCode::kNotLive, "receiver " + to_string(to) + " is not live");
  } else {
    EnclaveRuntime& rt = *m->runtime;
    cache_.flush_range(rt.layout.shared.base, rt.layout.shared.size(), true);
    if (to == enclave) {
      s = bus_.remove_shared_window(EnclaveId::Sm(), rt.layout.shared);
    } else {
      s = bus_.assign_shared_window(EnclaveId::Sm(), rt.layout.shared, to);
    }
    if (s) {
      rt.shared_owner = to;
      ++ipis_[to.value()];
      trace_.append(core, to, "ipi", "delivered", 0, "shared window " + hex32(rt.layout.shared.base));
    }
  }
  record(core, "handoff", s, note);
  return s;
}

Result<AttestationReport> SecurityMonitor::attest(int core, EnclaveId eid,
                                                  const std::array<std::uint8_t, 32>& nonce) {
  Call call(*this, core);
  const EnclaveMeta* m = find_live(eid);
  if (!m) {
    Error e = MakeError(ErrorCode::kNotLive, "no live enclave " + to_string(eid));
    record(core, "attest", e, to_string(eid));
    return e;
  }
  AttestationReport report;
  report.enclave_sig = m->sig;
  report.nonce = nonce;
  report.report_sig =
      crypto_.signatures.sign(state_.device_sk, attestation_message(m->sig, nonce));
  report.device_cert = state_.device_cert;
  record(core, "attest", {}, label_name(m->label));
  return report;
}

Status SecurityMonitor::allocate_ways(int core, EnclaveId eid, std::uint32_t count) {
  Call call(*this, core);
  Status s = find_live(eid) ? cache_.allocate_ways(EnclaveId::Sm(), eid, count)
                            : MakeError(ErrorCode::kNotLive, "no live enclave " + to_string(eid));
  record(core, "allocate_ways", s, to_string(eid) + " +" + std::to_string(count));
  return s;
}

Status SecurityMonitor::set_cache_mode(int core, EnclaveId eid, CacheMode mode) {
  Call call(*this, core);
  Status s = find_live(eid) ? cache_.set_mode(EnclaveId::Sm(), eid, mode)
                            : MakeError(ErrorCode::kNotLive, "no live enclave " + to_string(eid));
  record(core, "set_mode", s,
         to_string(eid) + (mode == CacheMode::kStrict ? " strict" : " basic"));
  return s;
}

std::size_t SecurityMonitor::drain_violations() {
  std::size_t n = 0;
  std::deque<ViolationRecord>& q = bus_.violations();
  while (!q.empty()) {
    ViolationRecord v = q.front();
    q.pop_front();
    handle_violation(v);
    ++n;
  }
  return n;
}

void SecurityMonitor::handle_violation(const ViolationRecord& v) {
  audit_log_.push_back(AuditEntry{trace_.steps(), v});
  if (options_.policy != ViolationPolicy::kTeardownRepeatOffender || in_teardown_policy_) return;
  if (!v.offender.is_pool() || v.origin.kind != Origin::Kind::kCore) return;
  if (bus_.violations_by(v.offender) < options_.repeat_offender_threshold) return;
  EnclaveMeta* m = find_live_mut(v.offender);
  if (!m) return;
  in_teardown_policy_ = true;
  const int core = v.origin.index;
  {
    Call call(*this, core);
    if (call.return_to() == v.offender) call.set_return(EnclaveId::Os());
    Status s = do_teardown(core, *m);
    record(core, "policy_teardown", s, to_string(v.offender));
  }
  in_teardown_policy_ = false;
}

// ---------------------------------------------------------------------------
// Persistence

Result<Bytes> SecurityMonitor::seal_sm_state() {
  const std::uint64_t next = nvm_.read().value_or(0) + 1;
  Status s = nvm_.write(next);
  if (!s) return s.error();
  SealedBlob blob = seal(crypto_.aead, sm_sealing_key(), state_.serialize(), next,
                         as_bytes(kSmStateDomain));
  trace_.append(-1, EnclaveId::Sm(), "sm", "ok", 0, "seal_sm_state counter=" + std::to_string(next));
  return blob.serialize();
}

Status SecurityMonitor::restore_sm_state(ByteSpan bytes) {
  if (live_count() != 0) {
    return MakeError(ErrorCode::kAlreadyLive, "restore requires a machine without live enclaves");
  }
  Result<SealedBlob> blob = SealedBlob::Parse(bytes);
  if (!blob.ok()) return MakeError(ErrorCode::kTamperDetected, blob.error().message);
  const std::optional<std::uint64_t> nvm = nvm_.read();
  // Without the NVM counter there is nothing to compare against.
  Result<Bytes> plain =
      unseal(crypto_.aead, sm_sealing_key(), *blob, nvm ? *nvm : blob->counter);
  Status s;
  if (!plain.ok()) {
    s = plain.error();
  } else {
    Result<SmState> restored = SmState::Parse(*plain);
    if (!restored.ok()) {
      s = MakeError(ErrorCode::kTamperDetected, restored.error().message);
    } else {
      restored->eid_pool = state_.eid_pool;
      state_ = std::move(*restored);
      if (!nvm) s = nvm_.write(blob->counter);
    }
  }
  trace_.append(-1, EnclaveId::Sm(), "sm", s.ok() ? "ok" : to_string(s.code()).data(), 0,
                "restore_sm_state");
  return s;
}

Status SecurityMonitor::store_sealed_state(const Label& label, ByteSpan bytes) {
  EnclaveMeta* m = find_mut(label);
  if (!m) return MakeError(ErrorCode::kUnknownLabel, "label not installed");
  Result<SealedBlob> blob = SealedBlob::Parse(bytes);
  if (!blob.ok()) return blob.error();
  m->sealed_state = std::move(*blob);
  return {};
}

Result<Bytes> SecurityMonitor::load_sealed_state(const Label& label) const {
  const EnclaveMeta* m = find(label);
  if (!m) return MakeError(ErrorCode::kUnknownLabel, "label not installed");
  return m->sealed_state.serialize();
}

}  // namespace cure
