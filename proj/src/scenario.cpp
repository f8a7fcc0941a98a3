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

#include "cure/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cure {
namespace {

using json = nlohmann::json;

struct ParseFailure {
  std::string where;
  std::string what;
};

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ParseFailure{where, what};
}

constexpr std::pair<EventKind, const char*> kEventNames[] = {
    {EventKind::kInstall, "install"},
    {EventKind::kUpdate, "update"},
    {EventKind::kSetup, "setup"},
    {EventKind::kTeardown, "teardown"},
    {EventKind::kRun, "run"},
    {EventKind::kYield, "yield"},
    {EventKind::kAccess, "access"},
    {EventKind::kSyscall, "syscall"},
    {EventKind::kInterrupt, "interrupt"},
    {EventKind::kDma, "dma"},
    {EventKind::kHandoff, "handoff"},
    {EventKind::kAttest, "attest"},
    {EventKind::kAllocateWays, "allocate_ways"},
    {EventKind::kSetMode, "set_mode"},
    {EventKind::kAddPage, "add_page"},
    {EventKind::kCheckpoint, "checkpoint"},
    {EventKind::kSealSmState, "seal_sm_state"},
    {EventKind::kReboot, "reboot"},
};

// Keys each op accepts besides op, expect and repeat.
const std::map<EventKind, std::set<std::string>>& event_keys() {
  static const auto* keys = new std::map<EventKind, std::set<std::string>>{
      {EventKind::kInstall, {"package", "core"}},
      {EventKind::kUpdate, {"package", "core"}},
      {EventKind::kSetup, {"label", "core"}},
      {EventKind::kTeardown, {"label", "core"}},
      {EventKind::kRun, {"label", "core"}},
      {EventKind::kYield, {"core"}},
      {EventKind::kAccess, {"actor", "core", "rw", "address", "va", "size", "value", "stride"}},
      {EventKind::kSyscall, {"actor", "core", "kind"}},
      {EventKind::kInterrupt, {"core", "class", "count"}},
      {EventKind::kDma, {"device", "rw", "address", "size", "value", "stride"}},
      {EventKind::kHandoff, {"label", "from", "to", "core"}},
      {EventKind::kAttest, {"label", "nonce", "core"}},
      {EventKind::kAllocateWays, {"label", "ways", "core"}},
      {EventKind::kSetMode, {"label", "mode", "core"}},
      {EventKind::kAddPage, {"label", "va", "pa", "perms", "core"}},
      {EventKind::kCheckpoint, {"name"}},
      {EventKind::kSealSmState, {"core"}},
      {EventKind::kReboot, {}},
  };
  return *keys;
}

std::uint64_t parse_number(std::string_view s, const std::string& where) {
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    s.remove_prefix(2);
    base = 16;
  }
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    fail(where, "not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t as_u64(const json& v, const std::string& where) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto x = v.get<std::int64_t>();
    if (x < 0) fail(where, "must not be negative");
    return static_cast<std::uint64_t>(x);
  }
  if (v.is_string()) return parse_number(v.get<std::string>(), where);
  fail(where, "expected an unsigned integer");
}

std::uint32_t as_u32(const json& v, const std::string& where) {
  const std::uint64_t x = as_u64(v, where);
  if (x > 0xFFFFFFFFu) fail(where, "does not fit in 32 bits");
  return static_cast<std::uint32_t>(x);
}

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) fail(where, "expected a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) fail(where, "expected true or false");
  return v.get<bool>();
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where + "." + key, "missing");
  return *it;
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) fail(where + "." + it.key(), "unknown field");
  }
}

Bytes as_hex_bytes(const json& v, const std::string& where) {
  std::string s = as_string(v, where);
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) s = s.substr(2);
  Bytes out;
  if (!from_hex(s, out)) fail(where, "expected an even-length hex string");
  return out;
}

BusOp as_op(const json& v, const std::string& where) {
  const std::string s = as_string(v, where);
  if (s == "read" || s == "r") return BusOp::kRead;
  if (s == "write" || s == "w") return BusOp::kWrite;
  fail(where, "expected read or write");
}

CacheGeometry parse_geometry(const json& g, const std::string& where,
                             std::uint32_t& max_ways) {
  if (!g.is_object()) fail(where, "expected an object");
  check_keys(g, {"sets", "ways", "line_bytes", "max_ways_per_enclave"}, where);
  CacheGeometry geo;
  if (g.contains("sets")) geo.num_sets = as_u32(g["sets"], where + ".sets");
  if (g.contains("ways")) geo.num_ways = as_u32(g["ways"], where + ".ways");
  if (g.contains("line_bytes")) geo.line_bytes = as_u32(g["line_bytes"], where + ".line_bytes");
  if (Status s = geo.validate(); !s) fail(where, s.error().message);
  if (g.contains("max_ways_per_enclave")) {
    max_ways = as_u32(g["max_ways_per_enclave"], where + ".max_ways_per_enclave");
    if (max_ways < 1 || max_ways > geo.num_ways) {
      fail(where + ".max_ways_per_enclave", "must be in [1, ways]");
    }
  } else {
    max_ways = std::min(max_ways, geo.num_ways);
  }
  return geo;
}

CostModel parse_costs(const json& c, const std::string& where) {
  if (!c.is_object()) fail(where, "expected an object");
  check_keys(c, {"unit", "tlb_flush", "l1_flush", "bus_txn", "l2_hit", "l2_miss", "dram"}, where);
  CostModel m;
  if (c.contains("unit") && as_bool(c["unit"], where + ".unit")) m = CostModel::Unit();
  auto set = [&](const char* key, Cycles& field) {
    if (c.contains(key)) field = as_u64(c[key], where + "." + key);
  };
  set("tlb_flush", m.tlb_flush_cycles);
  set("l1_flush", m.l1_flush_cycles);
  set("bus_txn", m.bus_txn_cycles);
  set("l2_hit", m.l2_hit_cycles);
  set("l2_miss", m.l2_miss_cycles);
  set("dram", m.dram_cycles);
  return m;
}

EnclaveId fixed_actor(const std::string& name, const std::string& where) {
  if (name == "os") return EnclaveId::Os();
  if (name == "fw") return EnclaveId::Firmware();
  if (name == "sm") return EnclaveId::Sm();
  fail(where, "peripheral access lists take os, fw or sm; enclaves are granted at setup");
}

PeripheralSpec parse_peripheral(const json& p, const std::string& where) {
  if (!p.is_object()) fail(where, "expected an object");
  check_keys(p, {"name", "dma", "access", "dma_allowed"}, where);
  PeripheralSpec ps;
  ps.name = as_string(require(p, "name", where), where + ".name");
  if (p.contains("dma")) ps.dma_capable = as_bool(p["dma"], where + ".dma");
  if (p.contains("access")) {
    const json& a = p["access"];
    if (!a.is_array()) fail(where + ".access", "expected an array");
    ps.perm_bitmap = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string w = where + ".access[" + std::to_string(i) + "]";
      ps.perm_bitmap |= PeripheralDescriptor::rw_bits(fixed_actor(as_string(a[i], w), w));
    }
  }
  if (p.contains("dma_allowed")) {
    const json& d = p["dma_allowed"];
    const std::string w = where + ".dma_allowed";
    if (!d.is_object()) fail(w, "expected {base, size}");
    check_keys(d, {"base", "size"}, w);
    Result<MemRegion> r = MemRegion::Make(as_u32(require(d, "base", w), w + ".base"),
                                          as_u64(require(d, "size", w), w + ".size"));
    if (!r.ok()) fail(w, r.error().message);
    ps.dma_allowed = *r;
  }
  return ps;
}

Bytes read_file(const std::filesystem::path& path, const std::string& where) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(where, "cannot read " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

Event parse_event(const json& e, std::size_t index, const Scenario& sc,
                  const std::set<std::string>& labels) {
  Event ev;
  ev.path = "events[" + std::to_string(index) + "]";
  const std::string& w = ev.path;
  if (!e.is_object()) fail(w, "expected an object");
  const std::string op = as_string(require(e, "op", w), w + ".op");
  auto named = std::find_if(std::begin(kEventNames), std::end(kEventNames),
                            [&](const auto& kv) { return op == kv.second; });
  if (named == std::end(kEventNames)) fail(w + ".op", "unknown op '" + op + "'");
  ev.kind = named->first;
  std::set<std::string> allowed = event_keys().at(ev.kind);
  allowed.insert({"op", "expect", "repeat"});
  check_keys(e, allowed, w);

  auto label_field = [&](const char* key) {
    const std::string v = as_string(require(e, key, w), w + "." + key);
    if (!labels.count(v)) fail(w + "." + key, "no package declares label '" + v + "'");
    return v;
  };
  auto actor_field = [&](const char* key) {
    const std::string v = as_string(require(e, key, w), w + "." + key);
    if (v != "os" && v != "fw" && v != "sm" && !labels.count(v)) {
      fail(w + "." + key, "unknown actor '" + v + "'");
    }
    return v;
  };
  auto address_field = [&](const char* key) {
    const json& v = e[key];
    if (v.is_number()) {
      AddressExpr a;
      a.offset = static_cast<std::int64_t>(as_u64(v, w + "." + key));
      return a;
    }
    Result<AddressExpr> a = AddressExpr::Parse(as_string(v, w + "." + key));
    if (!a.ok()) fail(w + "." + key, a.error().message);
    if (!a->target.empty() && a->target != "mmio" && a->target != "os" && a->target != "sm" &&
        a->target != "fw" && a->target != "sink" && a->target != "code" && a->target != "heap" &&
        a->target != "state" && a->target != "shared" && !labels.count(a->target)) {
      fail(w + "." + key, "unknown address base '" + a->target + "'");
    }
    if (a->target == "mmio" &&
        std::none_of(sc.spec.peripherals.begin(), sc.spec.peripherals.end(),
                     [&](const PeripheralSpec& p) { return p.name == a->area; })) {
      fail(w + "." + key, "unknown peripheral '" + a->area + "'");
    }
    return *a;
  };

  if (e.contains("core")) {
    ev.core = static_cast<int>(as_u32(e["core"], w + ".core"));
    if (ev.core >= sc.spec.cores) fail(w + ".core", "no such core");
  }
  if (e.contains("repeat")) ev.repeat = static_cast<int>(as_u32(e["repeat"], w + ".repeat"));
  if (e.contains("expect")) ev.expect = as_string(e["expect"], w + ".expect");

  switch (ev.kind) {
    case EventKind::kInstall:
    case EventKind::kUpdate: {
      ev.package = as_string(require(e, "package", w), w + ".package");
      if (!sc.packages.count(ev.package)) fail(w + ".package", "undeclared package");
      break;
    }
    case EventKind::kSetup:
    case EventKind::kTeardown:
    case EventKind::kRun:
      ev.label = label_field("label");
      break;
    case EventKind::kYield:
    case EventKind::kSealSmState:
    case EventKind::kReboot:
      break;
    case EventKind::kAccess:
    case EventKind::kDma: {
      if (ev.kind == EventKind::kAccess) {
        ev.actor = actor_field("actor");
      } else {
        ev.device = as_string(require(e, "device", w), w + ".device");
        if (std::none_of(sc.spec.peripherals.begin(), sc.spec.peripherals.end(),
                         [&](const PeripheralSpec& p) { return p.name == ev.device; })) {
          fail(w + ".device", "unknown peripheral '" + ev.device + "'");
        }
      }
      if (e.contains("rw")) ev.op = as_op(e["rw"], w + ".rw");
      const bool has_pa = e.contains("address");
      const bool has_va = e.contains("va");
      if (has_pa == has_va) fail(w, "give exactly one of address and va");
      ev.is_virtual = has_va;
      ev.address = address_field(has_va ? "va" : "address");
      if (e.contains("value")) {
        ev.value = as_hex_bytes(e["value"], w + ".value");
        ev.size = static_cast<std::uint32_t>(ev.value->size());
        ev.op = BusOp::kWrite;
      }
      if (e.contains("size")) ev.size = as_u32(e["size"], w + ".size");
      if (ev.size == 0 || ev.size > 64) fail(w + ".size", "must be in [1, 64]");
      if (ev.value && ev.value->size() != ev.size) fail(w + ".value", "length differs from size");
      if (e.contains("stride")) ev.stride = as_u32(e["stride"], w + ".stride");
      break;
    }
    case EventKind::kSyscall:
      ev.actor = actor_field("actor");
      if (e.contains("kind")) ev.name = as_string(e["kind"], w + ".kind");
      break;
    case EventKind::kInterrupt: {
      const std::string c = as_string(require(e, "class", w), w + ".class");
      std::optional<TrapClass> t = trap_class_from_string(c);
      if (!t) fail(w + ".class", "unknown trap class '" + c + "'");
      ev.trap_class = *t;
      if (e.contains("count")) ev.count = static_cast<int>(as_u32(e["count"], w + ".count"));
      if (ev.count < 1) fail(w + ".count", "must be at least 1");
      break;
    }
    case EventKind::kHandoff:
      ev.label = label_field("label");
      ev.from = actor_field("from");
      ev.to = actor_field("to");
      break;
    case EventKind::kAttest: {
      ev.label = label_field("label");
      if (e.contains("nonce")) {
        Bytes n = as_hex_bytes(e["nonce"], w + ".nonce");
        if (n.size() > ev.nonce.size()) fail(w + ".nonce", "at most 32 bytes");
        std::copy(n.begin(), n.end(), ev.nonce.begin());
      } else {
        ev.nonce = sha256(ByteSpan(reinterpret_cast<const std::uint8_t*>(w.data()), w.size()));
      }
      break;
    }
    case EventKind::kAllocateWays:
      ev.label = label_field("label");
      ev.ways = as_u32(require(e, "ways", w), w + ".ways");
      break;
    case EventKind::kSetMode: {
      ev.label = label_field("label");
      const std::string m = as_string(require(e, "mode", w), w + ".mode");
      if (m == "basic") {
        ev.mode = CacheMode::kBasic;
      } else if (m == "strict") {
        ev.mode = CacheMode::kStrict;
      } else {
        fail(w + ".mode", "expected basic or strict");
      }
      break;
    }
    case EventKind::kAddPage: {
      ev.label = label_field("label");
      require(e, "va", w);
      require(e, "pa", w);
      AddressExpr va = address_field("va");
      ev.address = address_field("pa");
      // The virtual side is a plain number or a virtual area name.
      ev.is_virtual = true;
      ev.to = va.target;
      ev.virtual_page = static_cast<std::uint32_t>(va.offset);
      if (e.contains("perms")) ev.perms = static_cast<std::uint8_t>(as_u32(e["perms"], w + ".perms"));
      break;
    }
    case EventKind::kCheckpoint:
      ev.name = as_string(require(e, "name", w), w + ".name");
      break;
  }
  return ev;
}

Scenario parse_document(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) fail("$", "expected an object at the top level");
  check_keys(doc,
             {"seed", "ecosystem_seed", "crypto", "geometry", "cost_model", "cores", "peripherals",
              "packages", "defenses", "policy", "events", "attack", "nvm_file", "record_trace"},
             "$");
  Scenario sc;
  MachineSpec& spec = sc.spec;
  if (doc.contains("seed")) spec.seed = as_u64(doc["seed"], "seed");
  if (doc.contains("ecosystem_seed")) spec.ecosystem_seed = as_u64(doc["ecosystem_seed"], "ecosystem_seed");
  if (doc.contains("crypto")) {
    const std::string c = as_string(doc["crypto"], "crypto");
    if (c != "real" && c != "fake") fail("crypto", "expected real or fake");
    spec.fake_crypto = c == "fake";
  }
  if (doc.contains("geometry")) {
    spec.geometry = parse_geometry(doc["geometry"], "geometry", spec.max_ways_per_enclave);
  }
  if (doc.contains("cost_model")) spec.costs = parse_costs(doc["cost_model"], "cost_model");
  if (doc.contains("cores")) {
    spec.cores = static_cast<int>(as_u32(doc["cores"], "cores"));
    if (spec.cores < 1 || spec.cores > 64) fail("cores", "must be in [1, 64]");
  }
  if (doc.contains("record_trace")) spec.record_trace = as_bool(doc["record_trace"], "record_trace");
  if (doc.contains("peripherals")) {
    const json& ps = doc["peripherals"];
    if (!ps.is_array()) fail("peripherals", "expected an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const std::string w = "peripherals[" + std::to_string(i) + "]";
      PeripheralSpec p = parse_peripheral(ps[i], w);
      if (!names.insert(p.name).second) fail(w + ".name", "duplicate peripheral");
      spec.peripherals.push_back(std::move(p));
    }
  }
  if (doc.contains("defenses")) {
    const json& d = doc["defenses"];
    if (!d.is_object()) fail("defenses", "expected an object");
    check_keys(d, {"arbiter", "dma_filter", "page_table_verification", "nvm_counter"}, "defenses");
    auto flag = [&](const char* key, bool& field) {
      if (d.contains(key)) field = as_bool(d[key], std::string("defenses.") + key);
    };
    flag("arbiter", spec.defenses.arbiter);
    flag("dma_filter", spec.defenses.dma_filter);
    flag("page_table_verification", spec.defenses.page_table_verification);
    flag("nvm_counter", spec.defenses.nvm_counter);
  }
  if (doc.contains("policy")) {
    const std::string p = as_string(doc["policy"], "policy");
    if (p == "log") {
      spec.policy = ViolationPolicy::kLogOnly;
    } else if (p == "teardown_repeat_offender") {
      spec.policy = ViolationPolicy::kTeardownRepeatOffender;
    } else {
      fail("policy", "expected log or teardown_repeat_offender");
    }
  }
  if (doc.contains("nvm_file")) spec.nvm_path = base_dir / as_string(doc["nvm_file"], "nvm_file");

  std::set<std::string> labels;
  if (doc.contains("packages")) {
    const json& pk = doc["packages"];
    if (!pk.is_object()) fail("packages", "expected an object of name: path");
    for (auto it = pk.begin(); it != pk.end(); ++it) {
      const std::string w = "packages." + it.key();
      Bytes bytes = read_file(base_dir / as_string(it.value(), w), w);
      Result<EnclavePackage> p = parse_package(bytes);
      if (!p.ok()) fail(w, std::string(to_string(p.code())) + ": " + p.error().message);
      Result<EnclaveConfig> c = parse_config(p->config_bytes);
      if (!c.ok()) fail(w, "config: " + c.error().message);
      labels.insert(label_name(c->label));
      sc.packages[it.key()] = std::move(bytes);
    }
  }
  if (doc.contains("attack")) {
    const json& a = doc["attack"];
    if (!a.is_object()) fail("attack", "expected an object");
    for (auto it = a.begin(); it != a.end(); ++it) {
      sc.attack[it.key()] = as_string(it.value(), "attack." + it.key());
    }
  }
  if (doc.contains("events")) {
    const json& evs = doc["events"];
    if (!evs.is_array()) fail("events", "expected an array");
    for (std::size_t i = 0; i < evs.size(); ++i) {
      sc.events.push_back(parse_event(evs[i], i, sc, labels));
    }
  }
  return sc;
}

std::string line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

Bytes fill_pattern(std::uint64_t step, std::uint32_t size) {
  Bytes out(size);
  for (std::uint32_t i = 0; i < size; ++i) out[i] = static_cast<std::uint8_t>((step * 31 + i) & 0xff);
  return out;
}

}  // namespace

const char* to_string(EventKind k) {
  for (const auto& [kind, name] : kEventNames) {
    if (kind == k) return name;
  }
  return "?";
}

Result<AddressExpr> AddressExpr::Parse(std::string_view text) {
  AddressExpr a;
  std::size_t sign = text.find_first_of("+-");
  std::string_view head = text.substr(0, sign);
  if (sign != std::string_view::npos) {
    std::string_view tail = text.substr(sign + 1);
    std::uint64_t v = 0;
    int base = 10;
    if (tail.size() > 2 && tail[0] == '0' && (tail[1] == 'x' || tail[1] == 'X')) {
      tail.remove_prefix(2);
      base = 16;
    }
    auto [p, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), v, base);
    if (tail.empty() || ec != std::errc() || p != tail.data() + tail.size()) {
      return MakeError(ErrorCode::kScenarioError, "bad offset in '" + std::string(text) + "'");
    }
    a.offset = text[sign] == '-' ? -static_cast<std::int64_t>(v) : static_cast<std::int64_t>(v);
  }
  if (head.empty()) return MakeError(ErrorCode::kScenarioError, "empty address");
  if (head[0] >= '0' && head[0] <= '9') {
    std::uint64_t v = 0;
    int base = 10;
    if (head.size() > 2 && head[0] == '0' && (head[1] == 'x' || head[1] == 'X')) {
      head.remove_prefix(2);
      base = 16;
    }
    auto [p, ec] = std::from_chars(head.data(), head.data() + head.size(), v, base);
    if (ec != std::errc() || p != head.data() + head.size()) {
      return MakeError(ErrorCode::kScenarioError, "bad address '" + std::string(text) + "'");
    }
    a.offset += static_cast<std::int64_t>(v);
    return a;
  }
  const std::size_t dot = head.find('.');
  a.target = std::string(head.substr(0, dot));
  a.area = dot == std::string_view::npos ? "base" : std::string(head.substr(dot + 1));
  static const std::set<std::string> kAreas = {"base", "code", "pt", "state", "heap", "shared"};
  if (a.target != "mmio" && !kAreas.count(a.area)) {
    return MakeError(ErrorCode::kScenarioError, "unknown area '" + a.area + "'");
  }
  return a;
}

Result<Scenario> parse_scenario(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::string what = e.what();
    // Drop nlohmann's "[json.exception.parse_error.101] parse error at line x, column y: "
    if (auto c = what.find(": "); c != std::string::npos) what = what.substr(c + 2);
    return MakeError(ErrorCode::kScenarioError, line_col(text, e.byte) + ": " + what);
  }
  try {
    return parse_document(doc, base_dir);
  } catch (const ParseFailure& f) {
    return MakeError(ErrorCode::kScenarioError, f.where + ": " + f.what);
  }
}

Result<EnclaveConfig> parse_config_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    return MakeError(ErrorCode::kScenarioError, line_col(text, e.byte) + ": bad JSON");
  }
  try {
    if (!doc.is_object()) fail("$", "expected an object");
    check_keys(doc, {"label", "version", "type", "memory_bytes", "cache_mode", "cache_ways",
                     "cores", "peripherals"},
               "$");
    EnclaveConfig cfg;
    Result<Label> label = make_label(as_string(require(doc, "label", "$"), "label"));
    if (!label.ok()) fail("label", label.error().message);
    cfg.label = *label;
    if (doc.contains("version")) cfg.version = as_u32(doc["version"], "version");
    if (doc.contains("type")) {
      const std::string t = as_string(doc["type"], "type");
      if (t == "user") {
        cfg.enclave_type = EnclaveType::kUser;
      } else if (t == "kernel") {
        cfg.enclave_type = EnclaveType::kKernel;
      } else if (t == "sub") {
        cfg.enclave_type = EnclaveType::kSub;
      } else {
        fail("type", "expected user, kernel or sub");
      }
    }
    if (doc.contains("memory_bytes")) cfg.memory_bytes = as_u64(doc["memory_bytes"], "memory_bytes");
    if (doc.contains("cache_mode")) {
      const std::string m = as_string(doc["cache_mode"], "cache_mode");
      if (m == "none") {
        cfg.cache_mode = CacheRequest::kNone;
      } else if (m == "basic") {
        cfg.cache_mode = CacheRequest::kBasic;
      } else if (m == "strict") {
        cfg.cache_mode = CacheRequest::kStrict;
      } else {
        fail("cache_mode", "expected none, basic or strict");
      }
    }
    if (doc.contains("cache_ways")) cfg.cache_ways = as_u32(doc["cache_ways"], "cache_ways");
    if (doc.contains("cores")) cfg.cores = as_u32(doc["cores"], "cores");
    if (doc.contains("peripherals")) {
      const json& ps = doc["peripherals"];
      if (!ps.is_array()) fail("peripherals", "expected an array");
      for (std::size_t i = 0; i < ps.size(); ++i) {
        const std::string w = "peripherals[" + std::to_string(i) + "]";
        if (!ps[i].is_object()) fail(w, "expected an object");
        check_keys(ps[i], {"name", "exclusive"}, w);
        PeripheralRequest r;
        r.name = as_string(require(ps[i], "name", w), w + ".name");
        if (ps[i].contains("exclusive")) r.exclusive = as_bool(ps[i]["exclusive"], w + ".exclusive");
        cfg.peripherals.push_back(std::move(r));
      }
    }
    if (Status s = cfg.validate(); !s) fail("$", s.error().message);
    return cfg;
  } catch (const ParseFailure& f) {
    return MakeError(ErrorCode::kScenarioError, f.where + ": " + f.what);
  }
}

Result<Scenario> load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return MakeError(ErrorCode::kIoError, "cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), file.parent_path());
}

// ---------------------------------------------------------------------------

Result<std::unique_ptr<ScenarioRunner>> ScenarioRunner::Create(const Scenario& scenario) {
  std::unique_ptr<ScenarioRunner> r(new ScenarioRunner(scenario));
  Result<std::unique_ptr<Simulation>> sim = Simulation::Create(scenario.spec);
  if (!sim.ok()) return sim.error();
  r->sim_ = std::move(*sim);
  return r;
}

Result<Label> ScenarioRunner::label_for(std::string_view name) const {
  return make_label(name);
}

Result<EnclaveId> ScenarioRunner::actor_eid(std::string_view actor) const {
  if (actor == "os") return EnclaveId::Os();
  if (actor == "fw") return EnclaveId::Firmware();
  if (actor == "sm") return EnclaveId::Sm();
  Result<Label> l = make_label(actor);
  if (!l.ok()) return l.error();
  std::optional<EnclaveId> eid = sim_->eid_of(*l);
  if (!eid) return MakeError(ErrorCode::kNotLive, std::string(actor) + " is not live");
  return *eid;
}

Result<Address> ScenarioRunner::resolve(const AddressExpr& expr) const {
  std::int64_t base = 0;
  const std::string& t = expr.target;
  if (t.empty()) {
    base = 0;
  } else if (t == "os") {
    base = kOsBase;
  } else if (t == "sm") {
    base = kSmBase;
  } else if (t == "fw") {
    base = kFirmwareBase;
  } else if (t == "sink") {
    base = kZeroSinkBase;
  } else if (t == "code") {
    base = kEnclaveCodeVirtual;
  } else if (t == "heap") {
    base = kEnclaveHeapVirtual;
  } else if (t == "state") {
    base = kEnclaveStateVirtual;
  } else if (t == "shared") {
    base = kEnclaveSharedVirtual;
  } else if (t == "mmio") {
    std::optional<int> idx = sim_->bus().find_peripheral(expr.area);
    if (!idx) return MakeError(ErrorCode::kScenarioError, "unknown peripheral " + expr.area);
    base = sim_->bus().peripherals()[*idx].mmio.base;
  } else {
    Result<Label> l = make_label(t);
    if (!l.ok()) return l.error();
    const EnclaveLayout* lay = sim_->layout_of(*l);
    if (!lay) return MakeError(ErrorCode::kNotLive, t + " is not live; its region is unknown");
    if (expr.area == "base" || expr.area == "code") {
      base = lay->region.base;
    } else if (expr.area == "pt") {
      base = lay->page_table_base;
    } else if (expr.area == "state") {
      base = lay->state_base;
    } else if (expr.area == "heap") {
      base = lay->heap_base;
    } else {
      base = lay->shared.base;
    }
  }
  const std::int64_t a = base + expr.offset;
  if (a < 0 || a > 0xFFFFFFFFll) {
    return MakeError(ErrorCode::kScenarioError, "address out of range");
  }
  return static_cast<Address>(a);
}

Status ScenarioRunner::run_events() {
  for (const Event& e : scenario_.events) {
    Status s = run_event(e);
    if (!s) return s;
  }
  return {};
}

Status ScenarioRunner::run_event(const Event& e) {
  for (int i = 0; i < e.repeat; ++i) {
    Event one = e;
    if (one.address && (e.kind == EventKind::kAccess || e.kind == EventKind::kDma)) {
      one.address->offset += static_cast<std::int64_t>(i) * e.stride;
    }
    std::string outcome = "ok";
    Status s = execute(one, outcome);
    // The violation interrupt is serviced at the event boundary.
    sim_->sm().drain_violations();
    if (!s) outcome = std::string(to_string(s.code()));
    const char* mark = !s ? to_string(s.code()).data()
                       : outcome == "allowed"  ? "allowed"
                       : outcome == "redirected" ? "redirected"
                                                 : "ok";
    sim_->trace().append(e.kind == EventKind::kDma ? -1 : e.core, EnclaveId::Os(), "event", mark,
                         0, e.path + " " + to_string(e.kind));
    const bool expected =
        e.expect ? (*e.expect == outcome || (*e.expect == "ok" && s.ok())) : s.ok();
    if (!expected) {
      std::string msg = e.path + " (" + to_string(e.kind) + "): ";
      msg += e.expect ? "expected " + *e.expect + ", got " + outcome : "failed with " + outcome;
      if (!s) msg += ": " + s.error().message;
      return MakeError(ErrorCode::kScenarioError, msg);
    }
  }
  return {};
}

Status ScenarioRunner::execute(const Event& e, std::string& outcome) {
  Simulation& sim = *sim_;
  switch (e.kind) {
    case EventKind::kInstall: {
      Result<Label> r = sim.install(e.core, scenario_.packages.at(e.package));
      if (!r.ok()) return r.error();
      return {};
    }
    case EventKind::kUpdate:
      return sim.update(e.core, scenario_.packages.at(e.package));
    case EventKind::kSetup: {
      Result<Label> l = make_label(e.label);
      if (!l.ok()) return l.error();
      Result<EnclaveId> r = sim.setup(e.core, *l);
      if (!r.ok()) return r.error();
      return {};
    }
    case EventKind::kTeardown: {
      Result<Label> l = make_label(e.label);
      if (!l.ok()) return l.error();
      return sim.teardown(e.core, *l);
    }
    case EventKind::kRun: {
      Result<EnclaveId> eid = actor_eid(e.label);
      if (!eid.ok()) return eid.error();
      return sim.ensure_context(e.core, *eid);
    }
    case EventKind::kYield:
      return sim.ensure_context(e.core, EnclaveId::Os());
    case EventKind::kAccess:
    case EventKind::kDma: {
      Result<Address> a = resolve(*e.address);
      if (!a.ok()) return a.error();
      Bytes data;
      if (e.op == BusOp::kWrite) data = e.value ? *e.value : fill_pattern(sim.trace().steps(), e.size);
      Result<BusResponse> r = MakeError(ErrorCode::kMalformed);
      if (e.kind == EventKind::kDma) {
        r = sim.dma(e.device, e.op, *a, e.size, data);
      } else {
        Result<EnclaveId> eid = actor_eid(e.actor);
        if (!eid.ok()) return eid.error();
        r = sim.access(e.core, *eid, e.op, *a, e.size, data, e.is_virtual);
      }
      if (!r.ok()) return r.error();
      outcome = r->decision.allowed() ? "allowed" : "redirected";
      return {};
    }
    case EventKind::kSyscall: {
      Result<EnclaveId> eid = actor_eid(e.actor);
      if (!eid.ok()) return eid.error();
      Status s = sim.ensure_context(e.core, *eid);
      if (!s) return s;
      sim.sm().deliver_trap(e.core, TrapClass::kSyscall);
      return {};
    }
    case EventKind::kInterrupt:
      sim.sm().deliver_trap(e.core, e.trap_class, e.count);
      return {};
    case EventKind::kHandoff: {
      Result<EnclaveId> enclave = actor_eid(e.label);
      if (!enclave.ok()) return enclave.error();
      Result<EnclaveId> from = actor_eid(e.from);
      if (!from.ok()) return from.error();
      Result<EnclaveId> to = actor_eid(e.to);
      if (!to.ok()) return to.error();
      return sim.sm().shared_memory_handoff(e.core, *enclave, *from, *to);
    }
    case EventKind::kAttest: {
      Result<EnclaveId> eid = actor_eid(e.label);
      if (!eid.ok()) return eid.error();
      Result<AttestationReport> report = sim.sm().attest(e.core, *eid, e.nonce);
      if (!report.ok()) return report.error();
      const EnclaveMeta* meta = sim.sm().find_live(*eid);
      // The provider checks against the signature it shipped.
      const bool ok = provider_verify_report(sim.crypto().signatures, *report,
                                             sim.ecosystem().vendor_root, meta->sig, e.nonce);
      sim.trace().append(e.core, *eid, "attest", ok ? "verified" : "rejected", 0, e.label);
      if (!ok) return MakeError(ErrorCode::kBadSignature, "report did not verify");
      return {};
    }
    case EventKind::kAllocateWays: {
      Result<EnclaveId> eid = actor_eid(e.label);
      if (!eid.ok()) return eid.error();
      return sim.sm().allocate_ways(e.core, *eid, e.ways);
    }
    case EventKind::kSetMode: {
      Result<EnclaveId> eid = actor_eid(e.label);
      if (!eid.ok()) return eid.error();
      return sim.sm().set_cache_mode(e.core, *eid, e.mode);
    }
    case EventKind::kAddPage: {
      Result<EnclaveId> eid = actor_eid(e.label);
      if (!eid.ok()) return eid.error();
      AddressExpr va;
      va.target = e.to;
      va.offset = e.virtual_page;
      Result<Address> v = resolve(va);
      if (!v.ok()) return v.error();
      Result<Address> p = resolve(*e.address);
      if (!p.ok()) return p.error();
      return sim.sm().add_page_mapping(e.core, *eid, PageTableEntry{*v >> 12, *p >> 12, e.perms});
    }
    case EventKind::kCheckpoint:
      sim.checkpoint(e.name);
      return {};
    case EventKind::kSealSmState: {
      Result<Bytes> blob = sim.sm().seal_sm_state();
      if (!blob.ok()) return blob.error();
      sm_blob_ = std::move(*blob);
      return {};
    }
    case EventKind::kReboot: {
      Status s = sim.reboot();
      if (!s || !sm_blob_) return s;
      if (!sim.spec().defenses.nvm_counter) sim.nvm().erase();
      return sim.sm().restore_sm_state(*sm_blob_);
    }
  }
  return {};
}

RunResult ScenarioRunner::result() const {
  RunResult r;
  r.trace_tsv = sim_->trace().to_tsv();
  r.stats_json = sim_->stats_json();
  r.digest = sim_->digest();
  r.cycles = sim_->trace().cycles();
  return r;
}

Result<RunResult> run_scenario(Scenario scenario, std::optional<std::uint64_t> seed) {
  if (seed) scenario.spec.seed = *seed;
  Result<std::unique_ptr<ScenarioRunner>> runner = ScenarioRunner::Create(scenario);
  if (!runner.ok()) return runner.error();
  Status s = (*runner)->run_events();
  if (!s) return s.error();
  return (*runner)->result();
}

}  // namespace cure
