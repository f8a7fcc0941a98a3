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

// cure-sim: command-line driver for the simulator.
//
// Exit codes: 0 success (or "contained"), 1 error, 2 "leaked" or a failed
// verification.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "cure/attacks.hpp"
#include "cure/keyring.hpp"
#include "cure/scenario.hpp"
#include "json.hpp"

namespace {

using namespace cure;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitLeaked = 2;

int report(const Error& e) {
  std::cerr << "error: " << to_string(e.code) << ": " << e.message << "\n";
  return kExitError;
}

Result<Bytes> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return MakeError(ErrorCode::kIoError, "cannot read " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

Status write_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return MakeError(ErrorCode::kIoError, "cannot write " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  return out ? Status{} : MakeError(ErrorCode::kIoError, "short write to " + path);
}

std::string as_text(const Bytes& b) { return std::string(b.begin(), b.end()); }

// Key material from --keyring, else from --ecosystem-seed.
struct KeySource {
  std::string keyring;
  std::uint64_t ecosystem_seed = 1;
  std::string crypto = "real";

  const CryptoSuite& suite() const {
    return crypto == "fake" ? CryptoSuite::Fake() : CryptoSuite::Real();
  }
  Result<Ecosystem> load() const {
    if (keyring.empty()) return Ecosystem::FromSeed(suite().signatures, ecosystem_seed);
    Result<Bytes> text = read_file(keyring);
    if (!text.ok()) return text.error();
    std::string scheme;
    Result<Ecosystem> e = keyring_from_json(as_text(*text), &scheme);
    if (e.ok() && scheme != suite().signatures.name()) {
      return MakeError(ErrorCode::kMalformed,
                       "keyring is for " + scheme + ", not " + suite().signatures.name());
    }
    return e;
  }
  void add_options(CLI::App* app) {
    app->add_option("--keyring", keyring, "keyring JSON from `keys gen`");
    app->add_option("--ecosystem-seed", ecosystem_seed, "derive keys from this seed");
    app->add_option("--crypto", crypto, "real or fake")->check(CLI::IsMember({"real", "fake"}));
  }
};

Result<Scenario> scenario_with_env(const std::string& path) {
  Result<Scenario> sc = load_scenario(path);
  if (!sc.ok()) return sc.error();
  if (Status s = sc->spec.costs.apply_environment(); !s) return s.error();
  return sc;
}

int cmd_run(const std::string& scenario_path, std::optional<std::uint64_t> seed,
            const std::string& trace_out, const std::string& stats_out) {
  Result<Scenario> sc = scenario_with_env(scenario_path);
  if (!sc.ok()) return report(sc.error());
  Result<RunResult> r = run_scenario(std::move(*sc), seed);
  if (!r.ok()) return report(r.error());
  if (!trace_out.empty()) {
    if (Status s = write_file(trace_out, r->trace_tsv); !s) return report(s.error());
  }
  if (!stats_out.empty()) {
    if (Status s = write_file(stats_out, r->stats_json + "\n"); !s) return report(s.error());
  }
  std::cout << "cycles " << r->cycles << "\ndigest " << to_hex(r->digest) << "\n";
  return kExitOk;
}

int cmd_package_build(const KeySource& keys, const std::string& config_path,
                      const std::string& binary_path, const std::string& out) {
  Result<Bytes> cfg_text = read_file(config_path);
  if (!cfg_text.ok()) return report(cfg_text.error());
  Result<EnclaveConfig> cfg = parse_config_json(as_text(*cfg_text));
  if (!cfg.ok()) return report(cfg.error());
  Result<Bytes> binary = read_file(binary_path);
  if (!binary.ok()) return report(binary.error());
  Result<Ecosystem> eco = keys.load();
  if (!eco.ok()) return report(eco.error());
  const Bytes pkg = build_package(keys.suite().signatures, *cfg, *binary, eco->provider_sk,
                                  eco->provider_cert)
                        .serialize();
  if (Status s = write_file(out, as_text(pkg)); !s) return report(s.error());
  std::cout << "wrote " << out << " (" << pkg.size() << " bytes, label "
            << label_name(cfg->label) << ")\n";
  return kExitOk;
}

int cmd_package_verify(const KeySource& keys, const std::string& path) {
  Result<Bytes> bytes = read_file(path);
  if (!bytes.ok()) return report(bytes.error());
  Result<Ecosystem> eco = keys.load();
  if (!eco.ok()) return report(eco.error());
  Result<VerifiedPackage> v = verify_package(keys.suite().signatures, *bytes, eco->store_root);
  if (!v.ok()) {
    std::cout << "rejected: " << to_string(v.code()) << ": " << v.error().message << "\n";
    return kExitLeaked;
  }
  std::cout << "ok: label " << label_name(v->config.label) << ", version " << v->config.version
            << ", type " << to_string(v->config.enclave_type) << ", binary "
            << v->package.binary.size() << " bytes\n";
  return kExitOk;
}

Result<std::array<std::uint8_t, 32>> parse_nonce(const std::string& hex) {
  Bytes b;
  if (!from_hex(hex, b) || b.size() > 32) {
    return MakeError(ErrorCode::kMalformed, "nonce must be at most 32 hex-encoded bytes");
  }
  std::array<std::uint8_t, 32> n{};
  std::copy(b.begin(), b.end(), n.begin());
  return n;
}

// Runs a scenario, then has the SM attest `label` and writes the report.
int cmd_attest_run(const std::string& scenario_path, const std::string& label,
                   const std::string& nonce_hex, const std::string& out) {
  Result<std::array<std::uint8_t, 32>> nonce = parse_nonce(nonce_hex);
  if (!nonce.ok()) return report(nonce.error());
  Result<Scenario> sc = scenario_with_env(scenario_path);
  if (!sc.ok()) return report(sc.error());
  Result<std::unique_ptr<ScenarioRunner>> runner = ScenarioRunner::Create(*sc);
  if (!runner.ok()) return report(runner.error());
  if (Status s = (*runner)->run_events(); !s) return report(s.error());
  Result<EnclaveId> eid = (*runner)->actor_eid(label);
  if (!eid.ok()) return report(eid.error());
  Result<AttestationReport> rep = (*runner)->sim().sm().attest(0, *eid, *nonce);
  if (!rep.ok()) return report(rep.error());
  if (Status s = write_file(out, as_text(rep->serialize())); !s) return report(s.error());
  std::cout << "wrote " << out << "\n";
  return kExitOk;
}

int cmd_attest_verify(const KeySource& keys, const std::string& report_path,
                      const std::string& package_path, const std::string& nonce_hex) {
  Result<std::array<std::uint8_t, 32>> nonce = parse_nonce(nonce_hex);
  if (!nonce.ok()) return report(nonce.error());
  Result<Bytes> rep_bytes = read_file(report_path);
  if (!rep_bytes.ok()) return report(rep_bytes.error());
  Result<AttestationReport> rep = AttestationReport::Parse(*rep_bytes);
  if (!rep.ok()) return report(rep.error());
  Result<Bytes> pkg_bytes = read_file(package_path);
  if (!pkg_bytes.ok()) return report(pkg_bytes.error());
  Result<EnclavePackage> pkg = parse_package(*pkg_bytes);
  if (!pkg.ok()) return report(pkg.error());
  Result<Ecosystem> eco = keys.load();
  if (!eco.ok()) return report(eco.error());
  const bool ok = provider_verify_report(keys.suite().signatures, *rep, eco->vendor_root,
                                         pkg->sig, *nonce);
  std::cout << (ok ? "verified" : "rejected") << "\n";
  return ok ? kExitOk : kExitLeaked;
}

int cmd_attack(const std::string& name, const std::string& scenario_path, bool negative,
               std::optional<std::uint64_t> seed, std::optional<int> trials) {
  Scenario sc;
  if (scenario_path.empty()) {
    sc = builtin_attack_scenario();
  } else {
    Result<Scenario> loaded = scenario_with_env(scenario_path);
    if (!loaded.ok()) return report(loaded.error());
    sc = std::move(*loaded);
  }
  if (seed) sc.spec.seed = *seed;
  AttackParams params;
  if (Status s = params.apply(sc.attack); !s) return report(s.error());
  params.negative_control = negative;
  if (trials) params.trials = *trials;
  Result<AttackResult> r = run_attack(name, sc, params);
  if (!r.ok()) return report(r.error());
  std::cout << name << ": " << to_string(r->verdict) << " (" << r->detail << ")\n";
  return r->verdict == AttackVerdict::kContained ? kExitOk : kExitLeaked;
}

int cmd_keys_gen(std::uint64_t seed, const std::string& crypto, const std::string& out) {
  const CryptoSuite& suite = crypto == "fake" ? CryptoSuite::Fake() : CryptoSuite::Real();
  const std::string text =
      keyring_to_json(Ecosystem::FromSeed(suite.signatures, seed), suite.signatures);
  if (out.empty() || out == "-") {
    std::cout << text;
    return kExitOk;
  }
  if (Status s = write_file(out, text); !s) return report(s.error());
  return kExitOk;
}

int cmd_stats_compare(const std::string& a_path, const std::string& b_path) {
  Result<Bytes> a = read_file(a_path);
  if (!a.ok()) return report(a.error());
  Result<Bytes> b = read_file(b_path);
  if (!b.ok()) return report(b.error());
  auto ja = nlohmann::json::parse(as_text(*a), nullptr, false);
  auto jb = nlohmann::json::parse(as_text(*b), nullptr, false);
  if (ja.is_discarded() || jb.is_discarded() || !ja.contains("cycles") || !jb.contains("cycles")) {
    return report(MakeError(ErrorCode::kMalformed, "stats files need a cycles field"));
  }
  const double ca = ja["cycles"].get<double>();
  const double cb = jb["cycles"].get<double>();
  if (cb == 0) return report(MakeError(ErrorCode::kMalformed, "baseline has zero cycles"));
  std::printf("cycles %s %.0f\ncycles %s %.0f\noverhead %.6f\n", a_path.c_str(), ca,
              b_path.c_str(), cb, (ca - cb) / cb);
  return kExitOk;
}

int cmd_overhead(const std::string& plot_out, std::uint64_t seed) {
  MachineSpec spec;
  spec.seed = seed;
  Result<std::vector<OverheadPoint>> pts = partition_overhead(spec, {1, 2, 4, 8, 16});
  if (!pts.ok()) return report(pts.error());
  std::ostringstream csv;
  csv << "ways,cycles,hits,misses,overhead\n";
  for (const OverheadPoint& p : *pts) {
    csv << p.ways << ',' << p.cycles << ',' << p.hits << ',' << p.misses << ',' << p.overhead
        << '\n';
  }
  std::cout << csv.str();
  if (!plot_out.empty()) {
    if (Status s = write_file(plot_out, csv.str()); !s) return report(s.error());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cure-sim: behavioral simulator of an eid-tagged enclave architecture"};
  app.require_subcommand(1);
  int rc = kExitOk;

  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::string trace_out;
  std::string stats_out;
  auto* run = app.add_subcommand("run", "run a scenario");
  run->add_option("--scenario", scenario_path, "scenario JSON")->required();
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--trace-out", trace_out, "write the TSV trace here");
  run->add_option("--stats-out", stats_out, "write the stats JSON here");
  run->callback([&] { rc = cmd_run(scenario_path, seed, trace_out, stats_out); });

  auto* package = app.add_subcommand("package", "build or verify .cep packages");
  package->require_subcommand(1);
  KeySource build_keys;
  std::string config_path;
  std::string binary_path;
  std::string out_path;
  auto* build = package->add_subcommand("build", "sign a config and binary into a package");
  build->add_option("--config", config_path, "enclave config JSON")->required();
  build->add_option("--binary", binary_path, "enclave binary")->required();
  build->add_option("--out", out_path, "output .cep")->required();
  build_keys.add_options(build);
  build->callback([&] { rc = cmd_package_build(build_keys, config_path, binary_path, out_path); });
  KeySource verify_keys;
  std::string package_path;
  auto* verify = package->add_subcommand("verify", "check a package's chain and signature");
  verify->add_option("package", package_path, ".cep file")->required();
  verify_keys.add_options(verify);
  verify->callback([&] { rc = cmd_package_verify(verify_keys, package_path); });

  auto* attest = app.add_subcommand("attest", "produce or check attestation reports");
  attest->require_subcommand(1);
  std::string label;
  std::string nonce = "00";
  std::string report_path;
  auto* attest_run = attest->add_subcommand("run", "run a scenario and attest an enclave");
  attest_run->add_option("--scenario", scenario_path, "scenario JSON")->required();
  attest_run->add_option("--label", label, "live enclave to attest")->required();
  attest_run->add_option("--nonce", nonce, "verifier nonce, hex");
  attest_run->add_option("--out", report_path, "report output")->required();
  attest_run->callback([&] { rc = cmd_attest_run(scenario_path, label, nonce, report_path); });
  KeySource attest_keys;
  auto* attest_verify = attest->add_subcommand("verify", "verify a report as the provider");
  attest_verify->add_option("--report", report_path, "report file")->required();
  attest_verify->add_option("--package", package_path, "the provider's .cep")->required();
  attest_verify->add_option("--nonce", nonce, "nonce the verifier sent, hex");
  attest_keys.add_options(attest_verify);
  attest_verify->callback(
      [&] { rc = cmd_attest_verify(attest_keys, report_path, package_path, nonce); });

  std::string attack_name;
  bool negative = false;
  std::optional<int> trials;
  auto* attack = app.add_subcommand("attack", "run an attack; exit 0 contained, 2 leaked");
  attack->add_option("name", attack_name, "attack")
      ->required()
      ->check(CLI::IsMember(attack_names()));
  attack->add_option("--scenario", scenario_path, "scenario JSON (default: built-in)");
  attack->add_flag("--negative-control", negative, "disable the targeted defense");
  attack->add_option("--seed", seed, "override the scenario seed");
  attack->add_option("--trials", trials, "prime_probe test trials");
  attack->callback([&] { rc = cmd_attack(attack_name, scenario_path, negative, seed, trials); });

  auto* keys = app.add_subcommand("keys", "ecosystem key material");
  keys->require_subcommand(1);
  std::uint64_t key_seed = 1;
  std::string key_crypto = "real";
  auto* gen = keys->add_subcommand("gen", "derive a keyring from a seed");
  gen->add_option("--seed", key_seed, "ecosystem seed");
  gen->add_option("--crypto", key_crypto, "real or fake")->check(CLI::IsMember({"real", "fake"}));
  gen->add_option("--out", out_path, "output file (default stdout)");
  gen->callback([&] { rc = cmd_keys_gen(key_seed, key_crypto, out_path); });

  auto* stats = app.add_subcommand("stats", "stats documents");
  stats->require_subcommand(1);
  std::string stats_a;
  std::string stats_b;
  auto* compare = stats->add_subcommand("compare", "relative cycle overhead of A over B");
  compare->add_option("a", stats_a, "stats JSON")->required();
  compare->add_option("b", stats_b, "baseline stats JSON")->required();
  compare->callback([&] { rc = cmd_stats_compare(stats_a, stats_b); });

  std::string plot_out;
  std::uint64_t overhead_seed = 1;
  auto* overhead = app.add_subcommand("overhead", "way-count sweep of a working-set workload");
  overhead->add_option("--plot-out", plot_out, "CSV output");
  overhead->add_option("--seed", overhead_seed, "simulation seed");
  overhead->callback([&] { rc = cmd_overhead(plot_out, overhead_seed); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }
  return rc;
}
