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

#ifndef CURE_MONITOR_HPP_
#define CURE_MONITOR_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cure/bus.hpp"
#include "cure/cache.hpp"
#include "cure/crypto.hpp"
#include "cure/machine.hpp"
#include "cure/memory.hpp"
#include "cure/package.hpp"
#include "cure/trace.hpp"
#include "cure/types.hpp"

namespace cure {

// Enclave state as stored in the enclave's state area and sealed at
// teardown. Always 64 bytes on the wire:
//   comm_key[32] counter:u64 n:u8 { key[16] }*n zero padding
struct EnclaveState {
  static constexpr std::size_t kBytes = 64;
  static constexpr std::size_t kMaxCustomKeys = 1;
  using CustomKey = std::array<std::uint8_t, 16>;

  AeadKey comm_key{};
  std::uint64_t counter = 0;
  std::vector<CustomKey> custom_keys;

  Bytes serialize() const;
  static Result<EnclaveState> Parse(ByteSpan bytes);
  bool operator==(const EnclaveState&) const = default;
};

// Virtual addresses used by the default enclave page table.
inline constexpr Address kEnclaveCodeVirtual = 0x0040'0000;
inline constexpr Address kEnclaveHeapVirtual = 0x0080'0000;
inline constexpr Address kEnclaveStateVirtual = 0x00C0'0000;
inline constexpr Address kEnclaveSharedVirtual = 0x00C0'1000;

enum class LayoutArea : std::uint8_t { kCode, kPageTables, kState, kHeap, kShared, kOutside };
const char* to_string(LayoutArea a);

// Sub-areas of an enclave region, ascending: code and data, page tables
// (root plus three second-level pages), the state page, heap, and the
// shared window in the top 4 KiB.
struct EnclaveLayout {
  static constexpr std::uint32_t kPageTablePages = 4;

  MemRegion region;
  Address code_base = 0;
  std::uint32_t code_pages = 0;
  Address page_table_base = 0;
  Address state_base = 0;
  Address heap_base = 0;
  Address heap_end = 0;  // exclusive
  MemRegion shared;

  // ResourceUnavailable when the region cannot hold the image plus the
  // fixed areas.
  static Result<EnclaveLayout> Make(const MemRegion& region, std::uint64_t image_bytes);

  LayoutArea area_of(Address physical) const;
  std::vector<Address> spare_table_pages() const;
};

// The page table the SM installs when the OS supplies none: every code page,
// the state page and the shared window.
PageTable default_page_table(const EnclaveLayout& layout);

// Persistent monotonic counter (RPMB analogue). Backed by a file when a path
// is given, otherwise by memory. A missing counter reads as nullopt.
class NvmCounter {
 public:
  NvmCounter() : value_(std::uint64_t{0}) {}
  explicit NvmCounter(std::filesystem::path path) : path_(std::move(path)) {}

  std::optional<std::uint64_t> read() const;
  Status write(std::uint64_t value);
  void erase();

 private:
  std::optional<std::filesystem::path> path_;
  std::optional<std::uint64_t> value_;
};

struct EnclaveRuntime {
  EnclaveId eid;
  EnclaveLayout layout;
  EnclaveType type = EnclaveType::kUser;
  EnclaveConfig config;
  std::optional<PageTableImage> page_table;
  std::vector<int> peripherals;
  std::map<int, std::uint32_t> prior_perm_bitmaps;
  std::map<int, std::optional<MemRegion>> prior_dma;
  std::vector<int> cores;  // kernel type: detached cores
  EnclaveId shared_owner;  // current owner of the shared window
  EnclaveState state_at_setup;
  std::uint64_t trap_notifications = 0;
};

// D_encl: the SM's record for one installed enclave.
struct EnclaveMeta {
  Label label{};
  Signature sig{};
  Certificate provider_cert;
  std::uint32_t format_version = kPackageFormatVersion;
  Bytes config_bytes;
  std::uint64_t binary_bytes = 0;
  AeadKey sealing_key{};
  // Lives in OS-managed storage; the SM trusts only rollback_counter.
  SealedBlob sealed_state;
  std::uint64_t rollback_counter = 0;
  std::uint32_t max_version_set_up = 0;
  std::optional<EnclaveRuntime> runtime;

  bool live() const { return runtime.has_value(); }
};

// S_sm minus the live runtime records.
struct SmState {
  SecretKey device_sk{};
  PublicKey device_pk{};
  Certificate device_cert;
  PublicKey provider_root{};
  std::uint64_t key_counter = 0;
  std::map<Label, EnclaveMeta> enclaves;
  std::set<std::uint8_t> eid_pool;

  // Persistent fields only; the pool and runtimes are rebuilt at boot.
  Bytes serialize() const;
  static Result<SmState> Parse(ByteSpan bytes);
};

struct SmIdentity {
  SecretKey device_sk{};
  Certificate device_cert;
  PublicKey provider_root{};
};

enum class ViolationPolicy : std::uint8_t { kLogOnly, kTeardownRepeatOffender };

struct SmOptions {
  ViolationPolicy policy = ViolationPolicy::kLogOnly;
  std::uint64_t repeat_offender_threshold = 3;
  // Negative control for the page-table escape attack.
  bool verify_page_tables = true;
};

struct SetupRequest {
  Label label{};
  Address region_base = 0;  // chosen by the OS, holds the loaded image
  EnclaveConfig config;     // as handed over by the OS
  std::optional<PageTable> page_table;
};

struct AuditEntry {
  std::uint64_t step = 0;
  ViolationRecord violation;
};

enum class SwitchDirection : std::uint8_t { kToEnclave, kToOs };

// The security monitor. Every public operation is an SM call issued from a
// core: the core traps in (L1 flush, eid 0xF), the SM works with eid 0xF on
// the bus, and the exit path flushes TLB/BTB before restoring identity.
class SecurityMonitor {
 public:
  SecurityMonitor(Machine& machine, Bus& bus, PartitionedCache& cache,
                  PhysicalMemory& memory, Trace& trace, const CryptoSuite& crypto,
                  const SmIdentity& identity, NvmCounter& nvm, SmOptions options = {});

  // Claims the SM and firmware regions at boot.
  Status boot(const MemRegion& sm_region, const MemRegion& firmware_region);

  Result<Label> install(int core, ByteSpan package_bytes);
  // Replaces the signed package of an installed, non-live enclave. Keys and
  // the rollback counter carry over.
  Status update(int core, ByteSpan package_bytes);
  Result<EnclaveId> setup(int core, const SetupRequest& request);
  Status teardown(int core, EnclaveId eid);

  // Composite flush plus an eid change through the gate. kToOs from an
  // interrupt notifies the enclave's trap handler first.
  Status context_switch(int core, SwitchDirection direction, EnclaveId target = {});

  // Delivers `burst` traps of one class to a core. Traps arriving while the
  // SM runs are deferred and reported to the enclave's handler before the
  // switch to the OS.
  TrapOutcome deliver_trap(int core, TrapClass cause, int burst = 1);

  Result<PageTableImage> verify_page_tables(const EnclaveMeta& meta, const EnclaveRuntime& rt,
                                            const PageTable& pt) const;
  Status add_page_mapping(int core, EnclaveId eid, const PageTableEntry& pte);
  Status shared_memory_handoff(int core, EnclaveId enclave, EnclaveId from, EnclaveId to);
  Result<AttestationReport> attest(int core, EnclaveId eid,
                                   const std::array<std::uint8_t, 32>& nonce);
  // Adds `count` exclusive ways to a live enclave's allocation.
  Status allocate_ways(int core, EnclaveId eid, std::uint32_t count);
  Status set_cache_mode(int core, EnclaveId eid, CacheMode mode);

  // Drains the bus violation queue into the audit log, applying the policy.
  std::size_t drain_violations();
  void handle_violation(const ViolationRecord& v);

  Status register_trap_handler(EnclaveId caller, std::function<void(TrapClass)> handler);

  // Sealed S_sm bound to the NVM counter, which is bumped on every seal.
  Result<Bytes> seal_sm_state();
  // Reboot path: no enclave may be live.
  Status restore_sm_state(ByteSpan blob);

  // Untrusted-storage slot for an enclave's sealed state.
  Status store_sealed_state(const Label& label, ByteSpan blob);
  Result<Bytes> load_sealed_state(const Label& label) const;

  const SmState& state() const { return state_; }
  const EnclaveMeta* find(const Label& label) const;
  const EnclaveMeta* find_live(EnclaveId eid) const;
  std::optional<Label> label_of(EnclaveId eid) const;
  std::size_t live_count() const;
  const std::vector<AuditEntry>& audit_log() const { return audit_log_; }
  std::uint64_t ipi_count(EnclaveId eid) const { return ipis_[eid.value()]; }
  SmOptions& options() { return options_; }
  const PublicKey& device_root_hint() const { return state_.device_pk; }

 private:
  class Call;

  EnclaveMeta* find_mut(const Label& label);
  EnclaveMeta* find_live_mut(EnclaveId eid);
  void enter(int core);
  void exit_to(int core, EnclaveId eid);
  void record(int core, const char* op, const Status& s, std::string note);
  Status sm_write(int core, Address address, ByteSpan data);
  Status write_page_table(int core, EnclaveRuntime& rt, const PageTableImage& image);
  AeadKey derive_key(std::string_view purpose);
  AeadKey sm_sealing_key() const;
  Result<EnclaveId> do_setup(int core, const SetupRequest& request);
  Result<int> assign_peripheral(EnclaveRuntime& rt, const PeripheralRequest& request);
  void restore_peripheral(const EnclaveRuntime& rt, int index);
  Status do_teardown(int core, EnclaveMeta& meta);

  Machine& machine_;
  Bus& bus_;
  PartitionedCache& cache_;
  PhysicalMemory& memory_;
  Trace& trace_;
  const CryptoSuite& crypto_;
  NvmCounter& nvm_;
  SmOptions options_;
  SmState state_;
  std::vector<AuditEntry> audit_log_;
  std::array<std::uint64_t, EnclaveId::kCount> ipis_{};
  std::array<std::function<void(TrapClass)>, EnclaveId::kCount> handlers_;
  bool in_teardown_policy_ = false;
};

}  // namespace cure

#endif  // CURE_MONITOR_HPP_
