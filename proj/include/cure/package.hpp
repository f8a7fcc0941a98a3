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

#ifndef CURE_PACKAGE_HPP_
#define CURE_PACKAGE_HPP_

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "cure/crypto.hpp"
#include "cure/types.hpp"

namespace cure {

using Label = std::array<std::uint8_t, 32>;

// Zero-padded ASCII label; fails for names longer than 32 bytes.
Result<Label> make_label(std::string_view name);
// Printable form: the ASCII prefix up to the first zero, or hex otherwise.
std::string label_name(const Label& label);

enum class EnclaveType : std::uint8_t { kUser = 0, kKernel = 1, kSub = 2 };
enum class CacheRequest : std::uint8_t { kNone = 0, kBasic = 1, kStrict = 2 };

const char* to_string(EnclaveType t);
const char* to_string(CacheRequest c);

struct PeripheralRequest {
  std::string name;
  bool exclusive = true;
  bool operator==(const PeripheralRequest&) const = default;
};

// Resource requirements shipped with an enclave and covered by its
// signature.
struct EnclaveConfig {
  Label label{};
  std::uint32_t version = 1;
  EnclaveType enclave_type = EnclaveType::kUser;
  std::uint64_t memory_bytes = 64 * 1024;
  CacheRequest cache_mode = CacheRequest::kNone;
  std::uint32_t cache_ways = 0;
  std::uint32_t cores = 0;
  std::vector<PeripheralRequest> peripherals;

  Status validate() const;
  bool operator==(const EnclaveConfig&) const = default;
};

// Fixed-order little-endian encoding:
//   label[32] version:u32 type:u8 memory:u64 cache_mode:u8 cache_ways:u32
//   cores:u32 n:u32 { name_len:u32 name[name_len] exclusive:u8 }*n
Bytes serialize_config(const EnclaveConfig& config);
Result<EnclaveConfig> parse_config(ByteSpan bytes);

// Binary certificate: subject_key[32] ‖ issuer_sig[64], the signature
// covering the subject key.
struct Certificate {
  PublicKey subject_key{};
  Signature issuer_sig{};

  static constexpr std::size_t kBytes = 96;
  Bytes serialize() const;
  static Result<Certificate> Parse(ByteSpan bytes);
  bool operator==(const Certificate&) const = default;
};

Certificate issue_certificate(const SignatureScheme& scheme, const SecretKey& issuer,
                              const PublicKey& subject);
bool verify_certificate(const SignatureScheme& scheme, const Certificate& cert,
                        const PublicKey& root);

// Verifier-local revocation list keyed by subject key.
struct RevocationList {
  std::set<PublicKey> revoked;
  bool is_revoked(const Certificate& c) const { return revoked.count(c.subject_key) != 0; }
};

inline constexpr std::array<std::uint8_t, 4> kPackageMagic = {0x43, 0x55, 0x52, 0x45};
inline constexpr std::uint32_t kPackageFormatVersion = 1;

// Package file (.cep):
//   magic[4] format_version:u32 config_len:u32 config binary_len:u32 binary
//   sig[64] cert_len:u32 cert
// sig covers every byte before it.
struct EnclavePackage {
  std::uint32_t format_version = kPackageFormatVersion;
  Bytes config_bytes;
  Bytes binary;
  Signature sig{};
  Certificate cert;

  Bytes serialize() const;
};

Bytes signed_region(std::uint32_t format_version, ByteSpan config_bytes, ByteSpan binary);

EnclavePackage build_package(const SignatureScheme& scheme, const EnclaveConfig& config,
                             ByteSpan binary, const SecretKey& provider_key,
                             const Certificate& provider_cert);

// Structural parse only (BadMagic / Truncated / Malformed).
Result<EnclavePackage> parse_package(ByteSpan bytes);

struct VerifiedPackage {
  EnclavePackage package;
  EnclaveConfig config;
};

// Magic and lengths, then certificate chain, then signature, then the config.
Result<VerifiedPackage> verify_package(const SignatureScheme& scheme, ByteSpan bytes,
                                       const PublicKey& root);

bool verify_enclave_signature(const SignatureScheme& scheme, const Certificate& cert,
                              std::uint32_t format_version, ByteSpan config_bytes,
                              ByteSpan binary, const Signature& sig);

// Sealed container: nonce[12] counter:u64 len:u32 ciphertext‖tag[len].
// The counter is bound as associated data; the nonce is derived from the
// counter and a domain label so one key never sees a repeated nonce.
struct SealedBlob {
  AeadNonce nonce{};
  std::uint64_t counter = 0;
  Bytes ciphertext;  // includes the 16-byte tag

  Bytes serialize() const;
  static Result<SealedBlob> Parse(ByteSpan bytes);
  bool operator==(const SealedBlob&) const = default;
};

AeadNonce derive_nonce(ByteSpan domain, std::uint64_t counter);

SealedBlob seal(const Aead& aead, const AeadKey& key, ByteSpan plaintext,
                std::uint64_t counter, ByteSpan domain = {});
// TamperDetected when authentication fails; RollbackDetected when the blob
// is authentic but carries a counter other than expected_counter.
Result<Bytes> unseal(const Aead& aead, const AeadKey& key, const SealedBlob& blob,
                     std::uint64_t expected_counter);

// Integrity report: device signature over (Sig_encl ‖ nonce) plus Cert_d.
struct AttestationReport {
  Signature enclave_sig{};
  std::array<std::uint8_t, 32> nonce{};
  Signature report_sig{};
  Certificate device_cert;

  Bytes serialize() const;
  static Result<AttestationReport> Parse(ByteSpan bytes);
};

Bytes attestation_message(const Signature& enclave_sig,
                          const std::array<std::uint8_t, 32>& nonce);

bool provider_verify_report(const SignatureScheme& scheme, const AttestationReport& report,
                            const PublicKey& device_root, const Signature& expected_enclave_sig,
                            const std::array<std::uint8_t, 32>& nonce,
                            const RevocationList& revocations = {});

// Keys and certificates of the three ecosystem roles, derived from a seed.
struct Ecosystem {
  SecretKey store_root_sk{};
  PublicKey store_root{};  // Chain_p
  SecretKey provider_sk{};
  Certificate provider_cert;
  SecretKey vendor_root_sk{};
  PublicKey vendor_root{};  // Chain_d
  SecretKey device_sk{};
  Certificate device_cert;

  static Ecosystem FromSeed(const SignatureScheme& scheme, std::uint64_t seed);
};

}  // namespace cure

#endif  // CURE_PACKAGE_HPP_
