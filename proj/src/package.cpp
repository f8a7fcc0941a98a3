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

#include "cure/package.hpp"

#include <algorithm>

namespace cure {

namespace {
// Config and binary length fields are capped to keep parsing total on fuzz.
constexpr std::uint32_t kMaxFieldBytes = 64u << 20;
constexpr std::uint32_t kMaxPeripherals = 64;
constexpr std::uint32_t kMaxNameBytes = 64;
}  // namespace

Result<Label> make_label(std::string_view name) {
  if (name.size() > 32) return MakeError(ErrorCode::kMalformed, "label longer than 32 bytes");
  Label l{};
  std::copy(name.begin(), name.end(), l.begin());
  return l;
}

std::string label_name(const Label& label) {
  std::string out;
  for (std::uint8_t c : label) {
    if (c == 0) break;
    if (c < 0x20 || c > 0x7E) return to_hex(label);
    out.push_back(static_cast<char>(c));
  }
  for (std::size_t i = out.size(); i < label.size(); ++i) {
    if (label[i] != 0) return to_hex(label);
  }
  return out;
}

const char* to_string(EnclaveType t) {
  switch (t) {
    case EnclaveType::kUser: return "user";
    case EnclaveType::kKernel: return "kernel";
    case EnclaveType::kSub: return "sub";
  }
  return "?";
}

const char* to_string(CacheRequest c) {
  switch (c) {
    case CacheRequest::kNone: return "none";
    case CacheRequest::kBasic: return "basic";
    case CacheRequest::kStrict: return "strict";
  }
  return "?";
}

Status EnclaveConfig::validate() const {
  if (cache_mode == CacheRequest::kStrict && cache_ways < 1) {
    return MakeError(ErrorCode::kMalformed, "strict partitioning needs at least one way");
  }
  if (enclave_type == EnclaveType::kKernel && cores < 1) {
    return MakeError(ErrorCode::kMalformed, "kernel-space enclave needs at least one core");
  }
  if (memory_bytes == 0) return MakeError(ErrorCode::kMalformed, "zero memory request");
  for (const PeripheralRequest& p : peripherals) {
    if (p.name.empty() || p.name.size() > kMaxNameBytes) {
      return MakeError(ErrorCode::kMalformed, "peripheral name length");
    }
  }
  return {};
}

Bytes serialize_config(const EnclaveConfig& c) {
  Bytes out;
  put_bytes(out, c.label);
  put_u32(out, c.version);
  put_u8(out, static_cast<std::uint8_t>(c.enclave_type));
  put_u64(out, c.memory_bytes);
  put_u8(out, static_cast<std::uint8_t>(c.cache_mode));
  put_u32(out, c.cache_ways);
  put_u32(out, c.cores);
  put_u32(out, static_cast<std::uint32_t>(c.peripherals.size()));
  for (const PeripheralRequest& p : c.peripherals) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    put_bytes(out, ByteSpan(reinterpret_cast<const std::uint8_t*>(p.name.data()), p.name.size()));
    put_u8(out, p.exclusive ? 1 : 0);
  }
  return out;
}

Result<EnclaveConfig> parse_config(ByteSpan bytes) {
  auto malformed = [](const char* what) { return MakeError(ErrorCode::kMalformed, what); };
  ByteReader r(bytes);
  EnclaveConfig c;
  std::uint8_t type = 0, mode = 0;
  std::uint32_t n = 0;
  if (!r.array(c.label) || !r.u32(c.version) || !r.u8(type) || !r.u64(c.memory_bytes) ||
      !r.u8(mode) || !r.u32(c.cache_ways) || !r.u32(c.cores) || !r.u32(n)) {
    return malformed("config truncated");
  }
  if (type > 2) return malformed("unknown enclave type");
  if (mode > 2) return malformed("unknown cache mode");
  if (n > kMaxPeripherals) return malformed("too many peripherals");
  c.enclave_type = static_cast<EnclaveType>(type);
  c.cache_mode = static_cast<CacheRequest>(mode);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint32_t len = 0;
    Bytes name;
    std::uint8_t excl = 0;
    if (!r.u32(len) || len > kMaxNameBytes || !r.bytes(len, name) || !r.u8(excl)) {
      return malformed("peripheral entry");
    }
    if (excl > 1) return malformed("exclusive flag");
    c.peripherals.push_back(PeripheralRequest{std::string(name.begin(), name.end()), excl == 1});
  }
  if (r.remaining() != 0) return malformed("trailing bytes after config");
  Status s = c.validate();
  if (!s) return s.error();
  return c;
}

Bytes Certificate::serialize() const {
  Bytes out;
  put_bytes(out, subject_key);
  put_bytes(out, issuer_sig);
  return out;
}

Result<Certificate> Certificate::Parse(ByteSpan bytes) {
  if (bytes.size() != kBytes) return MakeError(ErrorCode::kTruncated, "certificate length");
  ByteReader r(bytes);
  Certificate c;
  (void)r.array(c.subject_key);
  (void)r.array(c.issuer_sig);
  return c;
}

Certificate issue_certificate(const SignatureScheme& scheme, const SecretKey& issuer,
                              const PublicKey& subject) {
  return Certificate{subject, scheme.sign(issuer, subject)};
}

bool verify_certificate(const SignatureScheme& scheme, const Certificate& cert,
                        const PublicKey& root) {
  return scheme.verify(root, cert.subject_key, cert.issuer_sig);
}

Bytes signed_region(std::uint32_t format_version, ByteSpan config_bytes, ByteSpan binary) {
  Bytes out;
  put_bytes(out, kPackageMagic);
  put_u32(out, format_version);
  put_u32(out, static_cast<std::uint32_t>(config_bytes.size()));
  put_bytes(out, config_bytes);
  put_u32(out, static_cast<std::uint32_t>(binary.size()));
  put_bytes(out, binary);
  return out;
}

Bytes EnclavePackage::serialize() const {
  Bytes out = signed_region(format_version, config_bytes, binary);
  put_bytes(out, sig);
  Bytes cert_bytes = cert.serialize();
  put_u32(out, static_cast<std::uint32_t>(cert_bytes.size()));
  put_bytes(out, cert_bytes);
  return out;
}

EnclavePackage build_package(const SignatureScheme& scheme, const EnclaveConfig& config,
                             ByteSpan binary, const SecretKey& provider_key,
                             const Certificate& provider_cert) {
  EnclavePackage p;
  p.config_bytes = serialize_config(config);
  p.binary.assign(binary.begin(), binary.end());
  p.cert = provider_cert;
  p.sig = scheme.sign(provider_key, signed_region(p.format_version, p.config_bytes, p.binary));
  return p;
}

Result<EnclavePackage> parse_package(ByteSpan bytes) {
  auto truncated = [](const char* what) { return MakeError(ErrorCode::kTruncated, what); };
  if (bytes.size() < kPackageMagic.size()) return truncated("shorter than the magic");
  if (!std::equal(kPackageMagic.begin(), kPackageMagic.end(), bytes.begin())) {
    return MakeError(ErrorCode::kBadMagic, "not a CURE package");
  }
  ByteReader r(bytes.subspan(kPackageMagic.size()));
  EnclavePackage p;
  std::uint32_t len = 0;
  if (!r.u32(p.format_version)) return truncated("format version");
  if (p.format_version != kPackageFormatVersion) {
    return MakeError(ErrorCode::kMalformed, "unsupported package format version");
  }
  if (!r.u32(len)) return truncated("config length");
  if (len > kMaxFieldBytes || !r.bytes(len, p.config_bytes)) return truncated("config");
  if (!r.u32(len)) return truncated("binary length");
  if (len > kMaxFieldBytes || !r.bytes(len, p.binary)) return truncated("binary");
  if (!r.array(p.sig)) return truncated("signature");
  if (!r.u32(len)) return truncated("certificate length");
  if (len != Certificate::kBytes) {
    return len > r.remaining() ? truncated("certificate")
                               : MakeError(ErrorCode::kMalformed, "certificate length");
  }
  Bytes cert_bytes;
  if (!r.bytes(len, cert_bytes)) return truncated("certificate");
  if (r.remaining() != 0) return MakeError(ErrorCode::kMalformed, "trailing bytes");
  p.cert = *Certificate::Parse(cert_bytes);
  return p;
}

bool verify_enclave_signature(const SignatureScheme& scheme, const Certificate& cert,
                              std::uint32_t format_version, ByteSpan config_bytes,
                              ByteSpan binary, const Signature& sig) {
  return scheme.verify(cert.subject_key, signed_region(format_version, config_bytes, binary),
                       sig);
}

Result<VerifiedPackage> verify_package(const SignatureScheme& scheme, ByteSpan bytes,
                                       const PublicKey& root) {
  Result<EnclavePackage> parsed = parse_package(bytes);
  if (!parsed.ok()) return parsed.error();
  EnclavePackage& p = *parsed;
  if (!verify_certificate(scheme, p.cert, root)) {
    return MakeError(ErrorCode::kBadCertChain, "provider certificate not issued by the root");
  }
  if (!verify_enclave_signature(scheme, p.cert, p.format_version, p.config_bytes, p.binary,
                                p.sig)) {
    return MakeError(ErrorCode::kBadSignature, "enclave signature does not verify");
  }
  Result<EnclaveConfig> config = parse_config(p.config_bytes);
  if (!config.ok()) return config.error();
  return VerifiedPackage{std::move(p), std::move(*config)};
}

Bytes SealedBlob::serialize() const {
  Bytes out;
  put_bytes(out, nonce);
  put_u64(out, counter);
  put_u32(out, static_cast<std::uint32_t>(ciphertext.size()));
  put_bytes(out, ciphertext);
  return out;
}

Result<SealedBlob> SealedBlob::Parse(ByteSpan bytes) {
  ByteReader r(bytes);
  SealedBlob b;
  std::uint32_t len = 0;
  if (!r.array(b.nonce) || !r.u64(b.counter) || !r.u32(len) || len > kMaxFieldBytes ||
      !r.bytes(len, b.ciphertext)) {
    return MakeError(ErrorCode::kTruncated, "sealed blob");
  }
  if (r.remaining() != 0) return MakeError(ErrorCode::kMalformed, "trailing bytes");
  if (b.ciphertext.size() < kAeadTagBytes) return MakeError(ErrorCode::kTruncated, "tag");
  return b;
}

AeadNonce derive_nonce(ByteSpan domain, std::uint64_t counter) {
  Digest d = sha256(domain);
  AeadNonce n{};
  std::copy_n(d.begin(), 4, n.begin());
  for (int i = 0; i < 8; ++i) n[4 + i] = static_cast<std::uint8_t>(counter >> (8 * i));
  return n;
}

namespace {
Bytes counter_aad(std::uint64_t counter) {
  Bytes aad;
  put_u64(aad, counter);
  return aad;
}
}  // namespace

SealedBlob seal(const Aead& aead, const AeadKey& key, ByteSpan plaintext,
                std::uint64_t counter, ByteSpan domain) {
  SealedBlob b;
  b.nonce = derive_nonce(domain, counter);
  b.counter = counter;
  b.ciphertext = aead.seal(key, b.nonce, counter_aad(counter), plaintext);
  return b;
}

Result<Bytes> unseal(const Aead& aead, const AeadKey& key, const SealedBlob& blob,
                     std::uint64_t expected_counter) {
  std::optional<Bytes> plain = aead.open(key, blob.nonce, counter_aad(blob.counter),
                                         blob.ciphertext);
  if (!plain) return MakeError(ErrorCode::kTamperDetected, "authentication failed");
  if (blob.counter != expected_counter) {
    return MakeError(ErrorCode::kRollbackDetected,
                     "sealed counter " + std::to_string(blob.counter) + ", expected " +
                         std::to_string(expected_counter));
  }
  return std::move(*plain);
}

Bytes attestation_message(const Signature& enclave_sig,
                          const std::array<std::uint8_t, 32>& nonce) {
  Bytes m;
  put_bytes(m, enclave_sig);
  put_bytes(m, nonce);
  return m;
}

Bytes AttestationReport::serialize() const {
  Bytes out;
  put_bytes(out, enclave_sig);
  put_bytes(out, nonce);
  put_bytes(out, report_sig);
  put_bytes(out, device_cert.serialize());
  return out;
}

Result<AttestationReport> AttestationReport::Parse(ByteSpan bytes) {
  ByteReader r(bytes);
  AttestationReport a;
  Bytes cert;
  if (!r.array(a.enclave_sig) || !r.array(a.nonce) || !r.array(a.report_sig) ||
      !r.bytes(Certificate::kBytes, cert)) {
    return MakeError(ErrorCode::kTruncated, "attestation report");
  }
  if (r.remaining() != 0) return MakeError(ErrorCode::kMalformed, "trailing bytes");
  a.device_cert = *Certificate::Parse(cert);
  return a;
}

bool provider_verify_report(const SignatureScheme& scheme, const AttestationReport& report,
                            const PublicKey& device_root, const Signature& expected_enclave_sig,
                            const std::array<std::uint8_t, 32>& nonce,
                            const RevocationList& revocations) {
  if (!verify_certificate(scheme, report.device_cert, device_root)) return false;
  if (revocations.is_revoked(report.device_cert)) return false;
  if (report.enclave_sig != expected_enclave_sig || report.nonce != nonce) return false;
  return scheme.verify(report.device_cert.subject_key,
                       attestation_message(expected_enclave_sig, nonce), report.report_sig);
}

Ecosystem Ecosystem::FromSeed(const SignatureScheme& scheme, std::uint64_t seed) {
  Drbg drbg(seed, "cure-ecosystem");
  Ecosystem e;
  e.store_root_sk = drbg.bytes<32>();
  e.store_root = scheme.public_key(e.store_root_sk);
  e.provider_sk = drbg.bytes<32>();
  e.provider_cert = issue_certificate(scheme, e.store_root_sk, scheme.public_key(e.provider_sk));
  e.vendor_root_sk = drbg.bytes<32>();
  e.vendor_root = scheme.public_key(e.vendor_root_sk);
  e.device_sk = drbg.bytes<32>();
  e.device_cert = issue_certificate(scheme, e.vendor_root_sk, scheme.public_key(e.device_sk));
  return e;
}

}  // namespace cure
