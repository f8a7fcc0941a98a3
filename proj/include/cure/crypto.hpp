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

#ifndef CURE_CRYPTO_HPP_
#define CURE_CRYPTO_HPP_

#include <array>
#include <cstdint>
#include <optional>

#include "cure/types.hpp"

namespace cure {

using Digest = std::array<std::uint8_t, 32>;
using SecretKey = std::array<std::uint8_t, 32>;  // signing seed
using PublicKey = std::array<std::uint8_t, 32>;
using Signature = std::array<std::uint8_t, 64>;
using AeadKey = std::array<std::uint8_t, 32>;
using AeadNonce = std::array<std::uint8_t, 12>;

inline constexpr std::size_t kAeadTagBytes = 16;

Digest sha256(ByteSpan data);

// Digital signature scheme with 32-byte keys and 64-byte signatures.
class SignatureScheme {
 public:
  virtual ~SignatureScheme() = default;
  virtual const char* name() const = 0;
  virtual PublicKey public_key(const SecretKey& sk) const = 0;
  virtual Signature sign(const SecretKey& sk, ByteSpan message) const = 0;
  virtual bool verify(const PublicKey& pk, ByteSpan message, const Signature& sig) const = 0;
};

// Authenticated encryption with associated data; 16-byte tag appended to the
// ciphertext.
class Aead {
 public:
  virtual ~Aead() = default;
  virtual const char* name() const = 0;
  virtual Bytes seal(const AeadKey& key, const AeadNonce& nonce, ByteSpan aad,
                     ByteSpan plaintext) const = 0;
  virtual std::optional<Bytes> open(const AeadKey& key, const AeadNonce& nonce,
                                    ByteSpan aad, ByteSpan sealed) const = 0;
};

// Ed25519 via OpenSSL.
class Ed25519Scheme final : public SignatureScheme {
 public:
  const char* name() const override { return "ed25519"; }
  PublicKey public_key(const SecretKey& sk) const override;
  Signature sign(const SecretKey& sk, ByteSpan message) const override;
  bool verify(const PublicKey& pk, ByteSpan message, const Signature& sig) const override;
};

// AES-256-GCM via OpenSSL.
class AesGcmAead final : public Aead {
 public:
  const char* name() const override { return "aes-256-gcm"; }
  Bytes seal(const AeadKey& key, const AeadNonce& nonce, ByteSpan aad,
             ByteSpan plaintext) const override;
  std::optional<Bytes> open(const AeadKey& key, const AeadNonce& nonce, ByteSpan aad,
                            ByteSpan sealed) const override;
};

// Deterministic hash-based stand-ins with the same sizes and accept/reject
// behaviour on honest and perturbed inputs. Not secure: the "signature" can
// be recomputed from the public key.
class FakeSignatureScheme final : public SignatureScheme {
 public:
  const char* name() const override { return "fake-sig"; }
  PublicKey public_key(const SecretKey& sk) const override;
  Signature sign(const SecretKey& sk, ByteSpan message) const override;
  bool verify(const PublicKey& pk, ByteSpan message, const Signature& sig) const override;
};

class FakeAead final : public Aead {
 public:
  const char* name() const override { return "fake-aead"; }
  Bytes seal(const AeadKey& key, const AeadNonce& nonce, ByteSpan aad,
             ByteSpan plaintext) const override;
  std::optional<Bytes> open(const AeadKey& key, const AeadNonce& nonce, ByteSpan aad,
                            ByteSpan sealed) const override;
};

struct CryptoSuite {
  const SignatureScheme& signatures;
  const Aead& aead;

  static const CryptoSuite& Real();
  static const CryptoSuite& Fake();
};

// SHA-256 in counter mode over a 32-byte seed. Deterministic key material
// for simulated key generation.
class Drbg {
 public:
  explicit Drbg(std::uint64_t seed, std::string_view domain = "cure-sim");
  void fill(std::span<std::uint8_t> out);
  template <std::size_t N>
  std::array<std::uint8_t, N> bytes() {
    std::array<std::uint8_t, N> out{};
    fill(out);
    return out;
  }

 private:
  Digest seed_{};
  std::uint64_t counter_ = 0;
};

}  // namespace cure

#endif  // CURE_CRYPTO_HPP_
