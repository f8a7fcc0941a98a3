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

#include "cure/crypto.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <memory>
#include <stdexcept>

namespace cure {

namespace {

struct PkeyDeleter {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};
struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;
using CipherCtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

[[noreturn]] void openssl_failure(const char* what) {
  throw std::runtime_error(std::string("OpenSSL failure: ") + what);
}

Digest sha256_concat(std::initializer_list<ByteSpan> parts) {
  MdCtxPtr ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    openssl_failure("sha256 init");
  }
  for (ByteSpan p : parts) {
    if (EVP_DigestUpdate(ctx.get(), p.data(), p.size()) != 1) openssl_failure("sha256");
  }
  Digest d{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), d.data(), &len) != 1) openssl_failure("sha256 final");
  return d;
}

ByteSpan as_bytes(std::string_view s) {
  return ByteSpan(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

}  // namespace

Digest sha256(ByteSpan data) { return sha256_concat({data}); }

PublicKey Ed25519Scheme::public_key(const SecretKey& sk) const {
  PkeyPtr key(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, sk.data(), sk.size()));
  if (!key) openssl_failure("ed25519 private key");
  PublicKey pk{};
  std::size_t len = pk.size();
  if (EVP_PKEY_get_raw_public_key(key.get(), pk.data(), &len) != 1 || len != pk.size()) {
    openssl_failure("ed25519 public key");
  }
  return pk;
}

Signature Ed25519Scheme::sign(const SecretKey& sk, ByteSpan message) const {
  PkeyPtr key(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, sk.data(), sk.size()));
  MdCtxPtr ctx(EVP_MD_CTX_new());
  if (!key || !ctx) openssl_failure("ed25519 sign setup");
  if (EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1) {
    openssl_failure("ed25519 sign init");
  }
  Signature sig{};
  std::size_t len = sig.size();
  if (EVP_DigestSign(ctx.get(), sig.data(), &len, message.data(), message.size()) != 1 ||
      len != sig.size()) {
    openssl_failure("ed25519 sign");
  }
  return sig;
}

bool Ed25519Scheme::verify(const PublicKey& pk, ByteSpan message, const Signature& sig) const {
  PkeyPtr key(EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, pk.data(), pk.size()));
  if (!key) return false;  // not a valid curve point
  MdCtxPtr ctx(EVP_MD_CTX_new());
  if (!ctx) openssl_failure("ed25519 verify setup");
  if (EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1) {
    return false;
  }
  return EVP_DigestVerify(ctx.get(), sig.data(), sig.size(), message.data(),
                          message.size()) == 1;
}

Bytes AesGcmAead::seal(const AeadKey& key, const AeadNonce& nonce, ByteSpan aad,
                       ByteSpan plaintext) const {
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
  if (!ctx) openssl_failure("gcm ctx");
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(nonce.size()),
                          nullptr) != 1 ||
      EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), nonce.data()) != 1) {
    openssl_failure("gcm encrypt init");
  }
  int len = 0;
  if (!aad.empty() && EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(),
                                        static_cast<int>(aad.size())) != 1) {
    openssl_failure("gcm aad");
  }
  Bytes out(plaintext.size() + kAeadTagBytes);
  int written = 0;
  if (!plaintext.empty()) {
    if (EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(),
                          static_cast<int>(plaintext.size())) != 1) {
      openssl_failure("gcm encrypt");
    }
    written = len;
  }
  if (EVP_EncryptFinal_ex(ctx.get(), out.data() + written, &len) != 1) {
    openssl_failure("gcm final");
  }
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kAeadTagBytes,
                          out.data() + plaintext.size()) != 1) {
    openssl_failure("gcm tag");
  }
  return out;
}

std::optional<Bytes> AesGcmAead::open(const AeadKey& key, const AeadNonce& nonce, ByteSpan aad,
                                      ByteSpan sealed) const {
  if (sealed.size() < kAeadTagBytes) return std::nullopt;
  const std::size_t ct_len = sealed.size() - kAeadTagBytes;
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
  if (!ctx) openssl_failure("gcm ctx");
  if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(nonce.size()),
                          nullptr) != 1 ||
      EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), nonce.data()) != 1) {
    openssl_failure("gcm decrypt init");
  }
  int len = 0;
  if (!aad.empty() && EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(),
                                        static_cast<int>(aad.size())) != 1) {
    return std::nullopt;
  }
  Bytes out(ct_len);
  int written = 0;
  if (ct_len > 0) {
    if (EVP_DecryptUpdate(ctx.get(), out.data(), &len, sealed.data(),
                          static_cast<int>(ct_len)) != 1) {
      return std::nullopt;
    }
    written = len;
  }
  Bytes tag(sealed.begin() + static_cast<std::ptrdiff_t>(ct_len), sealed.end());
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kAeadTagBytes, tag.data()) != 1) {
    return std::nullopt;
  }
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + written, &len) != 1) return std::nullopt;
  return out;
}

PublicKey FakeSignatureScheme::public_key(const SecretKey& sk) const {
  return sha256_concat({as_bytes("fake-pk"), sk});
}

Signature FakeSignatureScheme::sign(const SecretKey& sk, ByteSpan message) const {
  PublicKey pk = public_key(sk);
  Digest a = sha256_concat({as_bytes("fake-sig-a"), pk, message});
  Digest b = sha256_concat({as_bytes("fake-sig-b"), message, pk});
  Signature sig{};
  std::copy(a.begin(), a.end(), sig.begin());
  std::copy(b.begin(), b.end(), sig.begin() + 32);
  return sig;
}

bool FakeSignatureScheme::verify(const PublicKey& pk, ByteSpan message,
                                 const Signature& sig) const {
  Digest a = sha256_concat({as_bytes("fake-sig-a"), pk, message});
  Digest b = sha256_concat({as_bytes("fake-sig-b"), message, pk});
  return std::equal(a.begin(), a.end(), sig.begin()) &&
         std::equal(b.begin(), b.end(), sig.begin() + 32);
}

namespace {

void fake_keystream_xor(const AeadKey& key, const AeadNonce& nonce, ByteSpan in,
                        std::uint8_t* out) {
  for (std::size_t block = 0; block * 32 < in.size(); ++block) {
    std::array<std::uint8_t, 8> ctr{};
    for (int i = 0; i < 8; ++i) ctr[i] = static_cast<std::uint8_t>(block >> (8 * i));
    Digest ks = sha256_concat({as_bytes("fake-ks"), key, nonce, ctr});
    for (std::size_t i = 0; i < 32 && block * 32 + i < in.size(); ++i) {
      out[block * 32 + i] = in[block * 32 + i] ^ ks[i];
    }
  }
}

Digest fake_tag(const AeadKey& key, const AeadNonce& nonce, ByteSpan aad, ByteSpan ct) {
  Bytes aad_len;
  put_u64(aad_len, aad.size());
  return sha256_concat({as_bytes("fake-tag"), key, nonce, aad_len, aad, ct});
}

}  // namespace

Bytes FakeAead::seal(const AeadKey& key, const AeadNonce& nonce, ByteSpan aad,
                     ByteSpan plaintext) const {
  Bytes out(plaintext.size() + kAeadTagBytes);
  fake_keystream_xor(key, nonce, plaintext, out.data());
  Digest tag = fake_tag(key, nonce, aad, ByteSpan(out.data(), plaintext.size()));
  std::copy_n(tag.begin(), kAeadTagBytes, out.begin() + static_cast<std::ptrdiff_t>(plaintext.size()));
  return out;
}

std::optional<Bytes> FakeAead::open(const AeadKey& key, const AeadNonce& nonce, ByteSpan aad,
                                    ByteSpan sealed) const {
  if (sealed.size() < kAeadTagBytes) return std::nullopt;
  ByteSpan ct = sealed.first(sealed.size() - kAeadTagBytes);
  Digest tag = fake_tag(key, nonce, aad, ct);
  if (!std::equal(tag.begin(), tag.begin() + kAeadTagBytes, sealed.end() - kAeadTagBytes)) {
    return std::nullopt;
  }
  Bytes out(ct.size());
  fake_keystream_xor(key, nonce, ct, out.data());
  return out;
}

const CryptoSuite& CryptoSuite::Real() {
  static const Ed25519Scheme sig;
  static const AesGcmAead aead;
  static const CryptoSuite suite{sig, aead};
  return suite;
}

const CryptoSuite& CryptoSuite::Fake() {
  static const FakeSignatureScheme sig;
  static const FakeAead aead;
  static const CryptoSuite suite{sig, aead};
  return suite;
}

Drbg::Drbg(std::uint64_t seed, std::string_view domain) {
  Bytes s;
  put_u64(s, seed);
  seed_ = sha256_concat({as_bytes(domain), s});
}

void Drbg::fill(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    Bytes ctr;
    put_u64(ctr, counter_++);
    Digest block = sha256_concat({seed_, ctr});
    std::size_t n = std::min<std::size_t>(block.size(), out.size() - done);
    std::copy_n(block.begin(), n, out.begin() + static_cast<std::ptrdiff_t>(done));
    done += n;
  }
}

}  // namespace cure
