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

#ifndef CURE_TYPES_HPP_
#define CURE_TYPES_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace cure {

using Address = std::uint32_t;
using Cycles = std::uint64_t;
using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

// 4-bit execution-context identifier carried on every A/C bus transaction.
class EnclaveId {
 public:
  static constexpr std::uint8_t kOsValue = 0x0;
  static constexpr std::uint8_t kFirmwareValue = 0xE;
  static constexpr std::uint8_t kSmValue = 0xF;
  static constexpr std::uint8_t kFirstPool = 0x1;
  static constexpr std::uint8_t kLastPool = 0xD;
  static constexpr int kPoolSize = kLastPool - kFirstPool + 1;
  static constexpr int kCount = 16;

  constexpr EnclaveId() = default;
  constexpr explicit EnclaveId(std::uint8_t value) : value_(value & 0xF) {}

  static constexpr EnclaveId Os() { return EnclaveId(kOsValue); }
  static constexpr EnclaveId Firmware() { return EnclaveId(kFirmwareValue); }
  static constexpr EnclaveId Sm() { return EnclaveId(kSmValue); }

  constexpr std::uint8_t value() const { return value_; }
  constexpr bool is_os() const { return value_ == kOsValue; }
  constexpr bool is_firmware() const { return value_ == kFirmwareValue; }
  constexpr bool is_sm() const { return value_ == kSmValue; }
  constexpr bool is_pool() const {
    return value_ >= kFirstPool && value_ <= kLastPool;
  }

  constexpr auto operator<=>(const EnclaveId&) const = default;

 private:
  std::uint8_t value_ = kOsValue;
};

// "0x3", "0xf": the form used in traces and logs.
std::string to_string(EnclaveId id);

enum class ErrorCode {
  kGateViolation,
  kTranslationFault,
  kUnmappedAddress,
  kMalformed,
  kDeviceUnbound,
  kNotSm,
  kNoCandidateWay,
  kWaysUnavailable,
  kExceedsPerEnclaveMax,
  kBadSignature,
  kBadCertChain,
  kBadMagic,
  kTruncated,
  kDuplicateLabel,
  kUnknownLabel,
  kNoFreeEid,
  kResourceUnavailable,
  kRollbackDetected,
  kTamperDetected,
  kBadPageTables,
  kVersionRollback,
  kNotLive,
  kAlreadyLive,
  kNotOwner,
  kScenarioError,
  kIoError,
};

std::string_view to_string(ErrorCode code);

struct Error {
  ErrorCode code;
  std::string message;
};

// Value-or-error return type. Holds either a T or an Error.
template <typename T>
class [[nodiscard]] Result {
 public:
  Result(T value) : storage_(std::in_place_index<0>, std::move(value)) {}
  Result(Error error) : storage_(std::in_place_index<1>, std::move(error)) {}

  bool ok() const { return storage_.index() == 0; }
  explicit operator bool() const { return ok(); }

  T& value() & { return std::get<0>(storage_); }
  const T& value() const& { return std::get<0>(storage_); }
  T&& value() && { return std::get<0>(std::move(storage_)); }
  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }
  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }

  const Error& error() const { return std::get<1>(storage_); }
  ErrorCode code() const { return error().code; }

 private:
  std::variant<T, Error> storage_;
};

template <>
class [[nodiscard]] Result<void> {
 public:
  Result() = default;
  Result(Error error) : error_(std::move(error)), ok_(false) {}

  bool ok() const { return ok_; }
  explicit operator bool() const { return ok_; }
  const Error& error() const { return error_; }
  ErrorCode code() const { return error_.code; }

 private:
  Error error_{};
  bool ok_ = true;
};

using Status = Result<void>;

inline Error MakeError(ErrorCode code, std::string message = {}) {
  return Error{code, std::move(message)};
}

std::string to_hex(ByteSpan bytes);
// Returns false on odd length or a non-hex digit.
bool from_hex(std::string_view hex, Bytes& out);

// Little-endian append / read helpers used by the binary formats.
void put_u8(Bytes& out, std::uint8_t v);
void put_u32(Bytes& out, std::uint32_t v);
void put_u64(Bytes& out, std::uint64_t v);
void put_bytes(Bytes& out, ByteSpan bytes);

// Bounds-checked cursor over a byte buffer. Every read fails once the buffer
// is exhausted rather than reading past the end.
class ByteReader {
 public:
  explicit ByteReader(ByteSpan data) : data_(data) {}

  bool u8(std::uint8_t& v);
  bool u32(std::uint32_t& v);
  bool u64(std::uint64_t& v);
  bool bytes(std::size_t n, Bytes& out);
  template <std::size_t N>
  bool array(std::array<std::uint8_t, N>& out) {
    if (remaining() < N) return false;
    for (std::size_t i = 0; i < N; ++i) out[i] = data_[pos_ + i];
    pos_ += N;
    return true;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  ByteSpan data_;
  std::size_t pos_ = 0;
};

}  // namespace cure

#endif  // CURE_TYPES_HPP_
