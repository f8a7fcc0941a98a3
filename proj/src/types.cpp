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

#include "cure/types.hpp"

namespace cure {

std::string to_string(EnclaveId id) {
  static constexpr char kDigits[] = "0123456789abcdef";
  return std::string("0x") + kDigits[id.value()];
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kGateViolation: return "GateViolation";
    case ErrorCode::kTranslationFault: return "TranslationFault";
    case ErrorCode::kUnmappedAddress: return "UnmappedAddress";
    case ErrorCode::kMalformed: return "Malformed";
    case ErrorCode::kDeviceUnbound: return "DeviceUnbound";
    case ErrorCode::kNotSm: return "NotSM";
    case ErrorCode::kNoCandidateWay: return "NoCandidateWay";
    case ErrorCode::kWaysUnavailable: return "WaysUnavailable";
    case ErrorCode::kExceedsPerEnclaveMax: return "ExceedsPerEnclaveMax";
    case ErrorCode::kBadSignature: return "BadSignature";
    case ErrorCode::kBadCertChain: return "BadCertChain";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kTruncated: return "Truncated";
    case ErrorCode::kDuplicateLabel: return "DuplicateLabel";
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kNoFreeEid: return "NoFreeEid";
    case ErrorCode::kResourceUnavailable: return "ResourceUnavailable";
    case ErrorCode::kRollbackDetected: return "RollbackDetected";
    case ErrorCode::kTamperDetected: return "TamperDetected";
    case ErrorCode::kBadPageTables: return "BadPageTables";
    case ErrorCode::kVersionRollback: return "VersionRollback";
    case ErrorCode::kNotLive: return "NotLive";
    case ErrorCode::kAlreadyLive: return "AlreadyLive";
    case ErrorCode::kNotOwner: return "NotOwner";
    case ErrorCode::kScenarioError: return "ScenarioError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

std::string to_hex(ByteSpan bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

namespace {
int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

bool from_hex(std::string_view hex, Bytes& out) {
  if (hex.size() % 2 != 0) return false;
  Bytes result;
  result.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = hex_value(hex[i]);
    int lo = hex_value(hex[i + 1]);
    if (hi < 0 || lo < 0) return false;
    result.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  out = std::move(result);
  return true;
}

void put_u8(Bytes& out, std::uint8_t v) { out.push_back(v); }

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_bytes(Bytes& out, ByteSpan bytes) {
  out.insert(out.end(), bytes.begin(), bytes.end());
}

bool ByteReader::u8(std::uint8_t& v) {
  if (remaining() < 1) return false;
  v = data_[pos_++];
  return true;
}

bool ByteReader::u32(std::uint32_t& v) {
  if (remaining() < 4) return false;
  v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{data_[pos_ + i]} << (8 * i);
  pos_ += 4;
  return true;
}

bool ByteReader::u64(std::uint64_t& v) {
  if (remaining() < 8) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{data_[pos_ + i]} << (8 * i);
  pos_ += 8;
  return true;
}

bool ByteReader::bytes(std::size_t n, Bytes& out) {
  if (remaining() < n) return false;
  out.assign(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
             data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return true;
}

}  // namespace cure
