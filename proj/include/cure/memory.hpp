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

#ifndef CURE_MEMORY_HPP_
#define CURE_MEMORY_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <span>

#include "cure/types.hpp"

namespace cure {

// Sparse byte-addressable DRAM backing store. Untouched bytes read as zero.
class PhysicalMemory {
 public:
  static constexpr std::uint32_t kPageBytes = 4096;

  void read(Address address, std::span<std::uint8_t> out) const;
  void write(Address address, ByteSpan data);
  void zero(Address base, std::uint64_t length);

  std::uint8_t read_u8(Address address) const;
  std::uint32_t read_u32(Address address) const;
  void write_u32(Address address, std::uint32_t value);

  // Pages in address order; deterministic iteration for digests.
  const std::map<std::uint32_t, std::unique_ptr<std::array<std::uint8_t, kPageBytes>>>&
  pages() const {
    return pages_;
  }

 private:
  using Page = std::array<std::uint8_t, kPageBytes>;
  Page* page_for_write(std::uint32_t page_number);

  std::map<std::uint32_t, std::unique_ptr<Page>> pages_;
};

}  // namespace cure

#endif  // CURE_MEMORY_HPP_
