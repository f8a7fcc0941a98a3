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

#include "cure/memory.hpp"

#include <algorithm>

namespace cure {

void PhysicalMemory::read(Address address, std::span<std::uint8_t> out) const {
  std::uint64_t addr = address;
  std::size_t done = 0;
  while (done < out.size()) {
    std::uint32_t page = static_cast<std::uint32_t>(addr / kPageBytes);
    std::uint32_t offset = static_cast<std::uint32_t>(addr % kPageBytes);
    std::size_t chunk = std::min<std::size_t>(out.size() - done, kPageBytes - offset);
    auto it = pages_.find(page);
    if (it == pages_.end()) {
      std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(done), chunk, 0);
    } else {
      std::copy_n(it->second->begin() + offset, chunk,
                  out.begin() + static_cast<std::ptrdiff_t>(done));
    }
    done += chunk;
    addr += chunk;
  }
}

PhysicalMemory::Page* PhysicalMemory::page_for_write(std::uint32_t page_number) {
  auto& slot = pages_[page_number];
  if (!slot) {
    slot = std::make_unique<Page>();
    slot->fill(0);
  }
  return slot.get();
}

void PhysicalMemory::write(Address address, ByteSpan data) {
  std::uint64_t addr = address;
  std::size_t done = 0;
  while (done < data.size()) {
    std::uint32_t page = static_cast<std::uint32_t>(addr / kPageBytes);
    std::uint32_t offset = static_cast<std::uint32_t>(addr % kPageBytes);
    std::size_t chunk = std::min<std::size_t>(data.size() - done, kPageBytes - offset);
    Page* p = page_for_write(page);
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(done), chunk,
                p->begin() + offset);
    done += chunk;
    addr += chunk;
  }
}

void PhysicalMemory::zero(Address base, std::uint64_t length) {
  std::uint64_t addr = base;
  std::uint64_t end = std::uint64_t{base} + length;
  while (addr < end) {
    std::uint32_t page = static_cast<std::uint32_t>(addr / kPageBytes);
    std::uint32_t offset = static_cast<std::uint32_t>(addr % kPageBytes);
    std::uint64_t chunk = std::min<std::uint64_t>(end - addr, kPageBytes - offset);
    auto it = pages_.find(page);
    if (it != pages_.end()) {
      if (offset == 0 && chunk == kPageBytes) {
        pages_.erase(it);
      } else {
        std::fill_n(it->second->begin() + offset, chunk, 0);
      }
    }
    addr += chunk;
  }
}

std::uint8_t PhysicalMemory::read_u8(Address address) const {
  std::uint8_t v = 0;
  read(address, std::span<std::uint8_t>(&v, 1));
  return v;
}

std::uint32_t PhysicalMemory::read_u32(Address address) const {
  std::array<std::uint8_t, 4> b{};
  read(address, b);
  return std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 |
         std::uint32_t{b[2]} << 16 | std::uint32_t{b[3]} << 24;
}

void PhysicalMemory::write_u32(Address address, std::uint32_t value) {
  std::array<std::uint8_t, 4> b{static_cast<std::uint8_t>(value),
                                static_cast<std::uint8_t>(value >> 8),
                                static_cast<std::uint8_t>(value >> 16),
                                static_cast<std::uint8_t>(value >> 24)};
  write(address, b);
}

}  // namespace cure
