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

#include "cure/cost_model.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

namespace cure {

Status CostModel::apply_environment() {
  struct Entry {
    const char* name;
    Cycles* field;
  };
  const Entry entries[] = {
      {"CURE_TLB_FLUSH_CYCLES", &tlb_flush_cycles},
      {"CURE_L1_FLUSH_CYCLES", &l1_flush_cycles},
      {"CURE_BUS_TXN_CYCLES", &bus_txn_cycles},
      {"CURE_L2_HIT_CYCLES", &l2_hit_cycles},
      {"CURE_L2_MISS_CYCLES", &l2_miss_cycles},
      {"CURE_DRAM_CYCLES", &dram_cycles},
  };
  for (const Entry& e : entries) {
    const char* raw = std::getenv(e.name);
    if (raw == nullptr) continue;
    Cycles value = 0;
    const char* end = raw + std::strlen(raw);
    auto [ptr, ec] = std::from_chars(raw, end, value);
    if (ec != std::errc() || ptr != end || ptr == raw) {
      return MakeError(ErrorCode::kScenarioError,
                       std::string(e.name) + " is not an unsigned integer");
    }
    *e.field = value;
  }
  return {};
}

}  // namespace cure
