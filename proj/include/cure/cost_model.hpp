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

#ifndef CURE_COST_MODEL_HPP_
#define CURE_COST_MODEL_HPP_

#include "cure/types.hpp"

namespace cure {

// Per-event cycle costs. The flush defaults are the measured Rocket values
// (TLB 28 cycles, L1 3141 cycles); the memory-hierarchy entries are desk-scale
// guesses and are meant to be overridden per scenario.
struct CostModel {
  Cycles tlb_flush_cycles = 28;
  Cycles l1_flush_cycles = 3141;
  Cycles bus_txn_cycles = 1;
  Cycles l2_hit_cycles = 10;
  Cycles l2_miss_cycles = 20;
  Cycles dram_cycles = 80;

  // Every cost is 1: total cycles then count charged events.
  static CostModel Unit() { return CostModel{1, 1, 1, 1, 1, 1}; }

  // Applies CURE_TLB_FLUSH_CYCLES, CURE_L1_FLUSH_CYCLES, CURE_BUS_TXN_CYCLES,
  // CURE_L2_HIT_CYCLES, CURE_L2_MISS_CYCLES and CURE_DRAM_CYCLES when set.
  // A malformed value is an error naming the variable.
  Status apply_environment();

  bool operator==(const CostModel&) const = default;
};

}  // namespace cure

#endif  // CURE_COST_MODEL_HPP_
