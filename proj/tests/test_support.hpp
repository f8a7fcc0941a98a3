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

#ifndef CURE_TESTS_TEST_SUPPORT_HPP_
#define CURE_TESTS_TEST_SUPPORT_HPP_

#include <memory>
#include <string>
#include <string_view>

#include <gtest/gtest.h>

#include "cure/attacks.hpp"
#include "cure/simulation.hpp"

namespace cure::testing {

#define ASSERT_OK(expr)                                                   \
  do {                                                                    \
    const auto& _r = (expr);                                              \
    ASSERT_TRUE(_r.ok()) << #expr << ": " << ::cure::to_string(_r.code()) \
                         << " " << _r.error().message;                    \
  } while (0)

#define EXPECT_CODE(expr, want)                                              \
  do {                                                                       \
    const auto& _r = (expr);                                                 \
    ASSERT_FALSE(_r.ok()) << #expr << " unexpectedly succeeded";             \
    EXPECT_EQ(_r.code(), (want)) << ::cure::to_string(_r.code()) << " vs " \
                                 << ::cure::to_string(want) << ": "          \
                                 << _r.error().message;                     \
  } while (0)

inline MachineSpec fake_spec(std::uint64_t seed = 1) {
  MachineSpec spec;
  spec.seed = seed;
  spec.fake_crypto = true;
  return spec;
}

inline std::unique_ptr<Simulation> make_sim(const MachineSpec& spec = fake_spec()) {
  auto r = Simulation::Create(spec);
  EXPECT_TRUE(r.ok()) << r.error().message;
  return std::move(r).value();
}

inline EnclaveConfig user_config(std::string_view name, std::uint64_t memory = 64 * 1024) {
  EnclaveConfig c;
  c.label = *make_label(name);
  c.memory_bytes = memory;
  return c;
}

// Installs and sets up an enclave from OS context on `core`.
inline Result<EnclaveId> launch(Simulation& sim, const EnclaveConfig& cfg, int core = 0,
                                std::size_t binary_bytes = 3000) {
  Bytes pkg = sim.make_package(cfg, test_binary(label_name(cfg.label), binary_bytes));
  Result<Label> l = sim.install(core, pkg);
  if (!l.ok()) return l.error();
  return sim.setup(core, *l);
}

inline Bytes pattern(std::size_t n, std::uint8_t seed) {
  Bytes b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = static_cast<std::uint8_t>(seed + 7 * i + 1);
  return b;
}

inline bool all_zero(const Bytes& b) {
  for (std::uint8_t x : b) {
    if (x != 0) return false;
  }
  return true;
}

}  // namespace cure::testing

#endif  // CURE_TESTS_TEST_SUPPORT_HPP_
