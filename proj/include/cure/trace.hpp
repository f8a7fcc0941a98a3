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

#ifndef CURE_TRACE_HPP_
#define CURE_TRACE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "cure/types.hpp"

namespace cure {

// One line of the trace. kind/outcome point at static strings.
struct TraceRecord {
  std::uint64_t step = 0;
  Cycles cycle = 0;  // clock value after this record's cost was charged
  int core = -1;     // -1 when the event is not tied to a core
  EnclaveId eid;
  const char* kind = "";
  const char* outcome = "";
  Cycles cost = 0;
  std::string note;
};

// Global simulated clock plus the ordered event record. Every cost charged
// to the clock goes through append(), so the final cycle count is always the
// sum of the per-record costs.
class Trace {
 public:
  void append(int core, EnclaveId eid, const char* kind, const char* outcome,
              Cycles cost, std::string note = {});

  Cycles cycles() const { return cycles_; }
  std::uint64_t steps() const { return steps_; }
  const std::vector<TraceRecord>& records() const { return records_; }

  // With recording off only the clock and step counter advance. Used by the
  // million-transaction fuzzers.
  void set_recording(bool on) { recording_ = on; }
  bool recording() const { return recording_; }

  // Tab-separated, one record per line, fixed field order:
  // step cycle core eid kind outcome cost note
  std::string to_tsv() const;
  static std::string tsv_header();

 private:
  std::vector<TraceRecord> records_;
  Cycles cycles_ = 0;
  std::uint64_t steps_ = 0;
  bool recording_ = true;
};

}  // namespace cure

#endif  // CURE_TRACE_HPP_
