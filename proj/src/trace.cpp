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

#include "cure/trace.hpp"

#include <sstream>

namespace cure {

void Trace::append(int core, EnclaveId eid, const char* kind,
                   const char* outcome, Cycles cost, std::string note) {
  cycles_ += cost;
  ++steps_;
  if (!recording_) return;
  records_.push_back(TraceRecord{steps_ - 1, cycles_, core, eid, kind, outcome,
                                 cost, std::move(note)});
}

std::string Trace::tsv_header() {
  return "step\tcycle\tcore\teid\tkind\toutcome\tcost\tnote\n";
}

std::string Trace::to_tsv() const {
  std::ostringstream out;
  out << tsv_header();
  for (const TraceRecord& r : records_) {
    out << r.step << '\t' << r.cycle << '\t';
    if (r.core < 0) {
      out << '-';
    } else {
      out << r.core;
    }
    out << '\t' << to_string(r.eid) << '\t' << r.kind << '\t' << r.outcome
        << '\t' << r.cost << '\t' << (r.note.empty() ? "-" : r.note) << '\n';
  }
  return out.str();
}

}  // namespace cure
