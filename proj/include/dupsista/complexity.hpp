// Copyright 2026 The dupsista Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Closed-form addition + multiplication counts of the unrolled iterations.
// Precomputation of SA and Sy is not counted.

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dupsista/core.hpp"
#include "dupsista/solver.hpp"

namespace dupsista::complexity {

using Count = std::uint64_t;

/// Per-iteration count for a gradient step on an r x n operator plus the
/// soft threshold: 4rn + 3n - r. r = m for the original update, r = l for
/// the sketched one.
inline Count per_iter_ops(Count rows, Count n) {
  detail::require(rows >= 1 && n >= 1, "per_iter_ops: dimensions must be positive");
  return 4 * rows * n + 3 * n - rows;
}

/// Number of original-gradient iterations among t = 1..T.
inline Count n_ista(Count T, Count P) {
  detail::require(T >= 1 && P >= 1, "n_ista: T and P must be positive");
  return T / P + ((T - 1) % P == P - 1 ? 0 : 1);
}

/// Direct enumeration of is_ogu over t = 1..T.
inline Count schedule_count_crosscheck(Count T, Count P) {
  detail::require(T >= 1 && P >= 1,
                  "schedule_count_crosscheck: T and P must be positive");
  Count c = 0;
  for (Count t = 1; t <= T; ++t) c += is_ogu(t, P) ? 1 : 0;
  return c;
}

/// Tenths of a percent of part/whole, rounded half up, in exact integers.
inline Count percent_tenths(Count part, Count whole) {
  detail::require(whole > 0, "percent_tenths: zero denominator");
  return (2000 * part + whole) / (2 * whole);
}

struct ComplexityReport {
  Count n = 0, m = 0, l = 0, P = 0, T = 0;
  Count O_ista = 0;
  Count O_sketch = 0;
  Count N_ista = 0;
  Count N_sketch = 0;
  Count C_psista = 0;
  Count C_ista = 0;
  /// C_psista / C_ista in tenths of a percent, rounded half up.
  Count percent_tenths = 0;

  double percent_of_ista() const { return static_cast<double>(percent_tenths) / 10.0; }
};

inline ComplexityReport total_complexity(Count n, Count m, Count l, Count P,
                                         Count T) {
  detail::require(n >= 1 && m >= 1 && l >= 1, "total_complexity: dimensions must be positive");
  detail::require(l <= m, "total_complexity: need l <= m");
  ComplexityReport r{n, m, l, P, T};
  r.O_ista = per_iter_ops(m, n);
  r.O_sketch = per_iter_ops(l, n);
  r.N_ista = n_ista(T, P);
  r.N_sketch = T - r.N_ista;
  r.C_psista = r.N_ista * r.O_ista + r.N_sketch * r.O_sketch;
  r.C_ista = T * r.O_ista;
  r.percent_tenths = complexity::percent_tenths(r.C_psista, r.C_ista);
  return r;
}

/// "count (pct%)", e.g. "63022080 (75.0%)".
inline std::string format_cell(const ComplexityReport& r) {
  return std::to_string(r.C_psista) + " (" + std::to_string(r.percent_tenths / 10) +
         "." + std::to_string(r.percent_tenths % 10) + "%)";
}

/// Rows P, columns l; first column header is "P\l".
inline void write_table_csv(std::ostream& os, Count n, Count m, Count T,
                            std::span<const Count> ls, std::span<const Count> Ps) {
  detail::require(!ls.empty() && !Ps.empty(), "write_table_csv: empty grid");
  os << "P\\l";
  for (Count l : ls) os << ',' << l;
  os << '\n';
  for (Count P : Ps) {
    os << P;
    for (Count l : ls) os << ',' << format_cell(total_complexity(n, m, l, P, T));
    os << '\n';
  }
}

}  // namespace dupsista::complexity
