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

// Recover one sparse signal with ISTA and with periodic sketched ISTA, and
// print the squared error per iteration for both.

#include <cstdio>

#include "dupsista/ensemble.hpp"
#include "dupsista/solver.hpp"

int main() {
  using namespace dupsista;
  SystemSpec spec;  // n = 256, m = 128, l = 64, Gaussian sketch
  const SystemDraw sys = draw_system(spec, 7, {0}, true);
  const Problem p = draw_sample(sys, spec, 11);
  const auto sk = sketch_sample(sys, p);

  const std::size_t T = 40;
  const ParamSchedule sched = default_schedule(*sys.A, T);
  const Trajectory ista = run(SolverVariant::ista(), p, nullptr, sched);
  const Trajectory ps = run(SolverVariant::psista(2), p, &*sk, sched);

  std::printf("t,ista,psista\n");
  for (std::size_t t = 0; t <= T; ++t)
    std::printf("%zu,%.6g,%.6g\n", t + 1, mse(ista.iterates[t], p.x_star, MseMode::Total),
                mse(ps.iterates[t], p.x_star, MseMode::Total));
}
