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

// Central finite differences of the unrolled loss, evaluated through the
// plain solver rather than the tape.

#include <algorithm>
#include <cmath>

#include "dupsista/ensemble.hpp"
#include "dupsista/unfold.hpp"

namespace gradcheck {

struct Result {
  bool kink_free = false;
  double min_kink_distance = 0.0;
  double max_rel_error = 0.0;
  std::size_t parameters = 0;
};

inline double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale < 1e-9) return std::abs(a - b);
  return std::abs(a - b) / scale;
}

/// m = 8, n = 16, l = 4, T = 4, P = 2 with a randomized schedule.
inline Result check_instance(std::uint64_t seed, double h = 1e-6, double kink_margin = 1e-3) {
  using namespace dupsista;
  const SystemSpec spec{16, 8, 4, SketchKind::Gaussian, 0.01, 0.3};
  const SystemDraw sys = draw_system(spec, seed, {1}, true);
  const Problem p = draw_sample(sys, spec, Rng::derive_seed(seed, {2}));
  const auto sk = sketch_sample(sys, p);
  const SolverVariant v = SolverVariant::psista(2);
  const std::size_t T = 4;

  Rng rng(Rng::derive_seed(seed, {3}));
  const double L = lambda_max_gram(*sys.A).value;
  ParamSchedule sched;
  for (std::size_t t = 0; t < T; ++t) {
    sched.etas.push_back((0.3 + 0.6 * rng.uniform()) / L);
    sched.lambdas.push_back(0.005 + 0.05 * rng.uniform());
  }

  const ForwardResult fr = forward_with_tape(v, p, &*sk, sched);
  Result res;
  res.min_kink_distance = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < T; ++t)
    for (double z : fr.tape.z[t])
      res.min_kink_distance =
          std::min(res.min_kink_distance, std::abs(std::abs(z) - sched.lambdas[t]));
  res.kink_free = res.min_kink_distance > kink_margin;
  if (!res.kink_free) return res;

  const auto grad = backward(fr.tape, sched);
  auto loss_at = [&](const ParamSchedule& s) {
    const Trajectory tr = run(v, p, &*sk, s, Retention::FinalOnly);
    return mse(tr.final_iterate(), p.x_star, MseMode::Total);
  };
  for (std::size_t t = 0; t < T; ++t) {
    for (int which = 0; which < 2; ++which) {
      ParamSchedule plus = sched, minus = sched;
      auto& a = which == 0 ? plus.etas[t] : plus.lambdas[t];
      auto& b = which == 0 ? minus.etas[t] : minus.lambdas[t];
      a += h;
      b -= h;
      const double fd = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
      const double an = which == 0 ? grad.d_eta[t] : grad.d_lambda[t];
      res.max_rel_error = std::max(res.max_rel_error, relative_error(an, fd));
      ++res.parameters;
    }
  }
  return res;
}

}  // namespace gradcheck
