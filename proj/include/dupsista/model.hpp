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

// Recovery instances: Bernoulli-Gaussian signals, Gaussian observation
// matrices, additive white noise, and the MSE metric.

#include <cstdint>
#include <memory>
#include <string_view>

#include "dupsista/core.hpp"
#include "dupsista/rng.hpp"
#include "dupsista/sketch.hpp"

namespace dupsista {

struct SignalModel {
  std::size_t n = 0;
  double p_nonzero = 0.05;
};

/// One recovery instance y = A x_star + w. A is shared so that the samples
/// drawn for one observation matrix do not copy it.
struct Problem {
  std::shared_ptr<const Matrix> A;
  Vector y;
  Vector x_star;
  Vector w;
  double sigma2 = 0.0;
  std::uint64_t seed = 0;

  std::size_t m() const { return A->rows(); }
  std::size_t n() const { return A->cols(); }
  const Matrix& matrix() const { return *A; }
};

inline Vector sample_signal(Rng& rng, const SignalModel& model) {
  detail::require(model.p_nonzero >= 0.0 && model.p_nonzero <= 1.0,
                  "sample_signal: p_nonzero must lie in [0,1]");
  Vector x(model.n);
  for (std::size_t i = 0; i < model.n; ++i) {
    // Both draws are always taken so the stream position does not depend on
    // the support pattern.
    const bool active = bernoulli(rng, model.p_nonzero);
    const double amplitude = rng.standard_normal();
    x[i] = active ? amplitude : 0.0;
  }
  return x;
}

/// Draws (x_star, w) for a fixed A and assembles y = A x_star + w.
inline Problem make_observation(std::shared_ptr<const Matrix> A, Rng& signal_rng,
                                Rng& noise_rng, double sigma2,
                                const SignalModel& model,
                                std::uint64_t seed = 0) {
  detail::require(A != nullptr, "make_observation: null matrix");
  detail::require(model.n == A->cols(), "make_observation: signal length ",
                  model.n, " does not match A with ", A->cols(), " columns");
  detail::require(sigma2 >= 0.0, "make_observation: negative noise variance");
  Problem p;
  p.x_star = sample_signal(signal_rng, model);
  p.w = Vector(A->rows());
  for (std::size_t i = 0; i < A->rows(); ++i)
    p.w[i] = gaussian(noise_rng, 0.0, sigma2);
  p.y = matvec(*A, p.x_star);
  for (std::size_t i = 0; i < p.y.size(); ++i) p.y[i] += p.w[i];
  p.sigma2 = sigma2;
  p.seed = seed;
  p.A = std::move(A);
  return p;
}

/// Fresh A with N(0,1) entries plus one observation, all from one stream.
inline Problem make_problem(Rng& rng, std::size_t m, std::size_t n,
                            double sigma2, const SignalModel& model) {
  detail::require(m >= 1 && n >= 1, "make_problem: dimensions must be positive");
  const auto seed = rng.seed();
  auto A = std::make_shared<const Matrix>(gaussian_matrix(rng, m, n));
  SignalModel sm = model;
  sm.n = n;
  return make_observation(std::move(A), rng, rng, sigma2, sm, seed);
}

inline SketchedSystem build_sketched_system(std::shared_ptr<const Sketch> S,
                                            const Problem& problem) {
  return build_sketched_system(std::move(S), problem.matrix(), problem.y,
                               problem.seed);
}

enum class MseMode { PerElement, Total };

inline std::string_view to_string(MseMode mode) {
  return mode == MseMode::PerElement ? "per_element" : "total";
}

inline MseMode mse_mode_from_string(std::string_view s) {
  if (s == "per_element") return MseMode::PerElement;
  if (s == "total") return MseMode::Total;
  detail::fail("unknown MSE mode '", s, "'");
}

/// ||x_hat - x_star||^2, divided by n in per-element mode.
inline double mse(std::span<const double> x_hat, std::span<const double> x_star,
                  MseMode mode = MseMode::PerElement) {
  detail::require(x_hat.size() == x_star.size(), "mse: length ", x_hat.size(),
                  " vs ", x_star.size());
  detail::require(!x_hat.empty(), "mse: empty vectors");
  double s = 0.0;
  for (std::size_t i = 0; i < x_hat.size(); ++i) {
    const double d = x_hat[i] - x_star[i];
    s += d * d;
  }
  return mode == MseMode::Total ? s : s / static_cast<double>(x_hat.size());
}

inline double mse(const Vector& x_hat, const Vector& x_star,
                  MseMode mode = MseMode::PerElement) {
  return mse(x_hat.span(), x_star.span(), mode);
}

}  // namespace dupsista
