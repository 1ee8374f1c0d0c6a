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

// ISTA, sketched ISTA and periodic sketched ISTA with per-iteration
// step sizes and thresholds.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "dupsista/core.hpp"
#include "dupsista/model.hpp"
#include "dupsista/sketch.hpp"

namespace dupsista {

enum class Branch : std::uint8_t {
  Ogu,  // original gradient update, uses (A, y)
  Sgu,  // sketched gradient update, uses (SA, Sy)
};

inline std::string_view to_string(Branch b) {
  return b == Branch::Ogu ? "OGU" : "SGU";
}

/// True iff iteration t (1-based) uses the original gradient.
inline bool is_ogu(std::size_t t, std::size_t period) {
  detail::require(t >= 1, "is_ogu: iterations are 1-based");
  detail::require(period >= 1, "is_ogu: period must be positive");
  return (t - 1) % period == 0;
}

class SolverVariant {
 public:
  enum class Kind { Ista, SketchedIsta, Psista };

  static SolverVariant ista() { return {Kind::Ista, 1}; }
  static SolverVariant sketched_ista() { return {Kind::SketchedIsta, 0}; }
  static SolverVariant psista(std::size_t period) {
    detail::require(period >= 1, "Psista: period must be >= 1");
    return {Kind::Psista, period};
  }

  Kind kind() const noexcept { return kind_; }
  /// Period P; 1 for Ista, 0 for SketchedIsta (never OGU).
  std::size_t period() const noexcept { return period_; }

  bool needs_sketch() const noexcept {
    return kind_ == Kind::SketchedIsta ||
           (kind_ == Kind::Psista && period_ > 1);
  }

  Branch branch_at(std::size_t t) const {
    switch (kind_) {
      case Kind::Ista:
        return Branch::Ogu;
      case Kind::SketchedIsta:
        return Branch::Sgu;
      case Kind::Psista:
        return is_ogu(t, period_) ? Branch::Ogu : Branch::Sgu;
    }
    return Branch::Ogu;
  }

  std::string name() const {
    switch (kind_) {
      case Kind::Ista:
        return "ista";
      case Kind::SketchedIsta:
        return "sketched_ista";
      case Kind::Psista:
        return "psista";
    }
    return "unknown";
  }

  bool operator==(const SolverVariant&) const = default;

 private:
  SolverVariant(Kind k, std::size_t p) : kind_(k), period_(p) {}
  Kind kind_;
  std::size_t period_;
};

/// Learnable state: one step size and one threshold per iteration.
struct ParamSchedule {
  std::vector<double> etas;
  std::vector<double> lambdas;

  std::size_t T() const noexcept { return etas.size(); }

  static ParamSchedule constant(std::size_t T, double eta, double lambda) {
    return {std::vector<double>(T, eta), std::vector<double>(T, lambda)};
  }

  void validate() const {
    detail::require(etas.size() == lambdas.size(), "ParamSchedule: ",
                    etas.size(), " step sizes but ", lambdas.size(),
                    " thresholds");
    detail::require(!etas.empty(), "ParamSchedule: T must be >= 1");
    for (std::size_t t = 0; t < etas.size(); ++t)
      detail::require(std::isfinite(etas[t]) && std::isfinite(lambdas[t]),
                      "ParamSchedule: non-finite parameter at t=", t + 1);
  }

  bool operator==(const ParamSchedule&) const = default;
};

enum class Retention { Full, FinalOnly };

struct Trajectory {
  /// x^(1)..x^(T+1) under Retention::Full; only x^(T+1) otherwise.
  std::vector<Vector> iterates;
  std::vector<Branch> branches;
  /// Iterations (1-based) whose threshold was negative and clamped to 0.
  std::vector<std::size_t> clamped_steps;

  const Vector& final_iterate() const { return iterates.back(); }
};

// ---------------------------------------------------------------------------
// Elementary steps

inline double soft_threshold(double z, double lambda) {
  if (z >= lambda) return z - lambda;
  if (z <= -lambda) return z + lambda;
  return 0.0;
}

inline Vector soft_threshold(const Vector& z, double lambda) {
  detail::require(lambda >= 0.0, "soft_threshold: negative threshold ", lambda);
  Vector out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = soft_threshold(z[i], lambda);
  return out;
}

/// Effective threshold used at solve time.
inline double clamp_threshold(double lambda) { return lambda < 0.0 ? 0.0 : lambda; }

/// g = M^T (M x - b), with `residual` as scratch of length M.rows().
inline void gradient_into(const Matrix& M, const Vector& b,
                          std::span<const double> x, std::span<double> residual,
                          std::span<double> g) {
  detail::require(b.size() == M.rows(), "gradient: right-hand side length ",
                  b.size(), " does not match ", M.rows(), " rows");
  matvec_into(M, x, residual);
  for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= b[i];
  matvec_transposed_into(M, residual, g);
}

namespace detail {

inline Vector gradient_step(const Vector& x, const Matrix& M, const Vector& b,
                            double eta) {
  require(x.size() == M.cols(), "gradient step: x has length ", x.size(),
          " but operator has ", M.cols(), " columns");
  Vector residual(M.rows());
  Vector g(M.cols());
  gradient_into(M, b, x.span(), residual.span(), g.span());
  Vector z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] - eta * g[i];
  return z;
}

}  // namespace detail

/// x - eta A^T (A x - y)
inline Vector ogu_step(const Vector& x, const Matrix& A, const Vector& y,
                       double eta) {
  return detail::gradient_step(x, A, y, eta);
}

/// x - eta (SA)^T (SA x - Sy); never touches A or S.
inline Vector sgu_step(const Vector& x, const Matrix& SA, const Vector& Sy,
                       double eta) {
  return detail::gradient_step(x, SA, Sy, eta);
}

// ---------------------------------------------------------------------------
// Unrolled execution

using BranchRule = std::function<Branch(std::size_t)>;

/// Operators for both branches of one instance. `sketched` may be null when
/// the branch rule never selects SGU.
struct IterationOperators {
  const Matrix* A = nullptr;
  const Vector* y = nullptr;
  const SketchedSystem* sketched = nullptr;

  const Matrix& matrix(Branch b) const {
    return b == Branch::Ogu ? *A : sketched->SA();
  }
  const Vector& rhs(Branch b) const {
    return b == Branch::Ogu ? *y : sketched->Sy();
  }
};

/// Reusable buffers for one unrolled pass.
struct StepWorkspace {
  Vector residual_ogu;
  Vector residual_sgu;
  Vector g;
  Vector z;

  StepWorkspace(const IterationOperators& ops)
      : residual_ogu(ops.A->rows()),
        residual_sgu(ops.sketched ? ops.sketched->SA().rows() : 0),
        g(ops.A->cols()),
        z(ops.A->cols()) {}

  std::span<double> residual(Branch b) {
    return b == Branch::Ogu ? residual_ogu.span() : residual_sgu.span();
  }
};

namespace detail {

inline void check_operators(const IterationOperators& ops, const BranchRule& rule,
                            std::size_t T) {
  require(ops.A != nullptr && ops.y != nullptr, "run: missing A or y");
  require(ops.y->size() == ops.A->rows(), "run: y has length ", ops.y->size(),
          " but A has ", ops.A->rows(), " rows");
  bool any_sgu = false;
  for (std::size_t t = 1; t <= T; ++t) any_sgu |= rule(t) == Branch::Sgu;
  if (any_sgu) {
    require(ops.sketched != nullptr,
            "run: sketched iterations need a sketched system");
    require(ops.sketched->SA().cols() == ops.A->cols(),
            "run: SA has ", ops.sketched->SA().cols(), " columns but A has ",
            ops.A->cols());
    require(ops.sketched->Sy().size() == ops.sketched->SA().rows(),
            "run: Sy length does not match SA");
  }
}

/// One iteration: fills ws.g and ws.z, writes S_lambda(z) into x_next.
/// Shared by the solver and the taped forward pass so both are bitwise equal.
inline void unrolled_step(const IterationOperators& ops, Branch branch,
                          std::span<const double> x, double eta, double lambda,
                          StepWorkspace& ws, std::span<double> x_next) {
  gradient_into(ops.matrix(branch), ops.rhs(branch), x, ws.residual(branch),
                ws.g.span());
  for (std::size_t i = 0; i < x.size(); ++i) {
    ws.z[i] = x[i] - eta * ws.g[i];
    x_next[i] = soft_threshold(ws.z[i], lambda);
  }
}

}  // namespace detail

/// Runs T iterations from x^(1) = 0 with an explicit branch rule.
inline Trajectory run(const BranchRule& rule, const IterationOperators& ops,
                      const ParamSchedule& schedule,
                      Retention retention = Retention::Full) {
  schedule.validate();
  const std::size_t T = schedule.T();
  detail::check_operators(ops, rule, T);
  const std::size_t n = ops.A->cols();

  Trajectory traj;
  traj.branches.reserve(T);
  if (retention == Retention::Full) traj.iterates.reserve(T + 1);
  StepWorkspace ws(ops);
  Vector x(n, 0.0);
  Vector next(n);
  if (retention == Retention::Full) traj.iterates.push_back(x);
  for (std::size_t t = 1; t <= T; ++t) {
    const Branch b = rule(t);
    double lambda = schedule.lambdas[t - 1];
    if (lambda < 0.0) {
      traj.clamped_steps.push_back(t);
      lambda = clamp_threshold(lambda);
    }
    detail::unrolled_step(ops, b, x.span(), schedule.etas[t - 1], lambda, ws,
                          next.span());
    if (!all_finite(next.span()))
      throw NonFiniteError("run: iterate " + std::to_string(t + 1) +
                           " is not finite");
    std::swap(x, next);
    traj.branches.push_back(b);
    if (retention == Retention::Full) traj.iterates.push_back(x);
  }
  if (retention == Retention::FinalOnly) traj.iterates.push_back(std::move(x));
  return traj;
}

inline Trajectory run(const SolverVariant& variant, const Matrix& A,
                      const Vector& y, const SketchedSystem* sketched,
                      const ParamSchedule& schedule,
                      Retention retention = Retention::Full) {
  return run([&variant](std::size_t t) { return variant.branch_at(t); },
             IterationOperators{&A, &y, sketched}, schedule, retention);
}

inline Trajectory run(const SolverVariant& variant, const Problem& problem,
                      const SketchedSystem* sketched,
                      const ParamSchedule& schedule,
                      Retention retention = Retention::Full) {
  return run(variant, problem.matrix(), problem.y, sketched, schedule,
             retention);
}

/// eta_t = lambda_t = 1 / lambda_max(A^T A) for every iteration.
inline ParamSchedule default_schedule(const Matrix& A, std::size_t T) {
  detail::require(T >= 1, "default_schedule: T must be >= 1");
  const SpectralEstimate L = lambda_max_gram(A);
  detail::require(!L.degenerate && L.value > 0.0,
                  "default_schedule: A^T A has no positive eigenvalue");
  const double v = 1.0 / L.value;
  return ParamSchedule::constant(T, v, v);
}

}  // namespace dupsista
