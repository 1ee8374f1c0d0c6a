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

// Error-bound machinery for the periodic sketched iteration: coherence
// statistics of the two branch operators, the support-restricted
// contraction factor, the per-iteration threshold condition that keeps
// off-support coordinates at zero, and the resulting error bound
//
//   ||x^(t+1) - x*|| <= (prod_{t'<=t} rho_t') ||x^(1) - x*||
//                       + sqrt(s) eps_w (eta_C C + eta_D D) + sqrt(s) lambda_sum
//
// where rho_t = ||I - eta_t A_t^T A_t|| restricted to the support, eta_C and
// eta_D are the summed step sizes of original / sketched iterations, and
// lambda_sum is the summed thresholds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

#include "dupsista/core.hpp"
#include "dupsista/model.hpp"
#include "dupsista/rng.hpp"
#include "dupsista/sketch.hpp"
#include "dupsista/solver.hpp"

namespace dupsista::analysis {

/// Whether the Gram maxima include i == j. The inclusive reading is the
/// default; the off-diagonal one is the mutual-coherence reading, which is
/// all the off-support argument needs.
enum class CoherenceReading { IncludeDiagonal, OffDiagonal };

struct CoherenceStats {
  /// max_{i,j} |A_i^T A_j|, diagonal included.
  double mu_tilde = 0.0;
  /// Same for SA.
  double xi_tilde = 0.0;
  /// max |A_ij|
  double C = 0.0;
  /// max |(S^T S A)_ij|
  double D = 0.0;
  double mu_off_diagonal = 0.0;
  double xi_off_diagonal = 0.0;

  double mu(CoherenceReading r) const {
    return r == CoherenceReading::IncludeDiagonal ? mu_tilde : mu_off_diagonal;
  }
  double xi(CoherenceReading r) const {
    return r == CoherenceReading::IncludeDiagonal ? xi_tilde : xi_off_diagonal;
  }
};

inline double max_abs(const Matrix& M) {
  double best = 0.0;
  for (double v : M.elements()) best = std::max(best, std::abs(v));
  return best;
}

/// max_{i,j} |M_i^T M_j| over column pairs.
inline double max_abs_gram(const Matrix& M, bool include_diagonal) {
  const Matrix G = gram(M);
  double best = 0.0;
  for (std::size_t i = 0; i < G.rows(); ++i)
    for (std::size_t j = 0; j < G.cols(); ++j)
      if (include_diagonal || i != j) best = std::max(best, std::abs(G(i, j)));
  return best;
}

inline CoherenceStats coherence_stats(const Matrix& A, const Matrix& SA,
                                      const Matrix& StSA) {
  detail::require(SA.cols() == A.cols() && StSA.cols() == A.cols() &&
                      StSA.rows() == A.rows(),
                  "coherence_stats: inconsistent dimensions");
  CoherenceStats s;
  s.mu_tilde = max_abs_gram(A, true);
  s.mu_off_diagonal = max_abs_gram(A, false);
  s.xi_tilde = max_abs_gram(SA, true);
  s.xi_off_diagonal = max_abs_gram(SA, false);
  s.C = max_abs(A);
  s.D = max_abs(StSA);
  return s;
}

/// Recomputes SA and S^T S A from the sketch.
inline CoherenceStats coherence_stats(const Matrix& A, const Sketch& S) {
  const Matrix SA = S.apply(A);
  return coherence_stats(A, SA, S.apply_transposed(SA));
}

/// C / D for one (A, S) pair.
inline double cd_ratio(const Matrix& A, const Sketch& S) {
  const double D = max_abs(S.apply_transposed(S.apply(A)));
  detail::require(D > 0.0, "cd_ratio: S^T S A is zero");
  return max_abs(A) / D;
}

/// sqrt(l / (l + m)): entries of S^T S A have variance about 1 + m/l when A
/// has unit-variance entries and S has N(0, 1/l) entries.
inline double cd_ratio_predicted(std::size_t m, std::size_t l) {
  return std::sqrt(static_cast<double>(l) / static_cast<double>(l + m));
}

/// Mean C/D over fresh (A, S) draws; A is m x n with N(0,1) entries
/// (n = 2m when 0).
inline double cd_ratio_empirical(Rng& rng, std::size_t m, std::size_t l,
                                 std::size_t trials, std::size_t n = 0,
                                 SketchKind kind = SketchKind::Gaussian) {
  detail::require(l >= 1 && l <= m, "cd_ratio_empirical: need 1 <= l <= m");
  detail::require(trials >= 1, "cd_ratio_empirical: trials must be >= 1");
  if (n == 0) n = 2 * m;
  double sum = 0.0;
  for (std::size_t k = 0; k < trials; ++k) {
    const Matrix A = gaussian_matrix(rng, m, n);
    const Sketch S = make_sketch(rng, kind, l, m);
    sum += cd_ratio(A, S);
  }
  return sum / static_cast<double>(trials);
}

/// ||I - eta A_Omega^T A_Omega||_2 with A_Omega the support columns of A.
inline double restricted_contraction(const Matrix& A, double eta,
                                     std::span<const std::size_t> support) {
  detail::require(!support.empty(), "restricted_contraction: empty support");
  detail::require(eta > 0.0, "restricted_contraction: eta must be positive");
  const std::size_t k = support.size();
  Matrix sub(A.rows(), k);
  for (std::size_t j = 0; j < k; ++j) {
    detail::require(support[j] < A.cols(),
                    "restricted_contraction: support index out of range");
    for (std::size_t r = 0; r < A.rows(); ++r) sub(r, j) = A(r, support[j]);
  }
  Matrix W = gram(sub);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) W(i, j) = (i == j ? 1.0 : 0.0) - eta * W(i, j);
  return spectral_norm_sym(W, {1e-12, 200 * k + 2000}).value;
}

inline std::vector<std::size_t> support_of(const Vector& x) {
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != 0.0) s.push_back(i);
  return s;
}

/// Extremal eigenvalues of A_Omega^T A_Omega over random column subsets of
/// size `order`: a spot check of the restricted isometry behaviour (the
/// exact constant is not computed).
struct RipProxy {
  double min_eig = 0.0;
  double max_eig = 0.0;
  std::size_t draws = 0;
};

inline RipProxy rip_proxy(Rng& rng, const Matrix& A, std::size_t order,
                          std::size_t draws) {
  detail::require(order >= 1 && order <= A.cols(), "rip_proxy: invalid order");
  detail::require(draws >= 1, "rip_proxy: draws must be >= 1");
  RipProxy out{std::numeric_limits<double>::infinity(), 0.0, draws};
  std::vector<std::size_t> idx(A.cols());
  for (std::size_t d = 0; d < draws; ++d) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < order; ++i) {
      const std::size_t j = i + rng.uniform_index(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    Matrix sub(A.rows(), order);
    for (std::size_t j = 0; j < order; ++j)
      for (std::size_t r = 0; r < A.rows(); ++r) sub(r, j) = A(r, idx[j]);
    const Matrix G = gram(sub);
    const PowerIterationOptions opt{1e-12, 200 * order + 2000};
    const double top = spectral_norm_sym(G, opt).value;
    Matrix shifted = G;
    for (std::size_t i = 0; i < order; ++i)
      for (std::size_t j = 0; j < order; ++j)
        shifted(i, j) = (i == j ? top : 0.0) - G(i, j);
    const double bottom = top - spectral_norm_sym(shifted, opt).value;
    out.max_eig = std::max(out.max_eig, top);
    out.min_eig = std::min(out.min_eig, bottom);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assumption checks and the bound

struct AssumptionReport {
  /// ||x*||_0
  std::size_t s = 0;
  /// ||w||_1 of the realized noise.
  double eps_w = 0.0;
  CoherenceReading reading = CoherenceReading::IncludeDiagonal;
  /// Per iteration t (index t-1): the branch-dependent lower bound on
  /// lambda_t, and whether the (clamped) lambda_t meets it.
  std::vector<double> lambda_required;
  std::vector<bool> holds;
  /// Per iteration: every coordinate off the true support of x^(t+1) is 0.
  std::vector<bool> off_support_zero;
  /// Summed eta over original / sketched iterations and summed lambda.
  double eta_C = 0.0;
  double eta_D = 0.0;
  double lambda_sum = 0.0;
  bool all_hold = false;
};

namespace detail {
using dupsista::detail::require;

inline void require_full(const Trajectory& tr, const ParamSchedule& schedule,
                         const Problem& problem) {
  dupsista::detail::require(tr.iterates.size() == schedule.T() + 1 &&
                                tr.branches.size() == schedule.T(),
                            "analysis: trajectory must retain all iterates and "
                            "match the schedule length");
  dupsista::detail::require(tr.iterates.front().size() == problem.n(),
                            "analysis: trajectory does not match problem");
}
}  // namespace detail

inline AssumptionReport check_assumptions(
    const Trajectory& tr, const ParamSchedule& schedule, const Problem& problem,
    const CoherenceStats& stats,
    CoherenceReading reading = CoherenceReading::IncludeDiagonal) {
  detail::require_full(tr, schedule, problem);
  const std::size_t T = schedule.T();
  AssumptionReport r;
  r.reading = reading;
  r.s = support_of(problem.x_star).size();
  r.eps_w = norm1(problem.w.span());
  r.all_hold = true;
  for (std::size_t t = 1; t <= T; ++t) {
    const bool ogu = tr.branches[t - 1] == Branch::Ogu;
    const double eta = schedule.etas[t - 1];
    const double lambda = clamp_threshold(schedule.lambdas[t - 1]);
    double err1 = 0.0;
    const auto& x = tr.iterates[t - 1];
    for (std::size_t i = 0; i < x.size(); ++i) err1 += std::abs(x[i] - problem.x_star[i]);
    const double coh = ogu ? stats.mu(reading) : stats.xi(reading);
    const double amp = ogu ? stats.C : stats.D;
    const double need = eta * (coh * err1 + amp * r.eps_w);
    r.lambda_required.push_back(need);
    r.holds.push_back(lambda >= need);
    r.all_hold = r.all_hold && r.holds.back();

    const auto& next = tr.iterates[t];
    bool zero = true;
    for (std::size_t i = 0; i < next.size(); ++i)
      if (problem.x_star[i] == 0.0 && next[i] != 0.0) zero = false;
    r.off_support_zero.push_back(zero);

    (ogu ? r.eta_C : r.eta_D) += eta;
    r.lambda_sum += lambda;
  }
  return r;
}

/// prod * h1 + sqrt(s) eps_w weighted_eta + sqrt(s) lambda_sum, where
/// weighted_eta = eta_C C + eta_D D.
inline double theorem_bound(double contraction_product, double h1, double s,
                            double eps_w, double weighted_eta, double lambda_sum) {
  return contraction_product * h1 + std::sqrt(s) * eps_w * weighted_eta +
         std::sqrt(s) * lambda_sum;
}

struct BoundTrace {
  /// Per iteration t (index t-1).
  std::vector<double> rho;
  std::vector<double> cumulative;
  std::vector<double> bound;
  /// ||x^(t+1) - x*||
  std::vector<double> error;
  /// Support used for rho_t was larger than the true support.
  std::vector<bool> support_leaked;
  double h1 = 0.0;
  double additive = 0.0;
  std::size_t s = 0;
  double eps_w = 0.0;
  double eta_C = 0.0, eta_D = 0.0, lambda_sum = 0.0;

  bool bound_holds() const {
    for (std::size_t t = 0; t < bound.size(); ++t)
      if (error[t] > bound[t]) return false;
    return true;
  }
};

inline BoundTrace evaluate_bound(const Trajectory& tr, const ParamSchedule& schedule,
                                 const Problem& problem,
                                 const SketchedSystem* sketched,
                                 const CoherenceStats& stats) {
  detail::require_full(tr, schedule, problem);
  const std::size_t T = schedule.T();
  BoundTrace b;
  const auto omega = support_of(problem.x_star);
  b.s = omega.size();
  b.eps_w = norm1(problem.w.span());
  b.h1 = distance2(tr.iterates[0].span(), problem.x_star.span());
  for (std::size_t t = 1; t <= T; ++t) {
    const bool ogu = tr.branches[t - 1] == Branch::Ogu;
    const double lambda = clamp_threshold(schedule.lambdas[t - 1]);
    (ogu ? b.eta_C : b.eta_D) += schedule.etas[t - 1];
    b.lambda_sum += lambda;
  }
  b.additive = theorem_bound(0.0, 0.0, static_cast<double>(b.s), b.eps_w,
                             b.eta_C * stats.C + b.eta_D * stats.D, b.lambda_sum);
  double prod = 1.0;
  for (std::size_t t = 1; t <= T; ++t) {
    const Branch br = tr.branches[t - 1];
    detail::require(br == Branch::Ogu || sketched != nullptr,
                    "evaluate_bound: sketched iterations need the sketched system");
    const Matrix& At = br == Branch::Ogu ? problem.matrix() : sketched->SA();
    std::set<std::size_t> sup(omega.begin(), omega.end());
    for (std::size_t i : support_of(tr.iterates[t - 1])) sup.insert(i);
    for (std::size_t i : support_of(tr.iterates[t])) sup.insert(i);
    b.support_leaked.push_back(sup.size() != omega.size());
    double rho = 0.0;
    if (!sup.empty()) {
      const std::vector<std::size_t> idx(sup.begin(), sup.end());
      rho = restricted_contraction(At, schedule.etas[t - 1], idx);
    }
    prod *= rho;
    b.rho.push_back(rho);
    b.cumulative.push_back(prod);
    b.bound.push_back(prod * b.h1 + b.additive);
    b.error.push_back(distance2(tr.iterates[t].span(), problem.x_star.span()));
  }
  return b;
}

/// Builds a schedule that satisfies the threshold condition at every
/// iteration by construction: eta_t = eta_scale / sigma_max^2(A_t) and
/// lambda_t = (1 + margin) times the required lower bound, evaluated on the
/// iterate the schedule itself produces.
inline ParamSchedule construct_admissible_schedule(
    const SolverVariant& variant, const Problem& problem,
    const SketchedSystem* sketched, const CoherenceStats& stats, std::size_t T,
    CoherenceReading reading, double eta_scale = 1.0, double margin = 0.01) {
  detail::require(eta_scale > 0.0 && eta_scale < 2.0,
                  "construct_admissible_schedule: eta_scale must lie in (0, 2)");
  detail::require(margin >= 0.0, "construct_admissible_schedule: negative margin");
  const double eps_w = norm1(problem.w.span());
  const double L_ogu = lambda_max_gram(problem.matrix()).value;
  double L_sgu = 0.0;
  if (variant.needs_sketch()) {
    detail::require(sketched != nullptr,
                    "construct_admissible_schedule: missing sketched system");
    L_sgu = lambda_max_gram(sketched->SA()).value;
  }
  ParamSchedule sched;
  Vector x(problem.n(), 0.0);
  for (std::size_t t = 1; t <= T; ++t) {
    const Branch b = variant.branch_at(t);
    const bool ogu = b == Branch::Ogu;
    const double eta = eta_scale / (ogu ? L_ogu : L_sgu);
    double err1 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) err1 += std::abs(x[i] - problem.x_star[i]);
    const double need =
        eta * ((ogu ? stats.mu(reading) : stats.xi(reading)) * err1 +
               (ogu ? stats.C : stats.D) * eps_w);
    const double lambda = (1.0 + margin) * need;
    sched.etas.push_back(eta);
    sched.lambdas.push_back(lambda);
    const Vector z = ogu ? ogu_step(x, problem.matrix(), problem.y, eta)
                         : sgu_step(x, sketched->SA(), sketched->Sy(), eta);
    x = soft_threshold(z, lambda);
  }
  return sched;
}

}  // namespace dupsista::analysis
