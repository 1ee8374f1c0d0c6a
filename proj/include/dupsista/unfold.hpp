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

// Deep unfolding: exact reverse-mode gradients of the squared error of the
// unrolled iteration with respect to (eta_t, lambda_t), Adam, and
// incremental mini-batch training.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dupsista/ensemble.hpp"
#include "dupsista/model.hpp"
#include "dupsista/parallel.hpp"
#include "dupsista/solver.hpp"

namespace dupsista {

/// Raised when a training batch loss becomes non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Intermediates of one forward pass. The operators are borrowed: the
/// matrices passed to forward_with_tape must outlive the tape.
struct Tape {
  IterationOperators ops;
  std::vector<Branch> branches;
  /// x^(1)..x^(T+1)
  std::vector<Vector> x;
  /// z^(t) = x^(t) - eta_t g^(t)
  std::vector<Vector> z;
  /// g^(t) = A_t^T (A_t x^(t) - y_t)
  std::vector<Vector> g;
  /// 1{|z_i| > lambda_t} with the clamped threshold.
  std::vector<std::vector<std::uint8_t>> active;
  Vector x_star;

  std::size_t T() const noexcept { return branches.size(); }
};

struct ForwardResult {
  Trajectory trajectory;
  Tape tape;
  /// ||x^(T+1) - x_star||^2
  double loss = 0.0;
};

inline ForwardResult forward_with_tape(const BranchRule& rule,
                                       const IterationOperators& ops,
                                       const Vector& x_star,
                                       const ParamSchedule& schedule) {
  schedule.validate();
  const std::size_t T = schedule.T();
  detail::check_operators(ops, rule, T);
  const std::size_t n = ops.A->cols();
  detail::require(x_star.size() == n, "forward_with_tape: x_star has length ",
                  x_star.size(), " but A has ", n, " columns");

  ForwardResult r;
  Tape& tape = r.tape;
  tape.ops = ops;
  tape.x_star = x_star;
  tape.branches.reserve(T);
  tape.x.reserve(T + 1);
  tape.z.reserve(T);
  tape.g.reserve(T);
  tape.active.reserve(T);

  StepWorkspace ws(ops);
  tape.x.emplace_back(n, 0.0);
  for (std::size_t t = 1; t <= T; ++t) {
    const Branch b = rule(t);
    double lambda = schedule.lambdas[t - 1];
    if (lambda < 0.0) {
      r.trajectory.clamped_steps.push_back(t);
      lambda = clamp_threshold(lambda);
    }
    Vector next(n);
    detail::unrolled_step(ops, b, tape.x.back().span(), schedule.etas[t - 1],
                          lambda, ws, next.span());
    if (!all_finite(next.span()))
      throw NonFiniteError("forward_with_tape: iterate " + std::to_string(t + 1) +
                           " is not finite");
    std::vector<std::uint8_t> mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = std::abs(ws.z[i]) > lambda;
    tape.branches.push_back(b);
    tape.z.push_back(ws.z);
    tape.g.push_back(ws.g);
    tape.active.push_back(std::move(mask));
    tape.x.push_back(std::move(next));
  }
  r.trajectory.branches = tape.branches;
  r.trajectory.iterates = tape.x;
  r.loss = mse(tape.x.back(), x_star, MseMode::Total);
  return r;
}

inline ForwardResult forward_with_tape(const SolverVariant& variant,
                                       const Problem& problem,
                                       const SketchedSystem* sketched,
                                       const ParamSchedule& schedule) {
  return forward_with_tape(
      [&variant](std::size_t t) { return variant.branch_at(t); },
      IterationOperators{problem.A.get(), &problem.y, sketched}, problem.x_star,
      schedule);
}

struct ScheduleGradient {
  std::vector<double> d_eta;
  std::vector<double> d_lambda;
};

/// Reverse pass through x^(t+1) = S_lambda_t(x^(t) - eta_t g^(t)).
/// Local derivatives: dS/dz = 1{|z|>lambda}, dS/dlambda = -sign(z) 1{|z|>lambda},
/// dz/deta = -g, dz/dx = I - eta A_t^T A_t. A kink |z_i| == lambda uses the zero
/// subderivative, and a clamped (negative) threshold has zero derivative.
inline ScheduleGradient backward(const Tape& tape, const ParamSchedule& schedule) {
  const std::size_t T = tape.T();
  detail::require(schedule.T() == T, "backward: tape has T=", T,
                  " but schedule has T=", schedule.T());
  detail::require(tape.x.size() == T + 1 && tape.z.size() == T &&
                      tape.g.size() == T && tape.active.size() == T,
                  "backward: inconsistent tape");
  const std::size_t n = tape.x_star.size();

  ScheduleGradient grad{std::vector<double>(T, 0.0), std::vector<double>(T, 0.0)};
  Vector v(n);  // dL/dx^(t+1)
  for (std::size_t i = 0; i < n; ++i) v[i] = 2.0 * (tape.x[T][i] - tape.x_star[i]);

  Vector u(n);
  Vector Mu;
  Vector MtMu(n);
  for (std::size_t t = T; t-- > 0;) {
    const auto& mask = tape.active[t];
    const auto& z = tape.z[t];
    const auto& g = tape.g[t];
    const bool clamped = schedule.lambdas[t] < 0.0;
    double d_eta = 0.0;
    double d_lambda = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = mask[i] ? v[i] : 0.0;  // dL/dz^(t)
      d_eta -= u[i] * g[i];
      if (mask[i]) d_lambda -= (z[i] > 0.0 ? 1.0 : -1.0) * u[i];
    }
    grad.d_eta[t] = d_eta;
    grad.d_lambda[t] = clamped ? 0.0 : d_lambda;
    if (t == 0) break;
    const Matrix& M = tape.ops.matrix(tape.branches[t]);
    Mu = Vector(M.rows());
    matvec_into(M, u.span(), Mu.span());
    matvec_transposed_into(M, Mu.span(), MtMu.span());
    const double eta = schedule.etas[t];
    for (std::size_t i = 0; i < n; ++i) v[i] = u[i] - eta * MtMu[i];
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamHyper {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamHyper&) const = default;
};

struct AdamState {
  AdamHyper hyper;
  std::vector<double> first;
  std::vector<double> second;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t count, AdamHyper h)
      : hyper(h), first(count, 0.0), second(count, 0.0) {}
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(AdamState& state, std::span<double> params,
                      std::span<const double> grads) {
  detail::require(params.size() == grads.size() &&
                      params.size() == state.first.size() &&
                      params.size() == state.second.size(),
                  "adam_step: length mismatch");
  const auto& h = state.hyper;
  ++state.step;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.first[i] = h.beta1 * state.first[i] + (1.0 - h.beta1) * grads[i];
    state.second[i] =
        h.beta2 * state.second[i] + (1.0 - h.beta2) * grads[i] * grads[i];
    const double m_hat = state.first[i] / c1;
    const double v_hat = state.second[i] / c2;
    params[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
  }
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  SystemSpec system;
  SolverVariant variant = SolverVariant::psista(2);
  std::size_t T_max = 15;
  std::size_t batch_size = 50;
  std::size_t inner_loops = 50;
  AdamHyper adam;
  /// Grow the unrolled depth one iteration per stage.
  bool incremental = true;
  /// In incremental mode, keep optimizing earlier iterations' parameters
  /// (true) or freeze them once their stage is over (false).
  bool retrain_prefix = true;
  std::uint64_t seed = 1;
  std::size_t threads = 0;

  void validate() const {
    system.validate();
    detail::require(T_max >= 1, "TrainConfig: T_max must be >= 1");
    detail::require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    detail::require(adam.learning_rate > 0.0,
                    "TrainConfig: learning rate must be positive");
  }
};

struct TrainLogEntry {
  std::size_t stage = 0;
  std::size_t inner = 0;
  double loss = 0.0;
};

struct TrainResult {
  ParamSchedule schedule;
  /// 1 / lambda_max(A^T A) of the first training matrix.
  double initial_value = 0.0;
  std::vector<TrainLogEntry> log;
};

namespace detail {

struct BatchGradient {
  double loss = 0.0;
  std::vector<double> d_eta;
  std::vector<double> d_lambda;
};

/// Mean loss and gradient over a fresh mini-batch for one (A, S) draw.
inline BatchGradient batch_gradient(const TrainConfig& cfg, const SystemDraw& sys,
                                    const ParamSchedule& schedule,
                                    std::uint64_t batch_seed) {
  const std::size_t B = cfg.batch_size;
  const std::size_t k = schedule.T();
  std::vector<double> losses(B);
  std::vector<ScheduleGradient> grads(B);
  const auto rule = [&cfg](std::size_t t) { return cfg.variant.branch_at(t); };
  parallel_for(B, cfg.threads, [&](std::size_t b) {
    const Problem p = draw_sample(sys, cfg.system, Rng::derive_seed(batch_seed, {b}));
    const auto sk = sketch_sample(sys, p);
    const ForwardResult fr = forward_with_tape(
        rule, IterationOperators{p.A.get(), &p.y, sk ? &*sk : nullptr}, p.x_star,
        schedule);
    losses[b] = fr.loss;
    grads[b] = backward(fr.tape, schedule);
  });
  BatchGradient out{0.0, std::vector<double>(k, 0.0), std::vector<double>(k, 0.0)};
  for (std::size_t b = 0; b < B; ++b) {
    out.loss += losses[b];
    for (std::size_t t = 0; t < k; ++t) {
      out.d_eta[t] += grads[b].d_eta[t];
      out.d_lambda[t] += grads[b].d_lambda[t];
    }
  }
  const double inv = 1.0 / static_cast<double>(B);
  out.loss *= inv;
  for (std::size_t t = 0; t < k; ++t) {
    out.d_eta[t] *= inv;
    out.d_lambda[t] *= inv;
  }
  return out;
}

}  // namespace detail

/// Incremental mini-batch training. Stage k unrolls k iterations; each inner
/// loop regenerates (A, S), draws a fresh batch, averages the per-sample
/// gradients, and applies one Adam step. Adam moments are reset per stage.
/// Parameters start at 1 / lambda_max(A^T A) of the first training matrix.
inline TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  const auto role = static_cast<std::uint64_t>(StreamRole::Training);
  const bool with_sketch = cfg.variant.needs_sketch();

  TrainResult result;
  {
    const SystemDraw first = draw_system(cfg.system, cfg.seed, {role, 1, 0}, false);
    result.initial_value = default_schedule(*first.A, 1).etas[0];
  }
  const double init = result.initial_value;
  ParamSchedule& sched = result.schedule;
  sched = ParamSchedule::constant(cfg.T_max, init, init);

  const std::size_t first_stage = cfg.incremental ? 1 : cfg.T_max;
  for (std::size_t k = first_stage; k <= cfg.T_max && cfg.inner_loops > 0; ++k) {
    ParamSchedule active{
        std::vector<double>(sched.etas.begin(), sched.etas.begin() + k),
        std::vector<double>(sched.lambdas.begin(), sched.lambdas.begin() + k)};
    const std::size_t trainable_from =
        (cfg.incremental && !cfg.retrain_prefix) ? k - 1 : 0;
    const std::size_t width = k - trainable_from;
    AdamState adam(2 * width, cfg.adam);
    std::vector<double> params(2 * width), grads(2 * width);

    for (std::size_t it = 0; it < cfg.inner_loops; ++it) {
      const SystemDraw sys = draw_system(cfg.system, cfg.seed, {role, k, it}, with_sketch);
      const std::uint64_t batch_seed = Rng::derive_seed(cfg.seed, {role, k, it, 1});
      detail::BatchGradient bg;
      try {
        bg = detail::batch_gradient(cfg, sys, active, batch_seed);
      } catch (const NonFiniteError& e) {
        throw TrainingDiverged("train: stage " + std::to_string(k) + ", inner loop " +
                               std::to_string(it) + ": " + e.what());
      }
      if (!std::isfinite(bg.loss))
        throw TrainingDiverged("train: non-finite batch loss at stage " +
                               std::to_string(k) + ", inner loop " +
                               std::to_string(it));
      result.log.push_back({k, it, bg.loss});

      for (std::size_t j = 0; j < width; ++j) {
        params[j] = active.etas[trainable_from + j];
        params[width + j] = active.lambdas[trainable_from + j];
        grads[j] = bg.d_eta[trainable_from + j];
        grads[width + j] = bg.d_lambda[trainable_from + j];
      }
      adam_step(adam, params, grads);
      for (std::size_t j = 0; j < width; ++j) {
        active.etas[trainable_from + j] = params[j];
        active.lambdas[trainable_from + j] = params[width + j];
      }
    }
    std::copy(active.etas.begin(), active.etas.end(), sched.etas.begin());
    std::copy(active.lambdas.begin(), active.lambdas.end(), sched.lambdas.begin());
  }
  return result;
}

}  // namespace dupsista
