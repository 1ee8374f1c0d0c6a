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

// Ensemble generation and MSE-curve evaluation over many (A, S) systems,
// each with several (x, y) samples.

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "dupsista/model.hpp"
#include "dupsista/parallel.hpp"
#include "dupsista/rng.hpp"
#include "dupsista/sketch.hpp"
#include "dupsista/solver.hpp"

namespace dupsista {

/// Dimensions and distributions of one family of recovery problems.
struct SystemSpec {
  std::size_t n = 256;
  std::size_t m = 128;
  std::size_t l = 64;
  SketchKind sketch_kind = SketchKind::Gaussian;
  double sigma2 = 0.01;
  double p_nonzero = 0.05;

  void validate() const {
    detail::require(n >= 1 && m >= 1, "SystemSpec: n and m must be positive");
    detail::require(l >= 1 && l <= m, "SystemSpec: need 1 <= l <= m, got l=",
                    l, " m=", m);
    detail::require(sigma2 >= 0.0, "SystemSpec: sigma2 must be >= 0");
    detail::require(p_nonzero >= 0.0 && p_nonzero <= 1.0,
                    "SystemSpec: p_nonzero must lie in [0,1]");
  }

  SignalModel signal() const { return {n, p_nonzero}; }

  bool operator==(const SystemSpec&) const = default;
};

/// One observation matrix and (optionally) its sketch with SA precomputed.
struct SystemDraw {
  std::shared_ptr<const Matrix> A;
  std::shared_ptr<const Sketch> S;
  std::shared_ptr<const Matrix> SA;
};

/// Keys identify the draw, e.g. {role, system} for evaluation or
/// {role, stage, inner} for training; A and S use disjoint substreams.
inline SystemDraw draw_system(const SystemSpec& spec, std::uint64_t seed,
                              std::initializer_list<std::uint64_t> keys,
                              bool with_sketch) {
  std::vector<std::uint64_t> base(keys);
  auto keyed = [&](StreamRole role) {
    std::uint64_t s = seed;
    for (auto k : base) s = Rng::derive_seed(s, {k});
    return Rng::derive_seed(s, {static_cast<std::uint64_t>(role)});
  };
  SystemDraw d;
  Rng a_rng(keyed(StreamRole::ObservationMatrix));
  d.A = std::make_shared<const Matrix>(gaussian_matrix(a_rng, spec.m, spec.n));
  if (with_sketch) {
    Rng s_rng(keyed(StreamRole::Sketch));
    d.S = std::make_shared<const Sketch>(
        make_sketch(s_rng, spec.sketch_kind, spec.l, spec.m));
    d.SA = std::make_shared<const Matrix>(d.S->apply(*d.A));
  }
  return d;
}

/// Draws sample `index` for a system; signal and noise have their own
/// substreams under `sample_seed`.
inline Problem draw_sample(const SystemDraw& sys, const SystemSpec& spec,
                           std::uint64_t sample_seed) {
  Rng signal_rng(Rng::derive_seed(sample_seed,
                                  {static_cast<std::uint64_t>(StreamRole::Signal)}));
  Rng noise_rng(Rng::derive_seed(sample_seed,
                                 {static_cast<std::uint64_t>(StreamRole::Noise)}));
  return make_observation(sys.A, signal_rng, noise_rng, spec.sigma2,
                          spec.signal(), sample_seed);
}

/// Sketched system for a sample of a drawn system; SA is shared.
inline std::optional<SketchedSystem> sketch_sample(const SystemDraw& sys,
                                                   const Problem& p) {
  if (!sys.S) return std::nullopt;
  return SketchedSystem(sys.S, sys.SA, sys.S->apply(p.y), p.seed);
}

struct Ensemble {
  std::size_t systems = 50;
  std::size_t samples = 50;
  std::uint64_t seed = 1;

  bool operator==(const Ensemble&) const = default;
};

struct MseCurve {
  MseMode mode = MseMode::PerElement;
  /// Index t-1 holds iteration t = 1..T+1.
  std::vector<double> mean;
  std::vector<double> std_error;
  std::size_t count = 0;
};

struct EnsembleResult {
  MseCurve per_element;
  MseCurve total;
  std::size_t clamp_events = 0;

  const MseCurve& curve(MseMode mode) const {
    return mode == MseMode::PerElement ? per_element : total;
  }
};

struct EvalConfig {
  SystemSpec system;
  SolverVariant variant = SolverVariant::psista(2);
  std::size_t T = 15;
  std::size_t threads = 0;
};

namespace detail {

inline MseCurve reduce_curve(MseMode mode,
                             const std::vector<std::vector<double>>& rows,
                             std::size_t width) {
  MseCurve c;
  c.mode = mode;
  c.count = rows.size();
  c.mean.assign(width, 0.0);
  c.std_error.assign(width, 0.0);
  const double N = static_cast<double>(rows.size());
  for (const auto& r : rows)
    for (std::size_t t = 0; t < width; ++t) c.mean[t] += r[t];
  for (auto& v : c.mean) v /= N;
  if (rows.size() > 1) {
    for (std::size_t t = 0; t < width; ++t) {
      double ss = 0.0;
      for (const auto& r : rows) {
        const double d = r[t] - c.mean[t];
        ss += d * d;
      }
      c.std_error[t] = std::sqrt(ss / (N - 1.0)) / std::sqrt(N);
    }
  }
  return c;
}

}  // namespace detail

/// Mean MSE per iteration over all (system, sample) pairs. `params` empty
/// means the default schedule of each system's A. Deterministic for a given
/// (config, params, ensemble.seed), independent of the thread count.
inline EnsembleResult evaluate_ensemble(const EvalConfig& cfg,
                                        const std::optional<ParamSchedule>& params,
                                        const Ensemble& ens) {
  cfg.system.validate();
  detail::require(ens.systems >= 1 && ens.samples >= 1,
                  "evaluate_ensemble: counts must be >= 1");
  detail::require(cfg.T >= 1, "evaluate_ensemble: T must be >= 1");
  if (params) {
    params->validate();
    detail::require(params->T() == cfg.T, "evaluate_ensemble: schedule has T=",
                    params->T(), " but config has T=", cfg.T);
  }
  const std::size_t width = cfg.T + 1;
  const std::size_t pairs = ens.systems * ens.samples;
  std::vector<std::vector<double>> per_elem(pairs), total(pairs);
  std::vector<std::size_t> clamps(ens.systems, 0);
  const auto role = static_cast<std::uint64_t>(StreamRole::Evaluation);

  parallel_for(ens.systems, cfg.threads, [&](std::size_t s) {
    const SystemDraw sys =
        draw_system(cfg.system, ens.seed, {role, s}, cfg.variant.needs_sketch());
    const ParamSchedule schedule =
        params ? *params : default_schedule(*sys.A, cfg.T);
    for (std::size_t j = 0; j < ens.samples; ++j) {
      const std::uint64_t sample_seed = Rng::derive_seed(ens.seed, {role, s, j, 0});
      const Problem p = draw_sample(sys, cfg.system, sample_seed);
      const auto sk = sketch_sample(sys, p);
      const Trajectory tr =
          run(cfg.variant, p, sk ? &*sk : nullptr, schedule, Retention::Full);
      clamps[s] += tr.clamped_steps.size();
      auto& pe = per_elem[s * ens.samples + j];
      auto& to = total[s * ens.samples + j];
      pe.resize(width);
      to.resize(width);
      for (std::size_t t = 0; t < width; ++t) {
        to[t] = mse(tr.iterates[t], p.x_star, MseMode::Total);
        pe[t] = to[t] / static_cast<double>(cfg.system.n);
      }
    }
  });

  EnsembleResult r;
  r.per_element = detail::reduce_curve(MseMode::PerElement, per_elem, width);
  r.total = detail::reduce_curve(MseMode::Total, total, width);
  for (auto c : clamps) r.clamp_events += c;
  return r;
}

}  // namespace dupsista
