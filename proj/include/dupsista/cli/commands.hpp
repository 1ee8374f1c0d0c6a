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

// The six subcommands as plain functions. Each writes its files and returns
// what it computed so callers and tests can inspect the result.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dupsista/analysis.hpp"
#include "dupsista/cli/config.hpp"
#include "dupsista/cli/io.hpp"
#include "dupsista/complexity.hpp"
#include "dupsista/ensemble.hpp"
#include "dupsista/unfold.hpp"

namespace dupsista::cli {

// ---------------------------------------------------------------------------
// gen-config

inline std::string default_config_text() {
  return to_json(ExperimentConfig{}, true).dump(2) + "\n";
}

inline void cmd_gen_config(const std::filesystem::path& path) {
  write_text(path, default_config_text());
}

// ---------------------------------------------------------------------------
// train

struct TrainOutput {
  TrainResult result;
  std::string params_json;
  std::string log_csv;
};

/// In fixed mode the parameters are the initialization and the log is empty.
inline TrainOutput run_train(const ExperimentConfig& cfg) {
  cfg.validate();
  TrainConfig tc = cfg.train_config();
  if (cfg.training.mode == TrainingMode::Fixed) tc.inner_loops = 0;
  TrainOutput out;
  out.result = train(tc);
  out.log_csv = training_log_csv(cfg, out.result.log);
  out.params_json = params_to_json(cfg, out.result.schedule, out.result.initial_value,
                                   hex64(fnv1a(out.log_csv)))
                        .dump(2) +
                    "\n";
  return out;
}

inline TrainOutput cmd_train(const ExperimentConfig& cfg,
                             const std::filesystem::path& params_path,
                             const std::filesystem::path& log_path) {
  TrainOutput out = run_train(cfg);
  write_text(params_path, out.params_json);
  write_text(log_path, out.log_csv);
  return out;
}

// ---------------------------------------------------------------------------
// eval

/// Mean column of an MSE CSV written by eval.
inline std::vector<double> read_reference_curve(const std::filesystem::path& path,
                                                MseMode expected_mode) {
  const CsvTable t = parse_csv(read_text(path));
  const std::size_t mean = t.column("mse_mean");
  const std::size_t mode = t.column("mode");
  std::vector<double> out;
  for (const auto& r : t.rows) {
    if (r[mode] != to_string(expected_mode))
      throw ConfigError("reference: MSE mode '" + r[mode] + "' does not match '" +
                        std::string(to_string(expected_mode)) + "'");
    out.push_back(parse_double(r[mean]));
  }
  return out;
}

inline std::string mse_csv(const ExperimentConfig& cfg, const MseCurve& curve,
                           const std::optional<std::vector<double>>& reference) {
  std::string s = "# " + provenance(cfg) + "\nt,mse_mean,mse_stderr,mode";
  if (reference) s += ",ratio";
  s += '\n';
  const std::string mode(to_string(curve.mode));
  for (std::size_t i = 0; i < curve.mean.size(); ++i) {
    s += std::to_string(i + 1) + ',' + fmt(curve.mean[i]) + ',' + fmt(curve.std_error[i]) +
         ',' + mode;
    if (reference) s += ',' + fmt(curve.mean[i] / (*reference)[i]);
    s += '\n';
  }
  return s;
}

struct EvalOutput {
  EnsembleResult result;
  std::string csv;
};

/// `params` empty means the default schedule 1/lambda_max(A^T A) per system.
inline EvalOutput run_eval(const ExperimentConfig& cfg, const std::optional<ParamsFile>& params,
                           const std::optional<std::filesystem::path>& reference) {
  cfg.validate();
  std::optional<ParamSchedule> schedule;
  if (params) {
    check_params_match(cfg, *params);
    schedule = params->schedule;
  }
  std::optional<std::vector<double>> ref;
  if (reference) {
    ref = read_reference_curve(*reference, cfg.mse_mode);
    if (ref->size() != cfg.T + 1)
      throw ConfigError("reference: has " + std::to_string(ref->size()) +
                        " rows, expected T+1=" + std::to_string(cfg.T + 1));
  }
  EvalOutput out;
  out.result = evaluate_ensemble(cfg.eval_config(), schedule, cfg.ensemble());
  out.csv = mse_csv(cfg, out.result.curve(cfg.mse_mode), ref);
  return out;
}

inline EvalOutput cmd_eval(const ExperimentConfig& cfg, const std::optional<ParamsFile>& params,
                           const std::optional<std::filesystem::path>& reference,
                           const std::filesystem::path& out_path) {
  EvalOutput out = run_eval(cfg, params, reference);
  write_text(out_path, out.csv);
  return out;
}

// ---------------------------------------------------------------------------
// complexity

inline void cmd_complexity(std::ostream& os, complexity::Count n, complexity::Count m,
                           complexity::Count T, std::span<const complexity::Count> ls,
                           std::span<const complexity::Count> Ps) {
  for (auto l : ls)
    if (l < 1 || l > m)
      throw ConfigError("complexity: sketch size " + std::to_string(l) +
                        " outside [1, m=" + std::to_string(m) + "]");
  for (auto P : Ps)
    if (P < 1) throw ConfigError("complexity: period must be >= 1");
  if (T < 1) throw ConfigError("complexity: T must be >= 1");
  complexity::write_table_csv(os, n, m, T, ls, Ps);
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOutput {
  Json report;
  std::string bound_csv;
  analysis::BoundTrace trace;
  analysis::AssumptionReport diagnostic_assumptions;
};

inline AnalyzeOutput run_analyze(const ExperimentConfig& cfg,
                                 const std::optional<ParamsFile>& params,
                                 std::size_t cd_trials = 20) {
  cfg.validate();
  const auto role = static_cast<std::uint64_t>(StreamRole::Diagnostic);
  const SystemDraw sys = draw_system(cfg.system, cfg.seed, {role, 0}, true);
  ParamSchedule schedule = default_schedule(*sys.A, cfg.T);
  if (params) {
    check_params_match(cfg, *params);
    schedule = params->schedule;
  }
  const analysis::CoherenceStats stats = analysis::coherence_stats(*sys.A, *sys.S);
  const auto reading = cfg.coherence_reading;

  AnalyzeOutput out;
  Json& j = out.report;
  j["header"] = provenance(cfg);
  j["variant"] = cfg.variant.name();
  j["P"] = cfg.variant.period();
  j["T"] = cfg.T;

  Json steps = Json::array();
  double ogu_sum = 0.0, sgu_sum = 0.0;
  std::size_t ogu_n = 0, sgu_n = 0;
  for (std::size_t t = 1; t <= cfg.T; ++t) {
    const Branch b = cfg.variant.branch_at(t);
    const double eta = schedule.etas[t - 1];
    (b == Branch::Ogu ? ogu_sum : sgu_sum) += eta;
    (b == Branch::Ogu ? ogu_n : sgu_n) += 1;
    steps.push_back(
        {{"t", t}, {"branch", to_string(b)}, {"eta", eta}, {"lambda", schedule.lambdas[t - 1]}});
  }
  j["parameters"] = std::move(steps);
  j["mean_eta_ogu"] = ogu_n ? Json(ogu_sum / static_cast<double>(ogu_n)) : Json(nullptr);
  j["mean_eta_sgu"] = sgu_n ? Json(sgu_sum / static_cast<double>(sgu_n)) : Json(nullptr);

  j["coherence"] = {{"reading", to_string(reading)},
                    {"mu_tilde", stats.mu_tilde},
                    {"xi_tilde", stats.xi_tilde},
                    {"mu_off_diagonal", stats.mu_off_diagonal},
                    {"xi_off_diagonal", stats.xi_off_diagonal},
                    {"C", stats.C},
                    {"D", stats.D}};
  Rng cd_rng(Rng::derive_seed(cfg.seed, {role, 1}));
  j["cd_ratio"] = {
      {"single_draw", stats.C / stats.D},
      {"empirical",
       analysis::cd_ratio_empirical(cd_rng, cfg.system.m, cfg.system.l, cd_trials,
                                    cfg.system.n, cfg.system.sketch_kind)},
      {"predicted", analysis::cd_ratio_predicted(cfg.system.m, cfg.system.l)},
      {"trials", cd_trials}};

  // Threshold condition for the supplied schedule on one sample.
  const Problem p = draw_sample(sys, cfg.system, Rng::derive_seed(cfg.seed, {role, 2}));
  const auto sk = sketch_sample(sys, p);
  {
    const Trajectory tr = run(cfg.variant, p, sk ? &*sk : nullptr, schedule);
    const auto rep = analysis::check_assumptions(tr, schedule, p, stats, reading);
    std::size_t held = 0;
    for (bool h : rep.holds) held += h ? 1 : 0;
    j["schedule_assumptions"] = {{"iterations_meeting_threshold", held},
                                 {"all_hold", rep.all_hold},
                                 {"lambda_required", rep.lambda_required}};
  }

  // Bound against error on the same instance with a schedule built to meet
  // the threshold condition at every iteration.
  const ParamSchedule admissible = analysis::construct_admissible_schedule(
      cfg.variant, p, sk ? &*sk : nullptr, stats, cfg.T, reading);
  const Trajectory tr = run(cfg.variant, p, sk ? &*sk : nullptr, admissible);
  out.diagnostic_assumptions = analysis::check_assumptions(tr, admissible, p, stats, reading);
  out.trace = analysis::evaluate_bound(tr, admissible, p, sk ? &*sk : nullptr, stats);
  bool off_zero = true;
  for (bool z : out.diagnostic_assumptions.off_support_zero) off_zero = off_zero && z;
  j["bound"] = {{"assumptions_hold", out.diagnostic_assumptions.all_hold},
                {"bound_holds", out.trace.bound_holds()},
                {"off_support_zero", off_zero},
                {"s", out.trace.s},
                {"eps_w", out.trace.eps_w},
                {"h1", out.trace.h1},
                {"additive", out.trace.additive}};

  std::string& csv = out.bound_csv;
  csv = "# " + provenance(cfg) + "\nt,branch,eta,lambda,rho,bound,error\n";
  for (std::size_t t = 0; t < cfg.T; ++t)
    csv += std::to_string(t + 1) + ',' + std::string(to_string(tr.branches[t])) + ',' +
           fmt(admissible.etas[t]) + ',' + fmt(admissible.lambdas[t]) + ',' +
           fmt(out.trace.rho[t]) + ',' + fmt(out.trace.bound[t]) + ',' +
           fmt(out.trace.error[t]) + '\n';
  return out;
}

inline AnalyzeOutput cmd_analyze(const ExperimentConfig& cfg,
                                 const std::optional<ParamsFile>& params,
                                 const std::filesystem::path& report_path,
                                 const std::filesystem::path& bound_path) {
  AnalyzeOutput out = run_analyze(cfg, params);
  write_text(report_path, out.report.dump(2) + "\n");
  write_text(bound_path, out.bound_csv);
  return out;
}

// ---------------------------------------------------------------------------
// bench

struct BenchRow {
  std::size_t T = 0;
  double time_ista = 0.0;
  double time_psista = 0.0;
  double ratio() const { return time_psista / time_ista; }
};

/// Mean wall-clock seconds per solve. SA and Sy are prepared before timing,
/// one warm-up solve per variant is discarded, and solves run on the
/// calling thread.
inline std::vector<BenchRow> run_bench(const ExperimentConfig& cfg,
                                       std::span<const std::size_t> Ts,
                                       std::size_t repeats) {
  cfg.validate();
  if (repeats < 1) throw ConfigError("bench: repeats must be >= 1");
  using Clock = std::chrono::steady_clock;
  const auto role = static_cast<std::uint64_t>(StreamRole::Benchmark);
  const SolverVariant baseline = SolverVariant::ista();
  std::vector<BenchRow> rows;
  for (std::size_t k = 0; k < Ts.size(); ++k) {
    const std::size_t T = Ts[k];
    if (T < 1) throw ConfigError("bench: T must be >= 1");
    const SystemDraw sys = draw_system(cfg.system, cfg.seed, {role, k}, true);
    const Problem p = draw_sample(sys, cfg.system, Rng::derive_seed(cfg.seed, {role, k, 1}));
    const auto sk = sketch_sample(sys, p);
    const ParamSchedule schedule = default_schedule(*sys.A, T);
    auto time_once = [&](const SolverVariant& v) {
      const auto t0 = Clock::now();
      const Trajectory tr = run(v, p, &*sk, schedule, Retention::FinalOnly);
      const auto t1 = Clock::now();
      if (tr.final_iterate().size() != p.n()) throw std::logic_error("bench: bad solve");
      return std::chrono::duration<double>(t1 - t0).count();
    };
    time_once(baseline);
    time_once(cfg.variant);
    double sum_a = 0.0, sum_b = 0.0;
    for (std::size_t r = 0; r < repeats; ++r) {
      sum_a += time_once(baseline);
      sum_b += time_once(cfg.variant);
    }
    const double R = static_cast<double>(repeats);
    rows.push_back({T, sum_a / R, sum_b / R});
  }
  return rows;
}

inline std::string bench_csv(const ExperimentConfig& cfg, const std::vector<BenchRow>& rows) {
  std::string s = "# " + provenance(cfg) + "\nT,time_ista,time_psista,ratio\n";
  for (const auto& r : rows)
    s += std::to_string(r.T) + ',' + fmt(r.time_ista) + ',' + fmt(r.time_psista) + ',' +
         fmt(r.ratio()) + '\n';
  return s;
}

inline std::vector<BenchRow> cmd_bench(const ExperimentConfig& cfg,
                                       std::span<const std::size_t> Ts, std::size_t repeats,
                                       const std::filesystem::path& out_path) {
  auto rows = run_bench(cfg, Ts, repeats);
  write_text(out_path, bench_csv(cfg, rows));
  return rows;
}

// ---------------------------------------------------------------------------
// Plot scripts

enum class PlotKind { Mse, Bench, Bound, TrainingLog };

/// A standalone matplotlib script that reads `csv` and writes `csv`.png.
inline std::string plot_script(PlotKind kind, const std::filesystem::path& csv) {
  std::string body;
  switch (kind) {
    case PlotKind::Mse:
      body =
          "ax.semilogy(d['t'], d['mse_mean'], marker='o', label='mean')\n"
          "if 'ratio' in d.columns:\n"
          "    ax.semilogy(d['t'], d['mse_mean'] / d['ratio'], '--', label='reference')\n"
          "    ax.fill_between(d['t'], d['mse_mean'] / d['ratio'],\n"
          "                    2 * d['mse_mean'] / d['ratio'], alpha=0.2, label='2x reference')\n"
          "ax.set_xlabel('iteration t'); ax.set_ylabel('MSE')\n";
      break;
    case PlotKind::Bench:
      body =
          "ax.plot(d['T'], d['time_ista'], marker='o', label='ISTA')\n"
          "ax.plot(d['T'], d['time_psista'], marker='s', label='PSISTA')\n"
          "ax.set_xlabel('iterations T'); ax.set_ylabel('seconds per solve')\n";
      break;
    case PlotKind::Bound:
      body =
          "ax.semilogy(d['t'], d['bound'], label='bound')\n"
          "ax.semilogy(d['t'], d['error'], marker='o', label='error')\n"
          "ax.set_xlabel('iteration t')\n";
      break;
    case PlotKind::TrainingLog:
      body =
          "ax.semilogy(range(len(d)), d['loss'], label='batch loss')\n"
          "ax.set_xlabel('update')\n";
      break;
  }
  return "import pandas as pd\nimport matplotlib\nmatplotlib.use('Agg')\n"
         "import matplotlib.pyplot as plt\n\n"
         "csv = r'" + csv.string() + "'\n"
         "d = pd.read_csv(csv, comment='#')\n"
         "fig, ax = plt.subplots()\n" +
         body + "ax.legend()\nfig.savefig(csv + '.png', dpi=150)\n";
}

}  // namespace dupsista::cli
