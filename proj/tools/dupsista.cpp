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

// dupsista: generate configs, train step sizes and thresholds, evaluate,
// tabulate operation counts, analyze, and benchmark.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dupsista/cli/commands.hpp"

namespace cli = dupsista::cli;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kInput = 2, kDiverged = 3, kRuntime = 4 };

struct Common {
  std::string config;
  std::string params;
  std::string out;
  std::string plot;
  std::optional<std::uint64_t> seed;
};

cli::ExperimentConfig load(const Common& c) {
  cli::ExperimentConfig cfg =
      c.config.empty() ? cli::ExperimentConfig{} : cli::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

std::optional<cli::ParamsFile> params_for(const Common& c, const cli::ExperimentConfig& cfg) {
  if (!c.params.empty()) return cli::load_params(c.params);
  if (cfg.training.mode == cli::TrainingMode::Fixed) return std::nullopt;
  return cli::load_params(cfg.outputs.params);
}

std::string pick(const std::string& flag, const std::string& fallback) {
  return flag.empty() ? fallback : flag;
}

void maybe_plot(const std::string& plot, cli::PlotKind kind, const std::string& csv) {
  if (!plot.empty()) cli::write_text(plot, cli::plot_script(kind, csv));
}

void report_clamps(std::size_t events) {
  if (events > 0)
    std::cerr << "warning: " << events
              << " iterations had a negative threshold, clamped to 0\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Periodic sketched ISTA with learned step sizes and thresholds"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("dupsista ") + cli::kToolVersion);

  Common c;
  auto add_common = [&c](CLI::App* sub, bool with_params) {
    sub->add_option("--config", c.config, "Experiment config JSON (defaults if omitted)");
    if (with_params) sub->add_option("--params", c.params, "Learned parameter JSON");
    sub->add_option("--out", c.out, "Output path (overrides the config)");
    sub->add_option("--seed", c.seed, "Master seed (overrides the config)");
  };

  auto* gen = app.add_subcommand("gen-config", "Write a commented default config");
  gen->add_option("--out", c.out, "Output path")->required();

  std::string log_path;
  auto* train = app.add_subcommand("train", "Learn step sizes and thresholds");
  add_common(train, false);
  train->add_option("--log", log_path, "Training-log CSV path");
  train->add_option("--plot", c.plot, "Also write a plot script for the training log");

  std::string reference;
  auto* eval = app.add_subcommand("eval", "MSE per iteration over an ensemble");
  add_common(eval, true);
  eval->add_option("--reference", reference, "MSE CSV of a reference run (adds a ratio column)");
  eval->add_option("--plot", c.plot, "Also write a plot script");

  std::uint64_t n = 1024, m = 512, T = 40;
  std::vector<std::uint64_t> ls{256, 128, 64, 32}, Ps{1, 2, 3, 5, 8};
  auto* cx = app.add_subcommand("complexity", "Operation-count table (rows P, columns l)");
  cx->add_option("--n", n, "Signal length")->capture_default_str();
  cx->add_option("--m", m, "Measurements")->capture_default_str();
  cx->add_option("--T", T, "Iterations")->capture_default_str();
  cx->add_option("--l-list", ls, "Sketch sizes")->delimiter(',')->capture_default_str();
  cx->add_option("--P-list", Ps, "Periods")->delimiter(',')->capture_default_str();
  cx->add_option("--out", c.out, "CSV path (stdout if omitted)");

  std::string bound_path;
  auto* an = app.add_subcommand("analyze", "Parameter dump, coherence, and bound trace");
  add_common(an, true);
  an->add_option("--bound", bound_path, "Bound-vs-error CSV path");
  an->add_option("--plot", c.plot, "Also write a plot script for the bound trace");

  std::vector<std::size_t> bench_T;
  std::optional<std::size_t> repeats;
  auto* bench = app.add_subcommand("bench", "Wall-clock time per solve");
  add_common(bench, false);
  bench->add_option("--T-list", bench_T, "Iteration counts")->delimiter(',');
  bench->add_option("--repeats", repeats, "Timed solves per T");
  bench->add_option("--plot", c.plot, "Also write a plot script");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) {
      cli::cmd_gen_config(c.out);
    } else if (train->parsed()) {
      const auto cfg = load(c);
      const std::string log = pick(log_path, cfg.outputs.training_log);
      const auto r = cli::cmd_train(cfg, pick(c.out, cfg.outputs.params), log);
      if (!r.result.log.empty())
        std::cerr << "first batch loss " << r.result.log.front().loss << ", last "
                  << r.result.log.back().loss << '\n';
      maybe_plot(c.plot, cli::PlotKind::TrainingLog, log);
    } else if (eval->parsed()) {
      const auto cfg = load(c);
      const std::string out = pick(c.out, cfg.outputs.mse);
      const auto r = cli::cmd_eval(cfg, params_for(c, cfg),
                                   reference.empty() ? std::nullopt
                                                     : std::optional<std::filesystem::path>(reference),
                                   out);
      report_clamps(r.result.clamp_events);
      maybe_plot(c.plot, cli::PlotKind::Mse, out);
    } else if (cx->parsed()) {
      if (c.out.empty()) {
        cli::cmd_complexity(std::cout, n, m, T, ls, Ps);
      } else {
        std::ostringstream ss;
        cli::cmd_complexity(ss, n, m, T, ls, Ps);
        cli::write_text(c.out, ss.str());
      }
    } else if (an->parsed()) {
      const auto cfg = load(c);
      const std::string bound = pick(bound_path, cfg.outputs.bound);
      const auto r = cli::cmd_analyze(cfg, params_for(c, cfg), pick(c.out, cfg.outputs.analysis),
                                      bound);
      if (!r.trace.bound_holds()) std::cerr << "warning: bound violated on the diagnostic instance\n";
      maybe_plot(c.plot, cli::PlotKind::Bound, bound);
    } else if (bench->parsed()) {
      const auto cfg = load(c);
      const std::string out = pick(c.out, cfg.outputs.bench);
      const auto Ts = bench_T.empty() ? cfg.bench.iterations : bench_T;
      cli::cmd_bench(cfg, Ts, repeats.value_or(cfg.bench.repeats), out);
      maybe_plot(c.plot, cli::PlotKind::Bench, out);
    }
  } catch (const dupsista::TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDiverged;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
