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

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <sstream>

#include "dupsista/cli/commands.hpp"
#include "oracles.hpp"

using namespace dupsista;
using namespace dupsista::cli;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("dupsista_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + std::to_string(counter++) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.system = {32, 16, 8, SketchKind::Gaussian, 0.01, 0.1};
  c.variant = SolverVariant::psista(2);
  c.T = 4;
  c.ensemble_systems = 3;
  c.ensemble_samples = 4;
  c.training.batch_size = 6;
  c.training.inner_loops = 5;
  c.training.adam.learning_rate = 1e-3;
  c.seed = 5;
  c.threads = 1;
  return c;
}

}  // namespace

TEST(Config, Defaults) {
  const ExperimentConfig c;
  EXPECT_EQ(c.system.sigma2, 0.01);
  EXPECT_EQ(c.training.batch_size, 50u);
  EXPECT_EQ(c.training.inner_loops, 50u);
  EXPECT_EQ(c.training.adam.learning_rate, 1e-4);
  EXPECT_EQ(c.training.adam.beta1, 0.9);
  EXPECT_EQ(c.training.adam.beta2, 0.999);
  EXPECT_EQ(c.training.adam.epsilon, 1e-8);
  EXPECT_EQ(c.variant.period(), 2u);
  EXPECT_EQ(c.T, 15u);
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c = small_config();
  c.variant = SolverVariant::sketched_ista();
  c.system.sketch_kind = SketchKind::CountSketch;
  c.mse_mode = MseMode::Total;
  c.coherence_reading = analysis::CoherenceReading::OffDiagonal;
  c.training.mode = TrainingMode::Fixed;
  c.bench.iterations = {3, 9};
  c.outputs.mse = "out/curve.csv";
  EXPECT_EQ(config_from_json(to_json(c)), c);
  EXPECT_EQ(config_from_json(to_json(c, true)), c);
  EXPECT_EQ(config_hash(c), config_hash(config_from_json(to_json(c, true))));
}

TEST(Config, PartialFileKeepsDefaults) {
  const auto c = config_from_json(parse_json_text(R"({"iterations": 7, "seed": 3})", "inline"));
  EXPECT_EQ(c.T, 7u);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.system, SystemSpec{});
}

TEST(Config, RejectsBadInput) {
  auto parse = [](const std::string& text) {
    return config_from_json(parse_json_text(text, "inline"));
  };
  EXPECT_THROW(parse(R"({"iteratons": 7})"), ConfigError);
  EXPECT_THROW(parse(R"({"system": {"n": 8, "q": 1}})"), ConfigError);
  EXPECT_THROW(parse(R"({"iterations": -1})"), ConfigError);
  EXPECT_THROW(parse(R"({"iterations": "ten"})"), ConfigError);
  EXPECT_THROW(parse(R"({"variant": {"kind": "fista"}})"), ConfigError);
  EXPECT_THROW(parse(R"({"schema_version": 99})"), ConfigError);
  EXPECT_THROW(parse_json_text("{", "inline"), ConfigError);
  EXPECT_NO_THROW(parse(R"({"//iteratons": "ignored"})"));
  ExperimentConfig c;
  c.system.l = c.system.m + 1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(GenConfig, WritesReparsableDefaults) {
  TempDir dir;
  cmd_gen_config(dir / "sub/config.json");
  const ExperimentConfig c = load_config(dir / "sub/config.json");
  EXPECT_EQ(c, ExperimentConfig{});
  EXPECT_NE(read_text(dir / "sub/config.json").find("\"//n\""), std::string::npos);
  EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
}

TEST(Provenance, HeaderAndHash) {
  const ExperimentConfig a = small_config();
  ExperimentConfig b = a;
  b.seed = 6;
  EXPECT_EQ(provenance(a).rfind("dupsista 0.1.0 config_hash=", 0), 0u);
  EXPECT_NE(provenance(a).find("seed=5"), std::string::npos);
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  EXPECT_EQ(hex64(fnv1a("")), "cbf29ce484222325");
  EXPECT_EQ(hex64(fnv1a("a")), "af63dc4c8601ec8c");
}

TEST(Csv, ParsesHeaderAndSkipsComments) {
  const CsvTable t = parse_csv("# note\na,b\n1,2\n\n3,4\n");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.column("b"), 1u);
  EXPECT_EQ(t.rows[1][0], "3");
  EXPECT_THROW(t.column("c"), ConfigError);
  EXPECT_THROW(parse_csv("a,b\n1\n"), ConfigError);
  EXPECT_THROW(parse_double("x"), ConfigError);
  EXPECT_EQ(parse_double(fmt(0.1)), 0.1);
  EXPECT_EQ(parse_double(fmt(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(SketchJson, RoundTrip) {
  for (SketchKind kind : {SketchKind::Gaussian, SketchKind::CountSketch}) {
    Rng rng(8);
    const Sketch S = make_sketch(rng, kind, 5, 12);
    const Sketch back = sketch_from_json(sketch_to_json(S));
    EXPECT_EQ(back.kind(), kind);
    const Matrix a = back.densify(), b = S.densify();
    EXPECT_TRUE(std::ranges::equal(a.elements(), b.elements()));
  }
  EXPECT_THROW(sketch_to_json(Sketch::dense(Matrix(2, 3))), ConfigError);
}

TEST(Train, FixedModeWritesInitialization) {
  ExperimentConfig c = small_config();
  c.training.mode = TrainingMode::Fixed;
  TempDir dir;
  const auto out = cmd_train(c, dir / "params.json", dir / "log.csv");
  EXPECT_TRUE(out.result.log.empty());
  const ParamsFile p = load_params(dir / "params.json");
  EXPECT_EQ(p.T, 4u);
  EXPECT_EQ(p.P, 2u);
  EXPECT_EQ(p.variant, "psista");
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_EQ(p.schedule.etas[t], p.initial_value);
    EXPECT_EQ(p.schedule.lambdas[t], p.initial_value);
  }
  EXPECT_EQ(p.training_config.at("seed"), 5);
  EXPECT_EQ(p.training_log_digest, hex64(fnv1a(read_text(dir / "log.csv"))));
}

TEST(Train, ByteIdenticalAcrossRunsAndThreads) {
  ExperimentConfig c = small_config();
  TempDir dir;
  cmd_train(c, dir / "a.json", dir / "a.csv");
  c.threads = 3;
  const auto b = run_train(c);
  EXPECT_EQ(read_text(dir / "a.json"), b.params_json);
  EXPECT_EQ(read_text(dir / "a.csv"), b.log_csv);
  const CsvTable log = parse_csv(b.log_csv);
  EXPECT_EQ(log.rows.size(), 4u * 5u);
  EXPECT_EQ(log.header, (std::vector<std::string>{"stage", "inner", "loss"}));
}

TEST(Params, RoundTripAndValidation) {
  const ExperimentConfig c = small_config();
  ParamSchedule s;
  s.etas = {0.1, 0.2, 0.3, 1.0 / 3.0};
  s.lambdas = {0.01, -0.02, 0.03, 0.04};
  const ParamsFile p = params_from_json(params_to_json(c, s, 0.5, "abc"));
  EXPECT_EQ(p.schedule.etas, s.etas);
  EXPECT_EQ(p.schedule.lambdas, s.lambdas);
  EXPECT_EQ(p.initial_value, 0.5);
  EXPECT_EQ(p.training_log_digest, "abc");
  EXPECT_NO_THROW(check_params_match(c, p));

  ExperimentConfig other = c;
  other.T = 5;
  EXPECT_THROW(check_params_match(other, p), ConfigError);
  other = c;
  other.variant = SolverVariant::psista(3);
  EXPECT_THROW(check_params_match(other, p), ConfigError);
  other = c;
  other.system.l = 4;
  EXPECT_THROW(check_params_match(other, p), ConfigError);

  Json bad = params_to_json(c, s, 0.5, "abc");
  bad["etas"] = std::vector<double>{0.1};
  EXPECT_THROW(params_from_json(bad), ConfigError);
  bad = params_to_json(c, s, 0.5, "abc");
  bad.erase("lambdas");
  EXPECT_THROW(params_from_json(bad), ConfigError);
}

TEST(Eval, DefaultScheduleCurve) {
  ExperimentConfig c = small_config();
  c.variant = SolverVariant::ista();
  TempDir dir;
  const auto out = cmd_eval(c, std::nullopt, std::nullopt, dir / "mse.csv");
  const CsvTable t = parse_csv(read_text(dir / "mse.csv"));
  ASSERT_EQ(t.rows.size(), c.T + 1);
  EXPECT_EQ(t.header, (std::vector<std::string>{"t", "mse_mean", "mse_stderr", "mode"}));
  const auto direct = evaluate_ensemble(c.eval_config(), std::nullopt, c.ensemble());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    EXPECT_EQ(t.rows[i][0], std::to_string(i + 1));
    EXPECT_EQ(parse_double(t.rows[i][1]), direct.per_element.mean[i]);
    EXPECT_EQ(t.rows[i][3], "per_element");
  }
  // x^(1) = 0: the first row is the mean signal power per element
  EXPECT_GT(out.result.per_element.mean[0], out.result.per_element.mean[c.T]);
}

TEST(Eval, ReferenceRatioAndMismatch) {
  const ExperimentConfig c = small_config();
  TempDir dir;
  ExperimentConfig base = c;
  base.variant = SolverVariant::ista();
  cmd_eval(base, std::nullopt, std::nullopt, dir / "ista.csv");
  const auto out = run_eval(c, std::nullopt, dir / "ista.csv");
  const CsvTable t = parse_csv(out.csv);
  const std::size_t ratio = t.column("ratio");
  const auto ref = read_reference_curve(dir / "ista.csv", MseMode::PerElement);
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    EXPECT_EQ(parse_double(t.rows[i][ratio]), out.result.per_element.mean[i] / ref[i]);
  EXPECT_EQ(parse_double(t.rows[0][ratio]), 1.0);

  ExperimentConfig total = c;
  total.mse_mode = MseMode::Total;
  EXPECT_THROW(run_eval(total, std::nullopt, dir / "ista.csv"), ConfigError);
  ExperimentConfig longer = c;
  longer.T = 6;
  EXPECT_THROW(run_eval(longer, std::nullopt, dir / "ista.csv"), ConfigError);

  ParamsFile p = params_from_json(params_to_json(c, ParamSchedule::constant(4, 0.01, 0.01), 0.0, ""));
  ExperimentConfig deeper = c;
  deeper.T = 5;
  EXPECT_THROW(run_eval(deeper, p, std::nullopt), ConfigError);
  EXPECT_NO_THROW(run_eval(c, p, std::nullopt));
}

TEST(Complexity, CsvOutput) {
  std::ostringstream os;
  const std::vector<complexity::Count> ls{256, 128, 64, 32}, Ps{1, 2, 3, 5, 8};
  cmd_complexity(os, 1024, 512, 40, ls, Ps);
  const CsvTable t = parse_csv(os.str());
  ASSERT_EQ(t.rows.size(), 5u);
  EXPECT_EQ(t.rows[1][1], "63022080 (75.0%)");
  EXPECT_EQ(t.rows[4][4], "15192480 (18.1%)");
  const std::vector<complexity::Count> bad_l{513};
  EXPECT_THROW(cmd_complexity(os, 1024, 512, 40, bad_l, Ps), ConfigError);
  const std::vector<complexity::Count> bad_p{0};
  EXPECT_THROW(cmd_complexity(os, 1024, 512, 40, ls, bad_p), ConfigError);
  EXPECT_THROW(cmd_complexity(os, 1024, 512, 0, ls, Ps), ConfigError);
}

TEST(Analyze, ReportContents) {
  ExperimentConfig c = small_config();
  c.system = {128, 64, 32, SketchKind::Gaussian, 0.01, 0.05};
  c.T = 6;
  c.variant = SolverVariant::psista(3);
  TempDir dir;
  const auto out = cmd_analyze(c, std::nullopt, dir / "analysis.json", dir / "bound.csv");
  const Json j = parse_json_text(read_text(dir / "analysis.json"), "analysis");
  ASSERT_EQ(j.at("parameters").size(), 6u);
  const char* expected[] = {"OGU", "SGU", "SGU", "OGU", "SGU", "SGU"};
  for (std::size_t t = 0; t < 6; ++t)
    EXPECT_EQ(j["parameters"][t]["branch"].get<std::string>(), expected[t]);
  EXPECT_NEAR(j["cd_ratio"]["predicted"].get<double>(), 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(j["cd_ratio"]["empirical"].get<double>() / (1.0 / std::sqrt(3.0)), 1.0, 0.2);
  EXPECT_TRUE(j["bound"]["assumptions_hold"].get<bool>());
  EXPECT_TRUE(j["bound"]["bound_holds"].get<bool>());
  EXPECT_TRUE(j["bound"]["off_support_zero"].get<bool>());
  const CsvTable b = parse_csv(read_text(dir / "bound.csv"));
  ASSERT_EQ(b.rows.size(), 6u);
  for (const auto& r : b.rows)
    EXPECT_LE(parse_double(r[b.column("error")]), parse_double(r[b.column("bound")]));
  EXPECT_TRUE(out.trace.bound_holds());
}

TEST(Analyze, LearnedParameterMeans) {
  const ExperimentConfig c = small_config();
  ParamSchedule s;
  s.etas = {0.4, 0.1, 0.2, 0.3};
  s.lambdas = {0.01, 0.01, 0.01, 0.01};
  const ParamsFile p = params_from_json(params_to_json(c, s, 0.0, ""));
  const auto out = run_analyze(c, p, 2);
  EXPECT_DOUBLE_EQ(out.report["mean_eta_ogu"].get<double>(), 0.3);
  EXPECT_DOUBLE_EQ(out.report["mean_eta_sgu"].get<double>(), 0.2);
  EXPECT_EQ(out.report["schedule_assumptions"]["lambda_required"].size(), 4u);
}

TEST(Bench, SingleRepeatRow) {
  const ExperimentConfig c = small_config();
  TempDir dir;
  const std::vector<std::size_t> Ts{1, 3};
  const auto rows = cmd_bench(c, Ts, 1, dir / "bench.csv");
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_GT(r.time_ista, 0.0);
    EXPECT_GT(r.time_psista, 0.0);
    EXPECT_TRUE(std::isfinite(r.ratio()));
  }
  EXPECT_EQ(parse_csv(read_text(dir / "bench.csv")).rows.size(), 2u);
  EXPECT_THROW(run_bench(c, Ts, 0), ConfigError);
}

TEST(PlotScript, ReferencesCsv) {
  const std::string s = plot_script(PlotKind::Mse, "out/mse.csv");
  EXPECT_NE(s.find("out/mse.csv"), std::string::npos);
  EXPECT_NE(s.find("matplotlib"), std::string::npos);
}
