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

// Experiment configuration: a strict JSON schema with unknown-key rejection.
// Keys beginning with "//" are comments and are skipped on read.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dupsista/analysis.hpp"
#include "dupsista/ensemble.hpp"
#include "dupsista/unfold.hpp"

namespace dupsista::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

/// Thrown for malformed or inconsistent configuration and parameter files.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class TrainingMode { Learned, Fixed };

struct TrainingSpec {
  TrainingMode mode = TrainingMode::Learned;
  std::size_t batch_size = 50;
  std::size_t inner_loops = 50;
  AdamHyper adam{};
  bool incremental = true;
  bool retrain_prefix = true;

  bool operator==(const TrainingSpec&) const = default;
};

struct BenchSpec {
  std::vector<std::size_t> iterations{20, 40, 60, 80, 100};
  std::size_t repeats = 50;

  bool operator==(const BenchSpec&) const = default;
};

struct OutputPaths {
  std::string params = "params.json";
  std::string training_log = "training_log.csv";
  std::string mse = "mse.csv";
  std::string analysis = "analysis.json";
  std::string bound = "bound.csv";
  std::string bench = "bench.csv";

  bool operator==(const OutputPaths&) const = default;
};

struct ExperimentConfig {
  SystemSpec system{};
  SolverVariant variant = SolverVariant::psista(2);
  std::size_t T = 15;
  std::size_t ensemble_systems = 50;
  std::size_t ensemble_samples = 50;
  TrainingSpec training{};
  MseMode mse_mode = MseMode::PerElement;
  analysis::CoherenceReading coherence_reading =
      analysis::CoherenceReading::IncludeDiagonal;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  BenchSpec bench{};
  OutputPaths outputs{};

  bool operator==(const ExperimentConfig&) const = default;

  Ensemble ensemble() const { return {ensemble_systems, ensemble_samples, seed}; }

  TrainConfig train_config() const {
    TrainConfig tc;
    tc.system = system;
    tc.variant = variant;
    tc.T_max = T;
    tc.batch_size = training.batch_size;
    tc.inner_loops = training.inner_loops;
    tc.adam = training.adam;
    tc.incremental = training.incremental;
    tc.retrain_prefix = training.retrain_prefix;
    tc.seed = seed;
    tc.threads = threads;
    return tc;
  }

  EvalConfig eval_config() const { return {system, variant, T, threads}; }

  void validate() const {
    auto need = [](bool ok, const std::string& msg) {
      if (!ok) throw ConfigError("config: " + msg);
    };
    try {
      system.validate();
    } catch (const ContractViolation& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    need(T >= 1, "iterations must be >= 1");
    need(ensemble_systems >= 1 && ensemble_samples >= 1,
         "ensemble counts must be >= 1");
    need(training.batch_size >= 1, "training.batch_size must be >= 1");
    need(training.adam.learning_rate > 0.0, "training.learning_rate must be > 0");
    need(training.adam.beta1 >= 0.0 && training.adam.beta1 < 1.0,
         "training.beta1 must lie in [0,1)");
    need(training.adam.beta2 >= 0.0 && training.adam.beta2 < 1.0,
         "training.beta2 must lie in [0,1)");
    need(training.adam.epsilon > 0.0, "training.epsilon must be > 0");
    need(bench.repeats >= 1, "bench.repeats must be >= 1");
    need(!bench.iterations.empty(), "bench.iterations must not be empty");
    for (auto t : bench.iterations) need(t >= 1, "bench.iterations entries must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Names

inline std::string to_string(TrainingMode m) {
  return m == TrainingMode::Learned ? "learned" : "fixed";
}

inline std::string to_string(analysis::CoherenceReading r) {
  return r == analysis::CoherenceReading::IncludeDiagonal ? "include_diagonal"
                                                          : "off_diagonal";
}

inline SolverVariant variant_from(const std::string& kind, std::size_t period) {
  if (kind == "ista") return SolverVariant::ista();
  if (kind == "sketched_ista") return SolverVariant::sketched_ista();
  if (kind == "psista") {
    if (period < 1) throw ConfigError("config: variant.period must be >= 1");
    return SolverVariant::psista(period);
  }
  throw ConfigError("config: unknown variant kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Serialization

inline Json to_json(const ExperimentConfig& c, bool with_comments = false) {
  auto note = [&](Json& j, const std::string& key, const std::string& text) {
    if (with_comments) j["//" + key] = text;
  };
  Json j;
  note(j, "about", "dupsista experiment configuration. Keys starting with // are ignored.");
  j["schema_version"] = kSchemaVersion;

  Json sys;
  note(sys, "n", "signal length");
  sys["n"] = c.system.n;
  note(sys, "m", "number of measurements (rows of A)");
  sys["m"] = c.system.m;
  note(sys, "l", "sketch size, 1 <= l <= m");
  sys["l"] = c.system.l;
  j["system"] = std::move(sys);

  Json var;
  note(var, "kind", "ista | sketched_ista | psista");
  var["kind"] = c.variant.name();
  note(var, "period", "psista only: every period-th iteration uses the full gradient");
  var["period"] = c.variant.period();
  j["variant"] = std::move(var);

  note(j, "sketch_kind", "gaussian | count_sketch");
  j["sketch_kind"] = std::string(to_string(c.system.sketch_kind));
  note(j, "iterations", "number of unrolled iterations T");
  j["iterations"] = c.T;
  note(j, "sigma2", "noise variance");
  j["sigma2"] = c.system.sigma2;

  Json sig;
  note(sig, "p_nonzero", "Bernoulli-Gaussian signal: probability a coordinate is nonzero");
  sig["p_nonzero"] = c.system.p_nonzero;
  j["signal"] = std::move(sig);

  Json ens;
  note(ens, "systems", "number of (A, S) draws in evaluation");
  ens["systems"] = c.ensemble_systems;
  note(ens, "samples", "(x, y) samples per system");
  ens["samples"] = c.ensemble_samples;
  j["ensemble"] = std::move(ens);

  Json tr;
  note(tr, "mode", "learned: train step sizes and thresholds; fixed: use 1/lambda_max(A^T A)");
  tr["mode"] = to_string(c.training.mode);
  tr["batch_size"] = c.training.batch_size;
  note(tr, "inner_loops", "Adam steps per incremental stage; A and S are redrawn each step");
  tr["inner_loops"] = c.training.inner_loops;
  tr["learning_rate"] = c.training.adam.learning_rate;
  note(tr, "incremental", "grow the unrolled depth one iteration per stage");
  tr["incremental"] = c.training.incremental;
  note(tr, "retrain_prefix", "keep training earlier iterations in later stages");
  tr["retrain_prefix"] = c.training.retrain_prefix;
  tr["beta1"] = c.training.adam.beta1;
  tr["beta2"] = c.training.adam.beta2;
  tr["epsilon"] = c.training.adam.epsilon;
  j["training"] = std::move(tr);

  note(j, "mse_mode", "per_element: ||x - x*||^2 / n; total: ||x - x*||^2");
  j["mse_mode"] = std::string(to_string(c.mse_mode));
  note(j, "coherence_reading",
       "analysis: off_diagonal or include_diagonal maxima of the Gram matrices");
  j["coherence_reading"] = to_string(c.coherence_reading);
  note(j, "seed", "master seed; every random stream derives from it");
  j["seed"] = c.seed;
  note(j, "threads", "worker threads, 0 = hardware concurrency; results do not depend on it");
  j["threads"] = c.threads;

  Json b;
  note(b, "iterations", "T values timed by the bench command");
  b["iterations"] = c.bench.iterations;
  b["repeats"] = c.bench.repeats;
  j["bench"] = std::move(b);

  Json o;
  o["params"] = c.outputs.params;
  o["training_log"] = c.outputs.training_log;
  o["mse"] = c.outputs.mse;
  o["analysis"] = c.outputs.analysis;
  o["bound"] = c.outputs.bound;
  o["bench"] = c.outputs.bench;
  j["outputs"] = std::move(o);
  return j;
}

namespace detail {

inline bool is_comment(const std::string& key) { return key.rfind("//", 0) == 0; }

/// Reads members of one JSON object, rejecting unknown keys.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError("config: " + where_ + " must be an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.push_back(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;  // keep default
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config: " + path(key) + ": " + e.what());
    }
  }

  /// Unsigned integers must be non-negative JSON integers.
  template <class U>
  void get_count(const std::string& key, U& out) {
    seen_.push_back(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_number_unsigned())
      throw ConfigError("config: " + path(key) + " must be a non-negative integer");
    out = it->template get<U>();
  }

  void get_counts(const std::string& key, std::vector<std::size_t>& out) {
    seen_.push_back(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_array())
      throw ConfigError("config: " + path(key) + " must be an array");
    out.clear();
    for (const auto& v : *it) {
      if (!v.is_number_unsigned())
        throw ConfigError("config: " + path(key) + " entries must be non-negative integers");
      out.push_back(v.get<std::size_t>());
    }
  }

  const Json* child(const std::string& key) {
    seen_.push_back(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const {
    return where_.empty() ? key : where_ + "." + key;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (is_comment(it.key())) continue;
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        throw ConfigError("config: unknown key '" + path(it.key()) + "'");
    }
  }

 private:
  const Json& j_;
  std::string where_;
  std::vector<std::string> seen_;
};

}  // namespace detail

/// Missing keys keep their defaults; unknown keys are errors.
inline ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  detail::ObjectReader top(j, "");
  int version = kSchemaVersion;
  top.get("schema_version", version);
  if (version != kSchemaVersion)
    throw ConfigError("config: unsupported schema_version " + std::to_string(version));

  if (const Json* s = top.child("system")) {
    detail::ObjectReader r(*s, "system");
    r.get_count("n", c.system.n);
    r.get_count("m", c.system.m);
    r.get_count("l", c.system.l);
    r.finish();
  }
  if (const Json* v = top.child("variant")) {
    detail::ObjectReader r(*v, "variant");
    std::string kind = c.variant.name();
    std::size_t period = c.variant.period();
    r.get("kind", kind);
    r.get_count("period", period);
    r.finish();
    c.variant = variant_from(kind, period);
  }
  std::string sketch(to_string(c.system.sketch_kind));
  top.get("sketch_kind", sketch);
  try {
    c.system.sketch_kind = sketch_kind_from_string(sketch);
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  top.get_count("iterations", c.T);
  top.get("sigma2", c.system.sigma2);
  if (const Json* s = top.child("signal")) {
    detail::ObjectReader r(*s, "signal");
    r.get("p_nonzero", c.system.p_nonzero);
    r.finish();
  }
  if (const Json* e = top.child("ensemble")) {
    detail::ObjectReader r(*e, "ensemble");
    r.get_count("systems", c.ensemble_systems);
    r.get_count("samples", c.ensemble_samples);
    r.finish();
  }
  if (const Json* t = top.child("training")) {
    detail::ObjectReader r(*t, "training");
    std::string mode = to_string(c.training.mode);
    r.get("mode", mode);
    if (mode == "learned")
      c.training.mode = TrainingMode::Learned;
    else if (mode == "fixed")
      c.training.mode = TrainingMode::Fixed;
    else
      throw ConfigError("config: training.mode must be 'learned' or 'fixed'");
    r.get_count("batch_size", c.training.batch_size);
    r.get_count("inner_loops", c.training.inner_loops);
    r.get("learning_rate", c.training.adam.learning_rate);
    r.get("incremental", c.training.incremental);
    r.get("retrain_prefix", c.training.retrain_prefix);
    r.get("beta1", c.training.adam.beta1);
    r.get("beta2", c.training.adam.beta2);
    r.get("epsilon", c.training.adam.epsilon);
    r.finish();
  }
  std::string mode(to_string(c.mse_mode));
  top.get("mse_mode", mode);
  try {
    c.mse_mode = mse_mode_from_string(mode);
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  std::string reading = to_string(c.coherence_reading);
  top.get("coherence_reading", reading);
  if (reading == "include_diagonal")
    c.coherence_reading = analysis::CoherenceReading::IncludeDiagonal;
  else if (reading == "off_diagonal")
    c.coherence_reading = analysis::CoherenceReading::OffDiagonal;
  else
    throw ConfigError("config: coherence_reading must be include_diagonal or off_diagonal");
  top.get_count("seed", c.seed);
  top.get_count("threads", c.threads);
  if (const Json* b = top.child("bench")) {
    detail::ObjectReader r(*b, "bench");
    r.get_counts("iterations", c.bench.iterations);
    r.get_count("repeats", c.bench.repeats);
    r.finish();
  }
  if (const Json* o = top.child("outputs")) {
    detail::ObjectReader r(*o, "outputs");
    r.get("params", c.outputs.params);
    r.get("training_log", c.outputs.training_log);
    r.get("mse", c.outputs.mse);
    r.get("analysis", c.outputs.analysis);
    r.get("bound", c.outputs.bound);
    r.get("bench", c.outputs.bench);
    r.finish();
  }
  top.finish();
  c.validate();
  return c;
}

inline Json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(what + ": invalid JSON: " + e.what());
  }
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(parse_json_text(read_text(path), path.string()));
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

/// Hash of the canonical (comment-free, compact) form. The thread count is
/// left out since results do not depend on it.
inline std::string config_hash(const ExperimentConfig& c) {
  Json j = to_json(c);
  j.erase("threads");
  return hex64(fnv1a(j.dump()));
}

/// "dupsista 0.1.0 config_hash=<hex> seed=<n>"
inline std::string provenance(const ExperimentConfig& c) {
  return std::string("dupsista ") + kToolVersion + " config_hash=" + config_hash(c) +
         " seed=" + std::to_string(c.seed);
}

}  // namespace dupsista::cli
