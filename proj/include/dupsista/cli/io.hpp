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

// Output plumbing: locale-independent number formatting, CSV reading,
// atomic-enough file writes, and the learned-parameter file.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "dupsista/cli/config.hpp"

namespace dupsista::cli {

/// Shortest representation that round-trips, '.' decimal point.
inline std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("fmt: cannot format number");
  return std::string(buf, end);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ConfigError("csv: missing column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Lines starting with '#' are provenance comments.
inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
    } else {
      if (cells.size() != t.header.size())
        throw ConfigError("csv: row has " + std::to_string(cells.size()) +
                          " cells, header has " + std::to_string(t.header.size()));
      t.rows.push_back(std::move(cells));
    }
  }
  if (!have_header) throw ConfigError("csv: no header row");
  return t;
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ConfigError("csv: not a number: '" + s + "'");
  return v;
}

// ---------------------------------------------------------------------------
// Sketches are stored by seed and regenerated; entries are never written.

inline Json sketch_to_json(const Sketch& S) {
  if (!S.seed())
    throw ConfigError("sketch: only sketches drawn from a fresh seeded generator "
                      "can be serialized");
  Json j;
  j["kind"] = std::string(to_string(S.kind()));
  j["l"] = S.l();
  j["m"] = S.m();
  j["seed"] = *S.seed();
  return j;
}

inline Sketch sketch_from_json(const Json& j) {
  try {
    detail::ObjectReader r(j, "sketch");
    std::string kind;
    std::size_t l = 0, m = 0;
    std::uint64_t seed = 0;
    r.get("kind", kind);
    r.get_count("l", l);
    r.get_count("m", m);
    r.get_count("seed", seed);
    r.finish();
    return make_sketch(sketch_kind_from_string(kind), seed, l, m);
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("sketch: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Learned parameters

struct ParamsFile {
  std::size_t T = 0;
  std::size_t P = 0;
  std::size_t l = 0, n = 0, m = 0;
  std::string sketch_kind;
  std::string variant;
  ParamSchedule schedule;
  double initial_value = 0.0;
  Json training_config;
  std::string training_log_digest;
};

inline std::string training_log_csv(const ExperimentConfig& cfg,
                                    const std::vector<TrainLogEntry>& log) {
  std::string s = "# " + provenance(cfg) + "\nstage,inner,loss\n";
  for (const auto& e : log)
    s += std::to_string(e.stage) + ',' + std::to_string(e.inner) + ',' + fmt(e.loss) + '\n';
  return s;
}

inline Json params_to_json(const ExperimentConfig& cfg, const ParamSchedule& schedule,
                           double initial_value, const std::string& log_digest) {
  Json j;
  j["header"] = provenance(cfg);
  j["T"] = schedule.T();
  j["P"] = cfg.variant.period();
  j["l"] = cfg.system.l;
  j["n"] = cfg.system.n;
  j["m"] = cfg.system.m;
  j["sketch_kind"] = std::string(to_string(cfg.system.sketch_kind));
  j["variant"] = cfg.variant.name();
  j["etas"] = schedule.etas;
  j["lambdas"] = schedule.lambdas;
  j["initial_value"] = initial_value;
  Json tc = to_json(cfg)["training"];
  tc["seed"] = cfg.seed;
  j["training_config"] = std::move(tc);
  j["training_log_digest"] = log_digest;
  return j;
}

inline ParamsFile params_from_json(const Json& j) {
  ParamsFile p;
  try {
    p.T = j.at("T").get<std::size_t>();
    p.P = j.at("P").get<std::size_t>();
    p.l = j.at("l").get<std::size_t>();
    p.n = j.at("n").get<std::size_t>();
    p.m = j.at("m").get<std::size_t>();
    p.sketch_kind = j.at("sketch_kind").get<std::string>();
    p.variant = j.at("variant").get<std::string>();
    p.schedule.etas = j.at("etas").get<std::vector<double>>();
    p.schedule.lambdas = j.at("lambdas").get<std::vector<double>>();
    if (j.contains("initial_value")) p.initial_value = j.at("initial_value").get<double>();
    if (j.contains("training_config")) p.training_config = j.at("training_config");
    if (j.contains("training_log_digest"))
      p.training_log_digest = j.at("training_log_digest").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("params: ") + e.what());
  }
  if (p.schedule.etas.size() != p.T || p.schedule.lambdas.size() != p.T)
    throw ConfigError("params: etas/lambdas length does not equal T=" + std::to_string(p.T));
  try {
    p.schedule.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("params: ") + e.what());
  }
  return p;
}

inline ParamsFile load_params(const std::filesystem::path& path) {
  return params_from_json(parse_json_text(read_text(path), path.string()));
}

/// Throws ConfigError when the parameter file was produced for other
/// dimensions, depth, period or variant.
inline void check_params_match(const ExperimentConfig& cfg, const ParamsFile& p) {
  auto need = [](bool ok, const std::string& what, std::size_t got, std::size_t want) {
    if (!ok)
      throw ConfigError("params mismatch: " + what + " is " + std::to_string(got) +
                        " but config has " + std::to_string(want));
  };
  need(p.T == cfg.T, "T", p.T, cfg.T);
  need(p.n == cfg.system.n, "n", p.n, cfg.system.n);
  need(p.m == cfg.system.m, "m", p.m, cfg.system.m);
  need(p.l == cfg.system.l, "l", p.l, cfg.system.l);
  need(p.P == cfg.variant.period(), "P", p.P, cfg.variant.period());
  if (p.variant != cfg.variant.name())
    throw ConfigError("params mismatch: variant is " + p.variant + " but config has " +
                      cfg.variant.name());
  if (p.sketch_kind != to_string(cfg.system.sketch_kind))
    throw ConfigError("params mismatch: sketch_kind is " + p.sketch_kind +
                      " but config has " + std::string(to_string(cfg.system.sketch_kind)));
}

}  // namespace dupsista::cli
