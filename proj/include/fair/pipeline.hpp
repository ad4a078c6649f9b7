// Copyright 2026 The FAIR-Pruner Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Glue between the modules: the on-disk dump directory layout, scoring a
// directory into a report, and iterative prune/fine-tune rounds.
//
// A dump directory holds `layer<L>_<kind>.fpd` for kind in act, wgrad, bgrad,
// weight, bias, plus an optional model.json {"layer_sizes": [...]} giving the
// full dense shape for pruning-rate accounting.

#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "fair/common.hpp"
#include "fair/diagnostics.hpp"
#include "fair/dumpio.hpp"
#include "fair/mininet.hpp"
#include "fair/planner.hpp"
#include "fair/surgery.hpp"

namespace fair::pipeline {

namespace fs = std::filesystem;
using dumpio::DumpKind;

inline constexpr DumpKind kAllKinds[] = {DumpKind::activations, DumpKind::weight_grad,
                                         DumpKind::bias_grad, DumpKind::weights,
                                         DumpKind::biases};

inline fs::path dump_path(const fs::path& dir, std::uint32_t layer, DumpKind kind) {
  return dir / ("layer" + std::to_string(layer) + "_" + dumpio::kind_name(kind) + ".fpd");
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::invalid_input, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_input, path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::invalid_input, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline void write_capture(const fs::path& dir, const mininet::Capture& cap,
                          const planner::ModelShape& shape) {
  fs::create_directories(dir);
  for (const auto& layer : cap.layers) {
    const auto dumps = layer.to_dumps();
    for (const auto* d : {&dumps.acts, &dumps.wgrad, &dumps.bgrad, &dumps.w, &dumps.b})
      dumpio::write_dump(dump_path(dir, layer.layer_id, d->header.kind), *d);
  }
  write_json(dir / "model.json", {{"layer_sizes", shape.sizes}});
}

/// Layer ids that have at least one dump file in `dir`, ascending.
inline std::vector<std::uint32_t> discover_layers(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorKind::invalid_input, dir.string() + " is not a directory");
  static const std::regex pattern(R"(layer(\d+)_(act|wgrad|bgrad|weight|bias)\.fpd)");
  std::set<std::uint32_t> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const auto name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern))
      ids.insert(static_cast<std::uint32_t>(std::stoul(m[1].str())));
  }
  return {ids.begin(), ids.end()};
}

inline diagnostics::LayerDumps load_layer(const fs::path& dir, std::uint32_t layer) {
  for (auto kind : kAllKinds)
    require(fs::exists(dump_path(dir, layer, kind)), ErrorKind::invalid_input,
            "layer " + std::to_string(layer) + ": missing dump kind " +
                std::to_string(static_cast<int>(kind)) + " (" + dumpio::kind_name(kind) +
                "), expected " + dump_path(dir, layer, kind).string());
  diagnostics::LayerDumps d;
  d.acts = dumpio::read_dump(dump_path(dir, layer, DumpKind::activations));
  d.wgrad = dumpio::read_dump(dump_path(dir, layer, DumpKind::weight_grad));
  d.bgrad = dumpio::read_dump(dump_path(dir, layer, DumpKind::bias_grad));
  d.w = dumpio::read_dump(dump_path(dir, layer, DumpKind::weights));
  d.b = dumpio::read_dump(dump_path(dir, layer, DumpKind::biases));
  for (const auto* dump : {&d.acts, &d.wgrad, &d.bgrad, &d.w, &d.b})
    require(dump->header.layer_id == layer, ErrorKind::contract_mismatch,
            "file for layer " + std::to_string(layer) + " declares layer_id " +
                std::to_string(dump->header.layer_id));
  return d;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Scores every layer found in `dir`. The timestamp is omitted when
/// `deterministic` is set so that reruns are byte-identical.
inline diagnostics::ScoreReport score_directory(const fs::path& dir,
                                                const diagnostics::DiagnosticsConfig& cfg,
                                                bool deterministic) {
  const auto layers = discover_layers(dir);
  require(!layers.empty(), ErrorKind::invalid_input, "no dumps found in " + dir.string());
  diagnostics::ScoreReport report;
  nlohmann::json paths = nlohmann::json::array();
  for (auto id : layers) {
    report.layers.push_back(diagnostics::diagnose_layer(load_layer(dir, id), cfg));
    for (auto kind : kAllKinds) paths.push_back(dump_path(dir, id, kind).string());
  }
  auto& meta = report.meta;
  meta["dumps"] = paths;
  meta["seed"] = cfg.sliced.seed;
  meta["projections"] = cfg.sliced.projections;
  meta["reconstruction_mode"] = cfg.absolute_errors ? "abs" : "signed";
  if (fs::exists(dir / "model.json"))
    meta["layer_sizes"] = read_json(dir / "model.json").at("layer_sizes");
  if (!deterministic) meta["timestamp"] = utc_timestamp();
  return report;
}

/// Dense shape recorded in a report's metadata, if any.
inline std::optional<planner::ModelShape> report_shape(const diagnostics::ScoreReport& report) {
  if (!report.meta.contains("layer_sizes")) return std::nullopt;
  return planner::ModelShape{report.meta.at("layer_sizes").get<std::vector<std::size_t>>()};
}

/// In-memory capture and scoring; dumps go through the same float32
/// encoding as files on disk.
inline diagnostics::ScoreReport score_net(const mininet::MiniNet& net,
                                          const mininet::Dataset& prune,
                                          const diagnostics::DiagnosticsConfig& cfg) {
  const auto cap = mininet::capture(net, prune);
  diagnostics::ScoreReport report;
  for (const auto& layer : cap.layers)
    report.layers.push_back(diagnostics::diagnose_layer(layer.to_dumps(), cfg));
  report.meta["layer_sizes"] = net.sizes();
  report.meta["seed"] = cfg.sliced.seed;
  report.meta["projections"] = cfg.sliced.projections;
  report.meta["reconstruction_mode"] = cfg.absolute_errors ? "abs" : "signed";
  return report;
}

struct IterateConfig {
  double alpha = 0.1;
  std::size_t rounds = 1;
  std::size_t ft_epochs = 10;
  double lr = 0.05;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  diagnostics::DiagnosticsConfig diagnostics{};
};

struct RoundMetrics {
  std::size_t round = 0;
  std::vector<std::size_t> removed;  // per hidden layer, this round
  std::size_t params = 0;
  double cumulative_pr = 0.0;        // against the original model
  double os_acc = 0.0, ft_acc = 0.0;
};

struct IterateResult {
  mininet::MiniNet net;
  std::vector<RoundMetrics> rounds;
  bool converged = false;  // stopped early: a round removed nothing
};

/// Repeated capture -> score -> plan -> apply -> fine-tune at a fixed level.
inline IterateResult iterate(mininet::MiniNet net, const mininet::Splits& data,
                             const IterateConfig& cfg) {
  require(cfg.rounds >= 1, ErrorKind::invalid_input, "rounds must be >= 1");
  const auto original = surgery::count_params(net);
  IterateResult out;
  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    auto dcfg = cfg.diagnostics;
    dcfg.sliced.seed = stream_seed(cfg.diagnostics.sliced.seed, "round", r);
    const auto report = score_net(net, data.prune, dcfg);
    const auto plan = planner::build_plan(report, cfg.alpha, net.shape());
    if (plan.total_removed() == 0) {
      out.converged = true;
      break;
    }
    auto pruned = surgery::apply(net, plan);
    RoundMetrics m;
    m.round = r + 1;
    m.removed = pruned.report.removed;
    m.params = pruned.report.params_after;
    m.cumulative_pr = 1.0 - static_cast<double>(m.params) / static_cast<double>(original);
    m.os_acc = mininet::evaluate(pruned.net, data.test).accuracy;
    net = mininet::finetune(std::move(pruned.net), data.train, cfg.ft_epochs, cfg.lr,
                            cfg.batch_size, stream_seed(cfg.seed, "finetune", r));
    m.ft_acc = mininet::evaluate(net, data.test).accuracy;
    out.rounds.push_back(std::move(m));
  }
  out.net = std::move(net);
  return out;
}

}  // namespace fair::pipeline
