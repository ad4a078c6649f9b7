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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fair/common.hpp"
#include "fair/dumpio.hpp"
#include "fair/stats.hpp"

namespace fair::diagnostics {

struct DiagnosticsConfig {
  stats::SlicedConfig sliced{};
  // Report |e_j| instead of the signed first-order loss change.
  bool absolute_errors = false;
};

/// Per-layer scores: utilization (class-separation) and reconstruction
/// error (first-order loss change) for every unit.
struct LayerDiagnostics {
  std::uint32_t layer_id = 0;
  std::vector<double> utilization;
  std::vector<double> reconstruction;
  std::size_t sample_count = 0;
  std::size_t class_count = 0;

  std::size_t units() const { return utilization.size(); }
  bool operator==(const LayerDiagnostics&) const = default;
};

inline void validate(const LayerDiagnostics& diag) {
  require(diag.utilization.size() == diag.reconstruction.size(),
          ErrorKind::invalid_input,
          "layer " + std::to_string(diag.layer_id) +
              ": utilization and reconstruction lengths differ");
  require(!diag.utilization.empty(), ErrorKind::invalid_input,
          "layer " + std::to_string(diag.layer_id) + " has no units");
  require(all_finite(diag.utilization) && all_finite(diag.reconstruction),
          ErrorKind::invalid_input,
          "layer " + std::to_string(diag.layer_id) + ": non-finite score");
  for (double u : diag.utilization)
    require(u >= 0.0, ErrorKind::invalid_input,
            "layer " + std::to_string(diag.layer_id) + ": negative utilization");
}

struct ScoreReport {
  std::vector<LayerDiagnostics> layers;
  nlohmann::json meta = nlohmann::json::object();

  const LayerDiagnostics* find(std::uint32_t layer_id) const {
    for (const auto& l : layers)
      if (l.layer_id == layer_id) return &l;
    return nullptr;
  }
};

/// Sample indices grouped by class label, in ascending class order.
inline std::vector<std::vector<std::size_t>> group_by_class(
    std::span<const std::uint32_t> labels) {
  std::map<std::uint32_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(groups.size());
  for (auto& [cls, idx] : groups) out.push_back(std::move(idx));
  return out;
}

/// Utilization score of every unit: max over unordered class pairs of the
/// W1 distance between the unit's class-conditional output samples. Unit
/// outputs with d > 1 use sliced W1 with one shared set of directions.
///
/// `values` is laid out [n, J, d].
template <typename T>
std::vector<double> utilization_scores(std::span<const T> values, std::size_t n,
                                       std::size_t J, std::size_t d,
                                       std::span<const std::uint32_t> labels,
                                       const stats::SlicedConfig& sliced = {}) {
  require(values.size() == n * J * d && labels.size() == n && d >= 1,
          ErrorKind::invalid_input, "utilization_scores: shape mismatch");
  const auto classes = group_by_class(labels);
  require(classes.size() >= 2, ErrorKind::invalid_input,
          "utilization_scores: fewer than 2 classes present");
  for (const auto& c : classes)
    require(c.size() >= 2, ErrorKind::invalid_input,
            "utilization_scores: class " + std::to_string(labels[c.front()]) +
                " has fewer than 2 samples");

  const std::size_t K = classes.size();
  std::vector<double> directions;
  std::size_t projections = 1;
  if (d > 1) {
    require(sliced.projections >= 1, ErrorKind::invalid_input,
            "utilization_scores: num_projections must be >= 1");
    directions = stats::random_directions(sliced.projections, d, sliced.seed);
    projections = sliced.projections;
  }

  std::vector<double> scores(J, 0.0);
  // sorted[k][c]: sorted 1-D sample of class c along projection k.
  std::vector<std::vector<std::vector<double>>> sorted(
      projections, std::vector<std::vector<double>>(K));
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t k = 0; k < projections; ++k) {
      for (std::size_t c = 0; c < K; ++c) {
        auto& dst = sorted[k][c];
        dst.resize(classes[c].size());
        for (std::size_t r = 0; r < classes[c].size(); ++r) {
          const T* x = values.data() + (classes[c][r] * J + j) * d;
          if (d == 1) {
            dst[r] = static_cast<double>(x[0]);
          } else {
            const double* theta = directions.data() + k * d;
            double acc = 0.0;
            for (std::size_t q = 0; q < d; ++q) acc += static_cast<double>(x[q]) * theta[q];
            dst[r] = acc;
          }
        }
        std::stable_sort(dst.begin(), dst.end());
      }
    }
    double best = 0.0;
    for (std::size_t c1 = 1; c1 < K; ++c1) {
      for (std::size_t c2 = 0; c2 < c1; ++c2) {
        double dist = 0.0;
        for (std::size_t k = 0; k < projections; ++k)
          dist += stats::wasserstein_1d_sorted(sorted[k][c1], sorted[k][c2]);
        best = std::max(best, dist / static_cast<double>(projections));
      }
    }
    scores[j] = best;
  }
  return scores;
}

inline std::vector<double> utilization_scores(const dumpio::Dump& acts,
                                              const stats::SlicedConfig& sliced = {}) {
  require(acts.header.kind == dumpio::DumpKind::activations, ErrorKind::invalid_input,
          "utilization_scores: expected an activation dump");
  return utilization_scores(std::span<const float>(acts.data), acts.samples(),
                            acts.units(), acts.dim(),
                            std::span<const std::uint32_t>(acts.labels), sliced);
}

/// e_j = (G_w[j] . w[j] + G_b[j] * b[j]) / n, where G are loss gradients
/// summed over the n pruning samples. Weight arrays are [J, d].
template <typename T>
std::vector<double> reconstruction_errors(std::span<const T> wgrad, std::span<const T> bgrad,
                                          std::span<const T> w, std::span<const T> b,
                                          std::size_t J, std::size_t d, std::size_t n,
                                          bool absolute = false) {
  require(wgrad.size() == J * d && w.size() == J * d && bgrad.size() == J &&
              b.size() == J,
          ErrorKind::contract_mismatch, "reconstruction_errors: shape mismatch");
  require(n > 0, ErrorKind::invalid_input, "reconstruction_errors: sample_count is 0");
  require(all_finite(wgrad) && all_finite(bgrad) && all_finite(w) && all_finite(b),
          ErrorKind::invalid_input, "reconstruction_errors: non-finite input");
  std::vector<double> errors(J);
  for (std::size_t j = 0; j < J; ++j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c)
      acc += static_cast<double>(wgrad[j * d + c]) * static_cast<double>(w[j * d + c]);
    acc += static_cast<double>(bgrad[j]) * static_cast<double>(b[j]);
    acc /= static_cast<double>(n);
    errors[j] = absolute ? std::abs(acc) : acc;
  }
  return errors;
}

inline std::vector<double> reconstruction_errors(const dumpio::Dump& wgrad,
                                                 const dumpio::Dump& bgrad,
                                                 const dumpio::Dump& w, const dumpio::Dump& b,
                                                 bool absolute = false) {
  using dumpio::DumpKind;
  require(wgrad.header.kind == DumpKind::weight_grad &&
              bgrad.header.kind == DumpKind::bias_grad &&
              w.header.kind == DumpKind::weights && b.header.kind == DumpKind::biases,
          ErrorKind::invalid_input, "reconstruction_errors: unexpected dump kinds");
  const std::size_t J = wgrad.units();
  require(bgrad.units() == J && w.units() == J && b.units() == J,
          ErrorKind::contract_mismatch, "reconstruction_errors: unit counts differ");
  require(w.dim() == wgrad.dim(), ErrorKind::contract_mismatch,
          "reconstruction_errors: weight and gradient row lengths differ");
  require(wgrad.samples() == bgrad.samples(), ErrorKind::contract_mismatch,
          "reconstruction_errors: gradient dumps disagree on sample_count");
  return reconstruction_errors(std::span<const float>(wgrad.data),
                               std::span<const float>(bgrad.data),
                               std::span<const float>(w.data), std::span<const float>(b.data),
                               J, wgrad.dim(), wgrad.samples(), absolute);
}

/// The five dumps describing one prunable layer.
struct LayerDumps {
  dumpio::Dump acts, wgrad, bgrad, w, b;
};

inline LayerDiagnostics diagnose_layer(const LayerDumps& dumps,
                                       const DiagnosticsConfig& cfg = {}) {
  const std::uint32_t layer = dumps.acts.header.layer_id;
  for (const auto* d : {&dumps.wgrad, &dumps.bgrad, &dumps.w, &dumps.b}) {
    require(d->header.layer_id == layer, ErrorKind::contract_mismatch,
            std::string("layer_id mismatch: ") + dumpio::kind_name(d->header.kind) +
                " dump is for layer " + std::to_string(d->header.layer_id) +
                ", activations for layer " + std::to_string(layer));
    require(d->units() == dumps.acts.units(), ErrorKind::contract_mismatch,
            "unit count mismatch in layer " + std::to_string(layer));
  }
  LayerDiagnostics diag;
  diag.layer_id = layer;
  diag.utilization = utilization_scores(dumps.acts, cfg.sliced);
  diag.reconstruction = reconstruction_errors(dumps.wgrad, dumps.bgrad, dumps.w, dumps.b,
                                              cfg.absolute_errors);
  diag.sample_count = dumps.acts.samples();
  diag.class_count = group_by_class(dumps.acts.labels).size();
  validate(diag);
  return diag;
}

// JSON: {"layers":[{"layer","J","utilization","reconstruction",...}],"meta":{}}

inline nlohmann::json to_json(const ScoreReport& report) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : report.layers) {
    layers.push_back({{"layer", l.layer_id},
                      {"J", l.units()},
                      {"utilization", l.utilization},
                      {"reconstruction", l.reconstruction},
                      {"n", l.sample_count},
                      {"K", l.class_count}});
  }
  return {{"layers", layers}, {"meta", report.meta}};
}

inline ScoreReport report_from_json(const nlohmann::json& j) {
  ScoreReport report;
  try {
    std::set<std::uint32_t> seen;
    for (const auto& l : j.at("layers")) {
      LayerDiagnostics diag;
      diag.layer_id = l.at("layer").get<std::uint32_t>();
      diag.utilization = l.at("utilization").get<std::vector<double>>();
      diag.reconstruction = l.at("reconstruction").get<std::vector<double>>();
      diag.sample_count = l.value("n", std::size_t{0});
      diag.class_count = l.value("K", std::size_t{0});
      require(l.at("J").get<std::size_t>() == diag.units(), ErrorKind::invalid_input,
              "report layer " + std::to_string(diag.layer_id) + ": J does not match scores");
      require(seen.insert(diag.layer_id).second, ErrorKind::invalid_input,
              "duplicate layer " + std::to_string(diag.layer_id) + " in report");
      validate(diag);
      report.layers.push_back(std::move(diag));
    }
    if (j.contains("meta")) report.meta = j.at("meta");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("malformed score report: ") + e.what());
  }
  return report;
}

}  // namespace fair::diagnostics
