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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fair/common.hpp"
#include "fair/diagnostics.hpp"
#include "fair/stats.hpp"

namespace fair::planner {

using diagnostics::LayerDiagnostics;
using diagnostics::ScoreReport;

/// Layer widths [inputs, hidden_1, ..., hidden_L, outputs] of a dense net.
/// Prunable layer ids are 0..L-1 and refer to hidden_1..hidden_L.
struct ModelShape {
  std::vector<std::size_t> sizes;

  std::size_t hidden_layers() const { return sizes.size() < 2 ? 0 : sizes.size() - 2; }
  std::size_t units(std::uint32_t layer) const { return sizes.at(layer + 1); }
};

/// Weights plus biases of the net after removing removed[l] units from
/// hidden layer l. A removed unit takes its weight row, its bias and its
/// fan-in column in the next layer with it.
inline std::size_t parameter_count(const ModelShape& shape,
                                   std::span<const std::size_t> removed = {}) {
  auto width = [&](std::size_t i) {
    std::size_t r = 0;
    if (i >= 1 && i - 1 < removed.size()) r = removed[i - 1];
    return shape.sizes[i] - r;
  };
  std::size_t total = 0;
  for (std::size_t i = 1; i < shape.sizes.size(); ++i)
    total += width(i) * width(i - 1) + width(i);
  return total;
}

inline std::size_t flop_count(const ModelShape& shape) {
  std::size_t total = 0;
  for (std::size_t i = 1; i < shape.sizes.size(); ++i)
    total += 2 * shape.sizes[i] * shape.sizes[i - 1];
  return total;
}

/// Units whose utilization is at or below the m-th smallest utilization.
inline std::vector<std::size_t> low_utilization_set(const LayerDiagnostics& diag,
                                                    std::size_t m) {
  const double thr = stats::quantile(std::span<const double>(diag.utilization), m);
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < diag.units(); ++k)
    if (diag.utilization[k] <= thr) out.push_back(k);
  return out;
}

/// Units whose reconstruction error is at or above the m-th largest error.
inline std::vector<std::size_t> high_error_set(const LayerDiagnostics& diag,
                                               std::size_t m) {
  const double thr = stats::upper_quantile(std::span<const double>(diag.reconstruction), m);
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < diag.units(); ++k)
    if (diag.reconstruction[k] >= thr) out.push_back(k);
  return out;
}

namespace detail {

inline double ratio(std::size_t overlap, std::size_t size) {
  return static_cast<double>(overlap) / static_cast<double>(std::max<std::size_t>(size, 1));
}

}  // namespace detail

/// Tolerance of Difference at prune count m: the fraction of the
/// low-utilization set that also carries a top-m reconstruction error.
inline double tod(const LayerDiagnostics& diag, std::size_t m) {
  require(m <= diag.units(), ErrorKind::invalid_input,
          "tod: m = " + std::to_string(m) + " out of [0, " +
              std::to_string(diag.units()) + "]");
  const auto low = low_utilization_set(diag, m);
  const auto high = high_error_set(diag, m);
  std::vector<std::size_t> both;
  std::set_intersection(low.begin(), low.end(), high.begin(), high.end(),
                        std::back_inserter(both));
  return detail::ratio(both.size(), low.size());
}

struct TodPoint {
  double tod = 0.0;
  std::size_t removed = 0;  // |D_idx(m)|
};

/// ToD(m) and |D_idx(m)| for m = 0..J, sharing one sort of each score vector.
inline std::vector<TodPoint> tod_curve(const LayerDiagnostics& diag) {
  const std::size_t J = diag.units();
  std::vector<double> du = diag.utilization, dr = diag.reconstruction;
  std::sort(du.begin(), du.end());
  std::sort(dr.begin(), dr.end(), std::greater<>());
  std::vector<TodPoint> curve(J + 1);
  for (std::size_t m = 1; m <= J; ++m) {
    const double low_thr = du[m - 1], high_thr = dr[m - 1];
    std::size_t low = 0, both = 0;
    for (std::size_t k = 0; k < J; ++k) {
      if (diag.utilization[k] <= low_thr) {
        ++low;
        if (diag.reconstruction[k] >= high_thr) ++both;
      }
    }
    curve[m] = {detail::ratio(both, low), low};
  }
  return curve;
}

inline void check_level(double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::invalid_input,
          "ToD level must lie in (0, 1), got " + std::to_string(alpha));
}

/// Largest m in [1, J] with ToD(m) <= alpha that still leaves at least one
/// unit standing; 0 when none qualifies. ToD is not monotone in m, so every
/// m is examined.
inline std::size_t select_m(std::span<const TodPoint> curve, double alpha) {
  check_level(alpha);
  const std::size_t J = curve.size() - 1;
  std::size_t best = 0;
  for (std::size_t m = 1; m <= J; ++m)
    if (curve[m].tod <= alpha && curve[m].removed + 1 <= J) best = m;
  return best;
}

inline std::size_t select_m(const LayerDiagnostics& diag, double alpha) {
  check_level(alpha);
  diagnostics::validate(diag);
  return select_m(tod_curve(diag), alpha);
}

struct LayerPlan {
  std::uint32_t layer_id = 0;
  std::size_t units = 0;
  std::size_t m_hat = 0;
  std::vector<std::size_t> remove;  // ascending, original indices
  std::optional<double> achieved_tod;

  bool operator==(const LayerPlan&) const = default;
};

/// Per-layer removal sets. FAIR plans carry the ToD level and achieved ToD;
/// baseline plans leave both empty.
struct PruningPlan {
  std::optional<double> tod_level;
  std::vector<LayerPlan> layers;
  double pruning_rate = 0.0;

  const LayerPlan* find(std::uint32_t layer_id) const {
    for (const auto& l : layers)
      if (l.layer_id == layer_id) return &l;
    return nullptr;
  }
  std::size_t total_removed() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.remove.size();
    return n;
  }
  bool operator==(const PruningPlan&) const = default;
};

/// Checks that every plan layer names a hidden layer of `shape` with the
/// right width, and that each removal set is sorted, unique, in range and
/// leaves a survivor.
inline void check_against(const PruningPlan& plan, const ModelShape& shape) {
  for (const auto& l : plan.layers) {
    require(l.layer_id < shape.hidden_layers(), ErrorKind::contract_mismatch,
            "plan layer " + std::to_string(l.layer_id) +
                " is not a prunable hidden layer (model has " +
                std::to_string(shape.hidden_layers()) + ")");
    require(l.units == shape.units(l.layer_id), ErrorKind::contract_mismatch,
            "plan layer " + std::to_string(l.layer_id) + " has J = " +
                std::to_string(l.units) + ", model has " +
                std::to_string(shape.units(l.layer_id)));
    require(std::is_sorted(l.remove.begin(), l.remove.end()) &&
                std::adjacent_find(l.remove.begin(), l.remove.end()) == l.remove.end(),
            ErrorKind::contract_mismatch,
            "plan layer " + std::to_string(l.layer_id) + ": remove set not sorted/unique");
    require(l.remove.empty() || l.remove.back() < l.units, ErrorKind::contract_mismatch,
            "plan layer " + std::to_string(l.layer_id) + ": unit index out of range");
    require(l.remove.size() < l.units, ErrorKind::contract_mismatch,
            "plan layer " + std::to_string(l.layer_id) + " would remove every unit");
  }
}

/// Fraction of the model's parameters removed by `plan`.
inline double pruning_rate(const PruningPlan& plan, const ModelShape& shape) {
  check_against(plan, shape);
  std::vector<std::size_t> removed(shape.hidden_layers(), 0);
  for (const auto& l : plan.layers) removed[l.layer_id] += l.remove.size();
  const auto before = parameter_count(shape);
  const auto after = parameter_count(shape, removed);
  return static_cast<double>(before - after) / static_cast<double>(before);
}

inline void check_report(const ScoreReport& report, const ModelShape& shape) {
  require(!report.layers.empty(), ErrorKind::invalid_input, "score report has no layers");
  for (const auto& l : report.layers) {
    require(l.layer_id < shape.hidden_layers(), ErrorKind::contract_mismatch,
            "report layer " + std::to_string(l.layer_id) +
                " is not a hidden layer of the model");
    require(l.units() == shape.units(l.layer_id), ErrorKind::contract_mismatch,
            "report layer " + std::to_string(l.layer_id) + " has " +
                std::to_string(l.units()) + " units, model has " +
                std::to_string(shape.units(l.layer_id)));
  }
}

inline LayerPlan plan_layer(const LayerDiagnostics& diag, std::span<const TodPoint> curve,
                            double alpha) {
  LayerPlan lp;
  lp.layer_id = diag.layer_id;
  lp.units = diag.units();
  lp.m_hat = select_m(curve, alpha);
  lp.remove = lp.m_hat == 0 ? std::vector<std::size_t>{} : low_utilization_set(diag, lp.m_hat);
  lp.achieved_tod = curve[lp.m_hat].tod;
  return lp;
}

inline LayerPlan plan_layer(const LayerDiagnostics& diag, double alpha) {
  diagnostics::validate(diag);
  return plan_layer(diag, tod_curve(diag), alpha);
}

namespace detail {

inline PruningPlan assemble(const ScoreReport& report,
                            const std::vector<std::vector<TodPoint>>& curves, double alpha,
                            const ModelShape& shape) {
  PruningPlan plan;
  plan.tod_level = alpha;
  for (std::size_t l = 0; l < report.layers.size(); ++l)
    plan.layers.push_back(plan_layer(report.layers[l], curves[l], alpha));
  std::sort(plan.layers.begin(), plan.layers.end(),
            [](const LayerPlan& a, const LayerPlan& b) { return a.layer_id < b.layer_id; });
  plan.pruning_rate = pruning_rate(plan, shape);
  return plan;
}

inline std::vector<std::vector<TodPoint>> curves(const ScoreReport& report,
                                                 const ModelShape& shape) {
  check_report(report, shape);
  std::vector<std::vector<TodPoint>> out;
  for (const auto& diag : report.layers) {
    diagnostics::validate(diag);
    out.push_back(tod_curve(diag));
  }
  return out;
}

}  // namespace detail

inline PruningPlan build_plan(const ScoreReport& report, double alpha, const ModelShape& shape) {
  check_level(alpha);
  return detail::assemble(report, detail::curves(report, shape), alpha, shape);
}

/// One plan per ToD level, all derived from the same report. Each layer's
/// ToD curve is computed once and shared by every level.
inline std::vector<PruningPlan> sweep(const ScoreReport& report, std::span<const double> alphas,
                                      const ModelShape& shape) {
  require(!alphas.empty(), ErrorKind::invalid_input, "sweep: no ToD levels given");
  for (double a : alphas) check_level(a);
  const auto curves = detail::curves(report, shape);
  std::vector<PruningPlan> plans;
  plans.reserve(alphas.size());
  for (double a : alphas) plans.push_back(detail::assemble(report, curves, a, shape));
  return plans;
}

// JSON: {"tod_level","layers":[{"layer","J","m_hat","remove","achieved_tod"}],
//        "pruning_rate"}

inline nlohmann::json to_json(const PruningPlan& plan) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : plan.layers) {
    nlohmann::json entry = {{"layer", l.layer_id}, {"J", l.units}, {"m_hat", l.m_hat},
                            {"remove", l.remove}};
    entry["achieved_tod"] = l.achieved_tod ? nlohmann::json(*l.achieved_tod) : nlohmann::json();
    layers.push_back(std::move(entry));
  }
  nlohmann::json out;
  out["tod_level"] = plan.tod_level ? nlohmann::json(*plan.tod_level) : nlohmann::json();
  out["layers"] = std::move(layers);
  out["pruning_rate"] = plan.pruning_rate;
  return out;
}

inline PruningPlan plan_from_json(const nlohmann::json& j) {
  PruningPlan plan;
  try {
    if (!j.at("tod_level").is_null()) plan.tod_level = j.at("tod_level").get<double>();
    for (const auto& l : j.at("layers")) {
      LayerPlan lp;
      lp.layer_id = l.at("layer").get<std::uint32_t>();
      lp.units = l.at("J").get<std::size_t>();
      lp.m_hat = l.value("m_hat", std::size_t{0});
      lp.remove = l.at("remove").get<std::vector<std::size_t>>();
      if (l.contains("achieved_tod") && !l.at("achieved_tod").is_null())
        lp.achieved_tod = l.at("achieved_tod").get<double>();
      plan.layers.push_back(std::move(lp));
    }
    plan.pruning_rate = j.at("pruning_rate").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("malformed pruning plan: ") + e.what());
  }
  return plan;
}

}  // namespace fair::planner
