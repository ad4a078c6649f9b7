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

// Comparator pruning strategies: L1-norm ranking, uniform-rate random
// pruning, and random pruning at ToD-selected per-layer counts.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "fair/common.hpp"
#include "fair/diagnostics.hpp"
#include "fair/mininet.hpp"
#include "fair/planner.hpp"
#include "fair/stats.hpp"
#include "fair/surgery.hpp"

namespace fair::baselines {

using planner::LayerPlan;
using planner::ModelShape;
using planner::PruningPlan;

enum class Method { fair, l1, random_uniform, random_tod, lth };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::fair: return "fair";
    case Method::l1: return "l1";
    case Method::random_uniform: return "random_uniform";
    case Method::random_tod: return "random_tod";
    case Method::lth: return "lth";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (auto m : {Method::fair, Method::l1, Method::random_uniform, Method::random_tod,
                 Method::lth})
    if (s == method_name(m)) return m;
  fail(ErrorKind::invalid_input, "unknown pruning method '" + s + "'");
}

/// Units removed per layer at a uniform rate: floor(rate * J). The small
/// offset absorbs binary round-off such as 0.57 * 100 = 56.999...
inline std::size_t uniform_count(double rate, std::size_t units) {
  require(rate >= 0.0 && rate < 1.0, ErrorKind::invalid_input,
          "pruning rate must lie in [0, 1), got " + std::to_string(rate));
  const auto k = static_cast<std::size_t>(std::floor(rate * static_cast<double>(units) + 1e-9));
  require(k < units, ErrorKind::invalid_input,
          "rate " + std::to_string(rate) + " would remove every unit of a " +
              std::to_string(units) + "-unit layer");
  return k;
}

inline PruningPlan finish(PruningPlan plan, const ModelShape& shape) {
  plan.pruning_rate = planner::pruning_rate(plan, shape);
  return plan;
}

/// Removes the floor(rate * J) units with the smallest weight-row L1 norm in
/// every hidden layer (bias excluded, ties to the lower index).
inline PruningPlan l1_plan(const mininet::MiniNet& net, double rate) {
  PruningPlan plan;
  for (std::size_t l = 0; l < net.hidden_layers(); ++l) {
    const auto& layer = net.layers[l];
    const std::size_t k = uniform_count(rate, layer.units);
    std::vector<double> norms(layer.units);
    for (std::size_t j = 0; j < layer.units; ++j) {
      double s = 0.0;
      for (double w : layer.row(j)) s += std::abs(w);
      norms[j] = s;
    }
    std::vector<std::size_t> order(layer.units);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return norms[a] < norms[b]; });
    LayerPlan lp;
    lp.layer_id = static_cast<std::uint32_t>(l);
    lp.units = layer.units;
    lp.remove.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(lp.remove.begin(), lp.remove.end());
    lp.m_hat = k;
    plan.layers.push_back(std::move(lp));
  }
  return finish(std::move(plan), net.shape());
}

inline std::vector<std::size_t> random_subset(std::size_t units, std::size_t count,
                                              std::uint64_t seed) {
  std::vector<std::size_t> idx(units);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// floor(rate * J) units per hidden layer, drawn uniformly at random.
inline PruningPlan random_uniform_plan(const ModelShape& shape, double rate, std::uint64_t seed) {
  PruningPlan plan;
  for (std::uint32_t l = 0; l < shape.hidden_layers(); ++l) {
    const std::size_t J = shape.units(l);
    LayerPlan lp;
    lp.layer_id = l;
    lp.units = J;
    lp.m_hat = uniform_count(rate, J);
    lp.remove = random_subset(J, lp.m_hat, stream_seed(seed, "random-uniform", l));
    plan.layers.push_back(std::move(lp));
  }
  return finish(std::move(plan), shape);
}

/// Per-layer removal counts of the FAIR plan at `alpha`, membership random.
inline PruningPlan random_tod_plan(const diagnostics::ScoreReport& report, double alpha,
                                  const ModelShape& shape, std::uint64_t seed) {
  const auto fair_plan = planner::build_plan(report, alpha, shape);
  PruningPlan plan;
  for (const auto& f : fair_plan.layers) {
    LayerPlan lp;
    lp.layer_id = f.layer_id;
    lp.units = f.units;
    lp.m_hat = f.m_hat;
    lp.remove = random_subset(f.units, f.remove.size(), stream_seed(seed, "random-tod", f.layer_id));
    plan.layers.push_back(std::move(lp));
  }
  return finish(std::move(plan), shape);
}

/// Uniform per-layer rate whose global pruning rate is closest to `target`.
/// Only rates k/J (some layer width J) change the removal counts, so those
/// are the candidates; ties go to the smaller rate.
inline double match_uniform_rate(const ModelShape& shape, double target) {
  std::vector<double> candidates{0.0};
  for (std::uint32_t l = 0; l < shape.hidden_layers(); ++l)
    for (std::size_t k = 1; k < shape.units(l); ++k)
      candidates.push_back(static_cast<double>(k) / static_cast<double>(shape.units(l)));
  std::sort(candidates.begin(), candidates.end());
  double best = 0.0, best_gap = std::numeric_limits<double>::infinity();
  const auto before = static_cast<double>(planner::parameter_count(shape));
  for (double r : candidates) {
    std::vector<std::size_t> removed;
    bool ok = true;
    for (std::uint32_t l = 0; l < shape.hidden_layers() && ok; ++l) {
      const auto k = static_cast<std::size_t>(
          std::floor(r * static_cast<double>(shape.units(l)) + 1e-9));
      ok = k < shape.units(l);
      removed.push_back(k);
    }
    if (!ok) continue;
    const double pr = 1.0 - static_cast<double>(planner::parameter_count(shape, removed)) / before;
    if (std::abs(pr - target) < best_gap) {
      best_gap = std::abs(pr - target);
      best = r;
    }
  }
  return best;
}

/// One comparison arm. `level` is the rate for l1/random_uniform and the
/// ToD level for fair/random_tod.
struct BaselineSpec {
  Method method = Method::l1;
  double level = 0.0;
  std::uint64_t seed = 0;
};

/// Plan for one trial of `spec`. Randomized arms draw from (seed, trial).
inline PruningPlan make_plan(const BaselineSpec& spec, std::size_t trial,
                             const mininet::MiniNet& net,
                             const diagnostics::ScoreReport* report) {
  const auto shape = net.shape();
  const auto seed = stream_seed(spec.seed, method_name(spec.method), trial);
  switch (spec.method) {
    case Method::l1: return l1_plan(net, spec.level);
    case Method::random_uniform: return random_uniform_plan(shape, spec.level, seed);
    case Method::fair:
    case Method::random_tod:
      require(report != nullptr, ErrorKind::invalid_input,
              std::string(method_name(spec.method)) + " needs a score report");
      return spec.method == Method::fair ? planner::build_plan(*report, spec.level, shape)
                                         : random_tod_plan(*report, spec.level, shape, seed);
    case Method::lth: break;
  }
  fail(ErrorKind::invalid_input,
       "lottery-ticket rewinding needs saved initializations and full retraining; not provided");
}

struct ComparisonSetup {
  const mininet::MiniNet* net = nullptr;
  const mininet::Dataset* train = nullptr;  // fine-tuning data
  const mininet::Dataset* test = nullptr;   // accuracy is measured here
  const diagnostics::ScoreReport* report = nullptr;
  std::size_t ft_epochs = 10;  // 0 skips fine-tuning
  double lr = 0.05;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct ComparisonRow {
  std::string method;
  double level = 0.0;
  std::size_t trial = 0;
  double pruning_rate = 0.0;
  double os_acc = std::numeric_limits<double>::quiet_NaN();
  double ft_acc = std::numeric_limits<double>::quiet_NaN();
};

/// |specs| x trials rows of one-shot and fine-tuned test accuracy. LTH arms
/// produce NaN rows so the gap stays visible in the table.
inline std::vector<ComparisonRow> run_comparison(const ComparisonSetup& setup,
                                                 std::span<const BaselineSpec> specs,
                                                 std::size_t trials) {
  require(setup.net && setup.test, ErrorKind::invalid_input, "comparison needs a net and test split");
  require(trials >= 1, ErrorKind::invalid_input, "trials must be >= 1");
  std::vector<ComparisonRow> rows;
  for (const auto& spec : specs) {
    for (std::size_t t = 0; t < trials; ++t) {
      ComparisonRow row{method_name(spec.method), spec.level, t};
      if (spec.method == Method::lth) {
        row.pruning_rate = std::numeric_limits<double>::quiet_NaN();
        rows.push_back(row);
        continue;
      }
      const auto plan = make_plan(spec, t, *setup.net, setup.report);
      auto pruned = surgery::apply(*setup.net, plan);
      row.pruning_rate = pruned.report.pruning_rate;
      row.os_acc = mininet::evaluate(pruned.net, *setup.test).accuracy;
      if (setup.ft_epochs > 0) {
        require(setup.train != nullptr, ErrorKind::invalid_input, "fine-tuning needs a train split");
        const auto tuned = mininet::finetune(std::move(pruned.net), *setup.train, setup.ft_epochs,
                                             setup.lr, setup.batch_size,
                                             stream_seed(setup.seed, "finetune", t));
        row.ft_acc = mininet::evaluate(tuned, *setup.test).accuracy;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

struct SummaryRow {
  std::string method;
  double level = 0.0;
  double pruning_rate = 0.0;  // mean over trials
  double os_mean = 0.0, os_sd = 0.0, ft_mean = 0.0, ft_sd = 0.0;
  std::size_t trials = 0;
};

/// Mean and sample standard deviation per (method, level), in first-seen order.
inline std::vector<SummaryRow> summarize(std::span<const ComparisonRow> rows) {
  std::vector<SummaryRow> out;
  std::vector<std::vector<const ComparisonRow*>> groups;
  for (const auto& r : rows) {
    std::size_t g = 0;
    while (g < out.size() && !(out[g].method == r.method && out[g].level == r.level)) ++g;
    if (g == out.size()) {
      out.push_back({r.method, r.level});
      groups.emplace_back();
    }
    groups[g].push_back(&r);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    std::vector<double> pr, os, ft;
    for (const auto* r : groups[g]) {
      pr.push_back(r->pruning_rate);
      os.push_back(r->os_acc);
      ft.push_back(r->ft_acc);
    }
    out[g].trials = groups[g].size();
    out[g].pruning_rate = stats::mean(pr);
    out[g].os_mean = stats::mean(os);
    out[g].os_sd = stats::stddev(os);
    out[g].ft_mean = stats::mean(ft);
    out[g].ft_sd = stats::stddev(ft);
  }
  return out;
}

/// CSV columns: method,rate_or_alpha,trial,PR,os_acc,ft10_acc (NA for missing).
inline void write_csv(std::ostream& os, std::span<const ComparisonRow> rows) {
  auto num = [&](double v) {
    if (std::isnan(v)) {
      os << "NA";
    } else {
      os << v;
    }
  };
  const auto old = os.precision(17);
  os << "method,rate_or_alpha,trial,PR,os_acc,ft10_acc\n";
  for (const auto& r : rows) {
    os << r.method << ',';
    num(r.level);
    os << ',' << r.trial << ',';
    num(r.pruning_rate);
    os << ',';
    num(r.os_acc);
    os << ',';
    num(r.ft_acc);
    os << '\n';
  }
  os.precision(old);
}

}  // namespace fair::baselines
