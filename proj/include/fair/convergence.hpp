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

// Stability of utilization-score estimates as the pruning set grows: draw
// class-stratified subsets of several sizes from a pool of recorded unit
// outputs, rescore, and report dispersion and scoring time per size.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <vector>

#include "json.hpp"

#include "fair/common.hpp"
#include "fair/diagnostics.hpp"
#include "fair/dumpio.hpp"
#include "fair/mininet.hpp"
#include "fair/stats.hpp"

namespace fair::convergence {

struct ConvergenceConfig {
  std::vector<std::size_t> sizes;
  std::size_t resamples = 20;
  std::uint64_t seed = 0;
  std::vector<std::size_t> units;  // tracked units; empty tracks all
  stats::SlicedConfig sliced{};
};

struct UnitStats {
  std::size_t unit = 0;
  double mean = 0.0;
  double sd = 0.0;
};

struct SizeResult {
  std::size_t n = 0;
  std::vector<UnitStats> units;
  double mean_seconds = 0.0;  // scoring time per resample
  double min_seconds = 0.0;
};

struct ConvergenceReport {
  std::vector<SizeResult> sizes;
  std::size_t resamples = 0;
};

/// Per-class sample counts for a stratified subset of size n: proportional
/// to the pool (largest remainder), at least 2 per class.
inline std::vector<std::size_t> stratum_sizes(std::span<const std::size_t> pool_counts,
                                              std::size_t n) {
  const std::size_t K = pool_counts.size();
  const std::size_t total = std::accumulate(pool_counts.begin(), pool_counts.end(), std::size_t{0});
  require(n >= 2 * K, ErrorKind::invalid_input,
          "subset size " + std::to_string(n) + " cannot hold 2 samples of each of " +
              std::to_string(K) + " classes");
  require(n <= total, ErrorKind::invalid_input,
          "subset size " + std::to_string(n) + " exceeds the pool of " + std::to_string(total));
  std::vector<std::size_t> out(K);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t used = 0;
  for (std::size_t c = 0; c < K; ++c) {
    const double exact = static_cast<double>(n) * static_cast<double>(pool_counts[c]) /
                         static_cast<double>(total);
    out[c] = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(exact)));
    remainders.push_back({exact - std::floor(exact), c});
    used += out[c];
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; used < n; r = (r + 1) % K) {
    const auto c = remainders[r].second;
    if (out[c] < pool_counts[c]) {
      ++out[c];
      ++used;
    }
  }
  // Over-allocation from the 2-per-class floor is taken back from the largest strata.
  while (used > n) {
    const auto c = static_cast<std::size_t>(std::max_element(out.begin(), out.end()) - out.begin());
    require(out[c] > 2, ErrorKind::invalid_input, "cannot stratify subset");
    --out[c];
    --used;
  }
  for (std::size_t c = 0; c < K; ++c)
    require(out[c] <= pool_counts[c], ErrorKind::invalid_input,
            "class stratum too small for subset size " + std::to_string(n));
  return out;
}

/// Sample indices of a class-stratified subset drawn without replacement.
inline std::vector<std::size_t> stratified_subset(std::span<const std::uint32_t> labels,
                                                  std::size_t n, std::uint64_t seed) {
  const auto classes = diagnostics::group_by_class(labels);
  std::vector<std::size_t> counts;
  for (const auto& c : classes) counts.push_back(c.size());
  const auto take = stratum_sizes(counts, n);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    auto idx = classes[c];
    for (std::size_t i = 0; i < take[c]; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    out.insert(out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline ConvergenceReport run_convergence(const dumpio::Dump& pool, const ConvergenceConfig& cfg) {
  require(pool.header.kind == dumpio::DumpKind::activations, ErrorKind::invalid_input,
          "convergence needs an activation dump");
  require(!cfg.sizes.empty(), ErrorKind::invalid_input, "no subset sizes given");
  require(cfg.resamples >= 2, ErrorKind::invalid_input, "need at least 2 resamples");
  for (std::size_t i = 1; i < cfg.sizes.size(); ++i)
    require(cfg.sizes[i] > cfg.sizes[i - 1], ErrorKind::invalid_input,
            "subset sizes must be strictly increasing");
  std::vector<std::size_t> tracked = cfg.units;
  if (tracked.empty()) {
    tracked.resize(pool.units());
    std::iota(tracked.begin(), tracked.end(), std::size_t{0});
  }
  for (auto u : tracked)
    require(u < pool.units(), ErrorKind::invalid_input, "tracked unit out of range");

  const std::size_t J = pool.units(), d = pool.dim(), stride = J * d;
  ConvergenceReport report;
  report.resamples = cfg.resamples;
  for (std::size_t s = 0; s < cfg.sizes.size(); ++s) {
    const std::size_t n = cfg.sizes[s];
    std::vector<std::vector<double>> per_unit(tracked.size());
    std::vector<double> seconds;
    for (std::size_t r = 0; r < cfg.resamples; ++r) {
      const auto idx = stratified_subset(pool.labels, n,
                                         stream_seed(cfg.seed, "resample", s * 1000003 + r));
      std::vector<float> values;
      values.reserve(n * stride);
      std::vector<std::uint32_t> labels;
      labels.reserve(n);
      for (auto i : idx) {
        values.insert(values.end(), pool.data.begin() + static_cast<std::ptrdiff_t>(i * stride),
                      pool.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride));
        labels.push_back(pool.labels[i]);
      }
      const auto t0 = std::chrono::steady_clock::now();
      const auto scores = diagnostics::utilization_scores(
          std::span<const float>(values), n, J, d, std::span<const std::uint32_t>(labels),
          cfg.sliced);
      const auto t1 = std::chrono::steady_clock::now();
      seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
      for (std::size_t u = 0; u < tracked.size(); ++u) per_unit[u].push_back(scores[tracked[u]]);
    }
    SizeResult res;
    res.n = n;
    for (std::size_t u = 0; u < tracked.size(); ++u)
      res.units.push_back({tracked[u], stats::mean(per_unit[u]), stats::stddev(per_unit[u])});
    res.mean_seconds = stats::mean(seconds);
    res.min_seconds = *std::min_element(seconds.begin(), seconds.end());
    report.sizes.push_back(std::move(res));
  }
  return report;
}

/// Convenience form: capture the net on `prune` and study hidden layer `layer`.
inline ConvergenceReport run_convergence(const mininet::MiniNet& net,
                                         const mininet::Dataset& prune, std::uint32_t layer,
                                         const ConvergenceConfig& cfg) {
  require(layer < net.hidden_layers(), ErrorKind::invalid_input,
          "layer " + std::to_string(layer) + " is not a hidden layer");
  const auto cap = mininet::capture(net, prune);
  return run_convergence(cap.layers[layer].to_dumps().acts, cfg);
}

inline nlohmann::json to_json(const ConvergenceReport& r) {
  nlohmann::json sizes = nlohmann::json::array();
  for (const auto& s : r.sizes) {
    nlohmann::json units = nlohmann::json::array();
    for (const auto& u : s.units) units.push_back({{"unit", u.unit}, {"mean", u.mean}, {"sd", u.sd}});
    sizes.push_back({{"n", s.n},
                     {"units", units},
                     {"mean_seconds", s.mean_seconds},
                     {"min_seconds", s.min_seconds}});
  }
  return {{"resamples", r.resamples}, {"sizes", sizes}};
}

/// CSV columns: n,unit,mean,sd,mean_seconds
inline void write_csv(std::ostream& os, const ConvergenceReport& r) {
  const auto old = os.precision(17);
  os << "n,unit,mean,sd,mean_seconds\n";
  for (const auto& s : r.sizes)
    for (const auto& u : s.units)
      os << s.n << ',' << u.unit << ',' << u.mean << ',' << u.sd << ',' << s.mean_seconds << '\n';
  os.precision(old);
}

}  // namespace fair::convergence
