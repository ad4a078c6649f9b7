// Copyright 2026 The FAIR-Pruner Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "fair/convergence.hpp"
#include "test_util.hpp"

using namespace fair;
using namespace fair::convergence;

namespace {

// Two-class pool: unit 0 is N(0,1) vs N(1,1), unit 1 is identical across classes.
dumpio::Dump gaussian_pool(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  std::vector<float> v(n * 2);
  std::vector<std::uint32_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<std::uint32_t>(i % 2);
    v[2 * i] = g(rng) + static_cast<float>(y[i]);
    v[2 * i + 1] = 0.5f;
  }
  return dumpio::make_activation_dump<float>(0, static_cast<std::uint32_t>(n), 2, 1, v, y);
}

}  // namespace

TEST(StratumSizes, ProportionalWithFloorOfTwo) {
  const std::vector<std::size_t> counts{50, 30, 20};
  EXPECT_EQ(stratum_sizes(counts, 10), (std::vector<std::size_t>{5, 3, 2}));
  EXPECT_EQ(stratum_sizes(counts, 100), counts);
  const std::vector<std::size_t> skewed{96, 2, 2};
  EXPECT_EQ(stratum_sizes(skewed, 10), (std::vector<std::size_t>{6, 2, 2}));
  EXPECT_THROW(stratum_sizes(counts, 5), Error);
  EXPECT_THROW(stratum_sizes(counts, 101), Error);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::size_t> c(2 + t % 5);
    for (auto& x : c) x = 2 + rng() % 40;
    const auto total = std::accumulate(c.begin(), c.end(), std::size_t{0});
    const std::size_t n = 2 * c.size() + rng() % (total - 2 * c.size() + 1);
    const auto s = stratum_sizes(c, n);
    EXPECT_EQ(std::accumulate(s.begin(), s.end(), std::size_t{0}), n);
    for (std::size_t k = 0; k < c.size(); ++k) {
      EXPECT_GE(s[k], 2u);
      EXPECT_LE(s[k], c[k]);
    }
  }
}

TEST(StratifiedSubset, DistinctIndicesWithRequestedCounts) {
  std::vector<std::uint32_t> labels(90);
  for (std::size_t i = 0; i < 90; ++i) labels[i] = static_cast<std::uint32_t>(i % 3);
  const auto idx = stratified_subset(labels, 30, 4);
  EXPECT_EQ(idx.size(), 30u);
  EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 30u);
  std::vector<int> per(3, 0);
  for (auto i : idx) ++per[labels[i]];
  EXPECT_EQ(per, (std::vector<int>{10, 10, 10}));
  EXPECT_EQ(idx, stratified_subset(labels, 30, 4));
  EXPECT_NE(idx, stratified_subset(labels, 30, 5));
}

TEST(RunConvergence, MeanApproachesPopulationValueAndSpreadShrinks) {
  const auto pool = gaussian_pool(8000, 2);
  ConvergenceConfig cfg;
  cfg.sizes = {64, 1024};
  cfg.resamples = 20;
  cfg.seed = 3;
  const auto r = run_convergence(pool, cfg);
  ASSERT_EQ(r.sizes.size(), 2u);
  ASSERT_EQ(r.sizes[0].units.size(), 2u);
  EXPECT_NEAR(r.sizes[1].units[0].mean, 1.0, 0.15);
  EXPECT_LT(r.sizes[1].units[0].sd, r.sizes[0].units[0].sd);
  EXPECT_EQ(r.sizes[1].units[1].mean, 0.0);
  EXPECT_EQ(r.sizes[1].units[1].sd, 0.0);
  EXPECT_GT(r.sizes[1].mean_seconds, 0.0);
  EXPECT_LE(r.sizes[1].min_seconds, r.sizes[1].mean_seconds);

  const auto again = run_convergence(pool, cfg);
  EXPECT_EQ(again.sizes[0].units[0].mean, r.sizes[0].units[0].mean);

  std::ostringstream csv;
  write_csv(csv, r);
  EXPECT_EQ(csv.str().rfind("n,unit,mean,sd,mean_seconds\n", 0), 0u);
  EXPECT_EQ(to_json(r)["sizes"][1]["n"], 1024);
}

TEST(RunConvergence, TrackedUnitsAndValidation) {
  const auto pool = gaussian_pool(400, 5);
  ConvergenceConfig cfg;
  cfg.sizes = {20, 40};
  cfg.resamples = 3;
  cfg.units = {1};
  const auto r = run_convergence(pool, cfg);
  ASSERT_EQ(r.sizes[0].units.size(), 1u);
  EXPECT_EQ(r.sizes[0].units[0].unit, 1u);
  cfg.units = {2};
  EXPECT_THROW(run_convergence(pool, cfg), Error);
  cfg.units = {};
  cfg.sizes = {40, 20};
  EXPECT_THROW(run_convergence(pool, cfg), Error);
  cfg.sizes = {20};
  cfg.resamples = 1;
  EXPECT_THROW(run_convergence(pool, cfg), Error);
}

TEST(RunConvergence, NetOverloadStudiesOneHiddenLayer) {
  const auto tb = testkit::trained_blobs({6, 4});
  ConvergenceConfig cfg;
  cfg.sizes = {30, 60};
  cfg.resamples = 3;
  const auto r = run_convergence(tb.net, tb.data.prune, 1, cfg);
  EXPECT_EQ(r.sizes[0].units.size(), 4u);
  EXPECT_THROW(run_convergence(tb.net, tb.data.prune, 2, cfg), Error);
}
