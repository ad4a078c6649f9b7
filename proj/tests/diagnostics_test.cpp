// Copyright 2026 The FAIR-Pruner Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "fair/diagnostics.hpp"
#include "fair/mininet.hpp"
#include "test_util.hpp"

using namespace fair;
using namespace fair::diagnostics;
using dumpio::DumpKind;

namespace {

// One-unit activation dump from per-sample values and labels.
dumpio::Dump acts1(const std::vector<float>& v, const std::vector<std::uint32_t>& y) {
  return dumpio::make_activation_dump<float>(0, static_cast<std::uint32_t>(v.size()), 1, 1, v, y);
}

dumpio::Dump matrix(DumpKind kind, std::uint32_t J, std::uint32_t d, std::uint32_t n,
                    const std::vector<float>& v, std::uint32_t layer = 0) {
  return dumpio::make_matrix_dump<float>(kind, layer, J, d, n, v);
}

}  // namespace

TEST(Utilization, DeadUnitScoresZero) {
  EXPECT_EQ(utilization_scores(acts1({0, 0, 0, 0, 0, 0}, {0, 0, 1, 1, 2, 2}))[0], 0.0);
}

TEST(Utilization, MaxOverClassPairs) {
  // Pairwise distances 1, 3, 2; the (0, 2) pair wins.
  EXPECT_DOUBLE_EQ(utilization_scores(acts1({0, 0, 1, 1, 3, 3}, {0, 0, 1, 1, 2, 2}))[0], 3.0);
}

TEST(Utilization, IdenticalClassDistributionsScoreZero) {
  EXPECT_EQ(utilization_scores(acts1({1, 4, 2, 4, 1, 2}, {0, 0, 0, 1, 1, 1}))[0], 0.0);
}

TEST(Utilization, ClassMinimumsEnforced) {
  EXPECT_THROW(utilization_scores(acts1({1, 2, 3}, {0, 0, 1})), Error);
  EXPECT_THROW(utilization_scores(acts1({1, 2, 3}, {0, 0, 0})), Error);
}

TEST(Utilization, InvariantToSampleOrderAndClassNames) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> g;
  const std::uint32_t n = 60, J = 5;
  std::vector<float> v(n * J);
  std::vector<std::uint32_t> y(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    y[i] = i % 4;
    for (std::uint32_t j = 0; j < J; ++j) v[i * J + j] = g(rng) + static_cast<float>(y[i] * j) * 0.3f;
  }
  const auto base = utilization_scores(dumpio::make_activation_dump<float>(0, n, J, 1, v, y));

  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<float> pv(n * J);
  std::vector<std::uint32_t> py(n);
  const std::uint32_t rename[4] = {2, 0, 3, 1};
  for (std::uint32_t i = 0; i < n; ++i) {
    py[i] = rename[y[perm[i]]];
    for (std::uint32_t j = 0; j < J; ++j) pv[i * J + j] = v[perm[i] * J + j];
  }
  const auto moved = utilization_scores(dumpio::make_activation_dump<float>(0, n, J, 1, pv, py));
  for (std::uint32_t j = 0; j < J; ++j) EXPECT_DOUBLE_EQ(moved[j], base[j]);
}

TEST(Utilization, ScalesWithPositiveFactor) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::vector<double> v(40);
  std::vector<std::uint32_t> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    y[i] = static_cast<std::uint32_t>(i % 3);
    v[i] = u(rng) + y[i];
  }
  const double base = utilization_scores<double>(v, 40, 1, 1, y)[0];
  for (double s : {0.5, 2.0, 7.25}) {
    std::vector<double> scaled = v;
    for (auto& x : scaled) x *= s;
    EXPECT_NEAR(utilization_scores<double>(scaled, 40, 1, 1, y)[0], s * base, 1e-12 * s * base);
  }
}

TEST(Utilization, VectorOutputsUseSlicedDistance) {
  // Unit 0 separates classes along its first component, unit 1 is pure noise
  // shared by both classes.
  const std::uint32_t n = 200, J = 2, d = 4;
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g;
  std::vector<float> v(n * J * d);
  std::vector<std::uint32_t> y(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    y[i] = i % 2;
    for (std::uint32_t c = 0; c < d; ++c) {
      v[(i * J + 0) * d + c] = g(rng) + (c == 0 && y[i] == 1 ? 4.0f : 0.0f);
      v[(i * J + 1) * d + c] = 1.0f;
    }
  }
  const auto dump = dumpio::make_activation_dump<float>(0, n, J, d, v, y);
  const auto s = utilization_scores(dump, {64, 5});
  EXPECT_GT(s[0], 1.0);
  EXPECT_EQ(s[1], 0.0);
  EXPECT_EQ(utilization_scores(dump, {64, 5}), s);
}

TEST(Reconstruction, ZeroGradientsGiveZero) {
  const auto e = reconstruction_errors(matrix(DumpKind::weight_grad, 2, 2, 5, {0, 0, 0, 0}),
                                       matrix(DumpKind::bias_grad, 2, 1, 5, {0, 0}),
                                       matrix(DumpKind::weights, 2, 2, 0, {1, 2, 3, 4}),
                                       matrix(DumpKind::biases, 2, 1, 0, {1, 1}));
  EXPECT_EQ(e, (std::vector<double>{0.0, 0.0}));
}

TEST(Reconstruction, HandDotProduct) {
  // 0.5*1 + (-0.5)*2 + 0.25*1 = -0.25
  const auto e = reconstruction_errors(matrix(DumpKind::weight_grad, 1, 2, 1, {0.5f, -0.5f}),
                                       matrix(DumpKind::bias_grad, 1, 1, 1, {0.25f}),
                                       matrix(DumpKind::weights, 1, 2, 0, {1, 2}),
                                       matrix(DumpKind::biases, 1, 1, 0, {1}));
  EXPECT_DOUBLE_EQ(e[0], -0.25);
  const auto abs = reconstruction_errors(matrix(DumpKind::weight_grad, 1, 2, 1, {0.5f, -0.5f}),
                                         matrix(DumpKind::bias_grad, 1, 1, 1, {0.25f}),
                                         matrix(DumpKind::weights, 1, 2, 0, {1, 2}),
                                         matrix(DumpKind::biases, 1, 1, 0, {1}), true);
  EXPECT_DOUBLE_EQ(abs[0], 0.25);
}

TEST(Reconstruction, SummedGradientsEqualPerSampleMean) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t J = 3, d = 4;
  std::vector<double> g1(J * d), g2(J * d), b1(J), b2(J), w(J * d), b(J);
  for (auto* v : {&g1, &g2, &b1, &b2, &w, &b})
    for (auto& x : *v) x = u(rng);
  std::vector<double> gsum(J * d), bsum(J);
  for (std::size_t i = 0; i < J * d; ++i) gsum[i] = g1[i] + g2[i];
  for (std::size_t i = 0; i < J; ++i) bsum[i] = b1[i] + b2[i];
  const auto e = reconstruction_errors<double>(gsum, bsum, w, b, J, d, 2);
  for (std::size_t j = 0; j < J; ++j) {
    double s1 = b1[j] * b[j], s2 = b2[j] * b[j];
    for (std::size_t c = 0; c < d; ++c) {
      s1 += g1[j * d + c] * w[j * d + c];
      s2 += g2[j * d + c] * w[j * d + c];
    }
    EXPECT_NEAR(e[j], (s1 + s2) / 2.0, 1e-14);
  }
  // Linearity: doubling the gradients doubles every error.
  for (auto& x : gsum) x *= 2;
  for (auto& x : bsum) x *= 2;
  const auto e2 = reconstruction_errors<double>(gsum, bsum, w, b, J, d, 2);
  for (std::size_t j = 0; j < J; ++j) EXPECT_EQ(e2[j], 2 * e[j]);
}

TEST(Reconstruction, ContractErrors) {
  const auto wg = matrix(DumpKind::weight_grad, 2, 2, 3, {1, 2, 3, 4});
  const auto bg = matrix(DumpKind::bias_grad, 2, 1, 3, {1, 2});
  const auto w = matrix(DumpKind::weights, 2, 2, 0, {1, 2, 3, 4});
  const auto b = matrix(DumpKind::biases, 2, 1, 0, {1, 2});
  EXPECT_NO_THROW(reconstruction_errors(wg, bg, w, b));
  EXPECT_THROW(reconstruction_errors(wg, bg, matrix(DumpKind::weights, 1, 2, 0, {1, 2}), b), Error);
  EXPECT_THROW(reconstruction_errors(wg, bg, matrix(DumpKind::weights, 1, 4, 0, {1, 2, 3, 4}), b),
               Error);
  EXPECT_THROW(reconstruction_errors(matrix(DumpKind::weight_grad, 2, 2, 0, {1, 2, 3, 4}),
                                     matrix(DumpKind::bias_grad, 2, 1, 0, {1, 2}), w, b),
               Error);
  EXPECT_THROW(reconstruction_errors(w, bg, w, b), Error);
}

TEST(DiagnoseLayer, ShapeContractAndLayerMismatch) {
  LayerDumps d;
  d.acts = dumpio::make_activation_dump<float>(
      3, 4, 4, 1, std::vector<float>{0, 1, 2, 3, 0, 1, 2, 3, 5, 1, 0, 3, 6, 1, 0, 3},
      std::vector<std::uint32_t>{0, 0, 1, 1});
  d.wgrad = matrix(DumpKind::weight_grad, 4, 1, 4, {1, 2, 3, 4}, 3);
  d.bgrad = matrix(DumpKind::bias_grad, 4, 1, 4, {1, 2, 3, 4}, 3);
  d.w = matrix(DumpKind::weights, 4, 1, 0, {1, 1, 1, 1}, 3);
  d.b = matrix(DumpKind::biases, 4, 1, 0, {0, 0, 0, 0}, 3);
  const auto diag = diagnose_layer(d);
  EXPECT_EQ(diag.layer_id, 3u);
  EXPECT_EQ(diag.utilization.size(), 4u);
  EXPECT_EQ(diag.reconstruction.size(), 4u);
  EXPECT_EQ(diag.class_count, 2u);
  EXPECT_DOUBLE_EQ(diag.utilization[0], 5.5);
  EXPECT_EQ(diag.utilization[1], 0.0);

  d.bgrad.header.layer_id = 4;
  try {
    diagnose_layer(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::contract_mismatch);
  }
}

TEST(DiagnoseLayer, CapturedMiniNetGivesFinitePositiveScores) {
  const auto tb = testkit::trained_blobs({12, 6});
  const auto cap = mininet::capture(tb.net, tb.data.prune);
  for (const auto& layer : cap.layers) {
    const auto diag = diagnose_layer(layer.to_dumps());
    EXPECT_TRUE(all_finite(diag.utilization));
    EXPECT_TRUE(all_finite(diag.reconstruction));
    EXPECT_GT(*std::max_element(diag.utilization.begin(), diag.utilization.end()), 0.0);
  }
}

TEST(DiagnoseLayer, FirstOrderFidelity) {
  // n * e_j is the directional derivative of the summed loss along the
  // unit's own parameters; compare with a one-sided difference of scaling
  // (w_j, b_j) by 1 - eps.
  const double eps = 1e-4;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    mininet::BlobSpec spec{4, 6, 1.5, seed};
    const auto data = mininet::make_blobs(spec, 64, "fidelity");
    const auto net = mininet::init({6, 10, 8, 4}, seed);
    const auto cap = mininet::capture(net, data);
    const double base = mininet::total_loss(net, data);
    for (const auto& lc : cap.layers) {
      const auto e = reconstruction_errors<double>(lc.weight_grad, lc.bias_grad, lc.weights, lc.bias,
                                                   lc.units, lc.fan_in, lc.samples);
      for (std::size_t j = 0; j < lc.units; ++j) {
        if (std::abs(e[j]) <= 1e-6) continue;
        auto scaled = net;
        auto& layer = scaled.layers[lc.layer_id];
        for (std::size_t c = 0; c < layer.fan_in; ++c) layer.weights[j * layer.fan_in + c] *= 1 - eps;
        layer.bias[j] *= 1 - eps;
        const double fd = (base - mininet::total_loss(scaled, data)) / eps;
        const double analytic = e[j] * static_cast<double>(lc.samples);
        EXPECT_LT(std::abs(fd - analytic), 1e-2 * std::abs(analytic))
            << "seed " << seed << " layer " << lc.layer_id << " unit " << j;
      }
    }
  }
}

TEST(ScoreReportJson, RoundTripsAtFullPrecision) {
  ScoreReport r;
  r.layers.push_back({2, {0.1, 1.0 / 3.0, 0.0}, {-1e-17, 2.5, std::nextafter(1.0, 2.0)}, 10, 3});
  r.meta["seed"] = 7;
  const auto text = to_json(r).dump();
  const auto back = report_from_json(nlohmann::json::parse(text));
  ASSERT_EQ(back.layers.size(), 1u);
  EXPECT_EQ(back.layers[0], r.layers[0]);
  EXPECT_EQ(back.meta["seed"], 7);
}

TEST(ScoreReportJson, RejectsDuplicateLayersAndBadShapes) {
  auto j = nlohmann::json::parse(
      R"({"layers":[{"layer":0,"J":1,"utilization":[0.5],"reconstruction":[0.1]},
                    {"layer":0,"J":1,"utilization":[0.5],"reconstruction":[0.1]}]})");
  EXPECT_THROW(report_from_json(j), Error);
  j = nlohmann::json::parse(R"({"layers":[{"layer":0,"J":2,"utilization":[0.5],"reconstruction":[0.1]}]})");
  EXPECT_THROW(report_from_json(j), Error);
  j = nlohmann::json::parse(R"({"layers":[{"layer":0,"J":1,"utilization":[-0.5],"reconstruction":[0.1]}]})");
  EXPECT_THROW(report_from_json(j), Error);
}
