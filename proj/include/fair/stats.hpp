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
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "fair/common.hpp"

namespace fair::stats {

/// m-th smallest value of `values` (duplicates kept), or -infinity for m == 0.
template <typename T>
double quantile(std::span<const T> values, std::size_t m) {
  require(m <= values.size(), ErrorKind::invalid_input,
          "quantile rank " + std::to_string(m) + " out of [0, " +
              std::to_string(values.size()) + "]");
  if (m == 0) return -std::numeric_limits<double>::infinity();
  std::vector<double> sorted(values.begin(), values.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(m - 1),
                   sorted.end());
  return sorted[m - 1];
}

/// m-th largest value, or +infinity for m == 0.
template <typename T>
double upper_quantile(std::span<const T> values, std::size_t m) {
  require(m <= values.size(), ErrorKind::invalid_input,
          "quantile rank " + std::to_string(m) + " out of [0, " +
              std::to_string(values.size()) + "]");
  if (m == 0) return std::numeric_limits<double>::infinity();
  return quantile(values, values.size() - m + 1);
}

/// Exact W1 between two sorted samples. The inverse CDFs are step functions
/// with breakpoints i/|a| and j/|b|; we walk the merged breakpoints and
/// accumulate |a_i - b_j| over each segment. Breakpoints are compared as
/// integers (i*|b| vs j*|a|) so segment lengths are exact.
inline double wasserstein_1d_sorted(std::span<const double> a, std::span<const double> b) {
  const std::uint64_t p = a.size(), q = b.size();
  if (p == q) {
    double sum = 0.0;
    for (std::size_t i = 0; i < p; ++i) sum += std::abs(a[i] - b[i]);
    return sum / static_cast<double>(p);
  }
  // Positions are measured in units of 1/(p*q).
  std::size_t i = 0, j = 0;
  std::uint64_t pos = 0;
  double sum = 0.0;
  while (i < p && j < q) {
    const std::uint64_t next_a = (i + 1) * q;
    const std::uint64_t next_b = (j + 1) * p;
    const std::uint64_t next = std::min(next_a, next_b);
    sum += std::abs(a[i] - b[j]) * static_cast<double>(next - pos);
    pos = next;
    if (next_a == next) ++i;
    if (next_b == next) ++j;
  }
  return sum / (static_cast<double>(p) * static_cast<double>(q));
}

template <typename T, typename U>
double wasserstein_1d(std::span<const T> a, std::span<const U> b) {
  require(!a.empty() && !b.empty(), ErrorKind::invalid_input,
          "wasserstein_1d: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::stable_sort(sa.begin(), sa.end());
  std::stable_sort(sb.begin(), sb.end());
  return wasserstein_1d_sorted(sa, sb);
}

template <typename T>
double wasserstein_1d(const std::vector<T>& a, const std::vector<T>& b) {
  return wasserstein_1d(std::span<const T>(a), std::span<const T>(b));
}

/// Row-major m x d sample of vector-valued outputs.
template <typename T>
struct SampleND {
  std::span<const T> values;
  std::size_t dim = 1;

  std::size_t rows() const { return dim == 0 ? 0 : values.size() / dim; }
};

struct SlicedConfig {
  std::size_t projections = 32;
  std::uint64_t seed = 0;
};

/// `count` unit directions in R^dim drawn as normalized isotropic Gaussians.
inline std::vector<double> random_directions(std::size_t count, std::size_t dim,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> dirs(count * dim);
  for (std::size_t k = 0; k < count; ++k) {
    double* theta = dirs.data() + k * dim;
    double norm = 0.0;
    do {
      norm = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        theta[c] = gauss(rng);
        norm += theta[c] * theta[c];
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < dim; ++c) theta[c] /= norm;
  }
  return dirs;
}

template <typename T>
std::vector<double> project(const SampleND<T>& s, std::span<const double> theta) {
  std::vector<double> out(s.rows());
  for (std::size_t r = 0; r < out.size(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < s.dim; ++c) acc += static_cast<double>(s.values[r * s.dim + c]) * theta[c];
    out[r] = acc;
  }
  return out;
}

/// Mean of W1 over precomputed directions (row-major, dim columns).
template <typename T>
double sliced_wasserstein(const SampleND<T>& a, const SampleND<T>& b,
                          std::span<const double> directions) {
  require(a.dim == b.dim && a.dim > 0, ErrorKind::invalid_input,
          "sliced_wasserstein: dimension mismatch");
  require(a.rows() > 0 && b.rows() > 0, ErrorKind::invalid_input,
          "sliced_wasserstein: empty sample");
  const std::size_t count = directions.size() / a.dim;
  require(count > 0, ErrorKind::invalid_input, "sliced_wasserstein: no projections");
  double total = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    auto theta = directions.subspan(k * a.dim, a.dim);
    auto pa = project(a, theta), pb = project(b, theta);
    std::stable_sort(pa.begin(), pa.end());
    std::stable_sort(pb.begin(), pb.end());
    total += wasserstein_1d_sorted(pa, pb);
  }
  return total / static_cast<double>(count);
}

template <typename T>
double sliced_wasserstein(const SampleND<T>& a, const SampleND<T>& b,
                          const SlicedConfig& cfg) {
  require(cfg.projections >= 1, ErrorKind::invalid_input,
          "sliced_wasserstein: num_projections must be >= 1");
  require(a.dim == b.dim && a.dim > 0, ErrorKind::invalid_input,
          "sliced_wasserstein: dimension mismatch");
  const auto dirs = random_directions(cfg.projections, a.dim, cfg.seed);
  return sliced_wasserstein(a, b, std::span<const double>(dirs));
}

inline double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
inline double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace fair::stats
