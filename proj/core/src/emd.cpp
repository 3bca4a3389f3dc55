// Copyright 2026 The sgen Authors
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

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sgen/metrics.hpp"

namespace sgen {

std::vector<int> hungarian(const MatrixD& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw Error(ErrorCode::kSizeMismatch, "assignment needs a square cost matrix");
  const double inf = std::numeric_limits<double>::infinity();
  // Shortest augmenting paths with row/column potentials, 1-based with a
  // virtual column 0.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(static_cast<size_t>(n));
  for (int j = 1; j <= n; ++j) assignment[static_cast<size_t>(p[j] - 1)] = j - 1;
  return assignment;
}

namespace {

MatrixD euclidean_costs(const Points& a, const Points& b) {
  MatrixD c(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Eigen::RowVector3d ai = a.row(i).cast<double>();
    for (Eigen::Index j = 0; j < b.rows(); ++j) c(i, j) = (ai - b.row(j).cast<double>()).norm();
  }
  return c;
}

void check_nonempty(const Points& a, const Points& b) {
  if (a.rows() == 0 || b.rows() == 0) throw Error(ErrorCode::kEmptyCloud, "empty point cloud");
}

}  // namespace

double emd_exact(const Points& a, const Points& b) {
  check_nonempty(a, b);
  if (a.rows() != b.rows()) throw Error(ErrorCode::kSizeMismatch, "exact EMD needs equal point counts");
  const MatrixD c = euclidean_costs(a, b);
  const auto match = hungarian(c);
  // Summing the sorted matched costs makes emd_exact(a, b) == emd_exact(b, a)
  // bit for bit, so nearest-neighbour ties resolve the same in both directions.
  std::vector<double> terms(static_cast<size_t>(c.rows()));
  for (Eigen::Index i = 0; i < c.rows(); ++i) terms[static_cast<size_t>(i)] = c(i, match[static_cast<size_t>(i)]);
  std::sort(terms.begin(), terms.end());
  double total = 0.0;
  for (double t : terms) total += t;
  return total / static_cast<double>(c.rows());
}

double emd_sinkhorn(const Points& a, const Points& b, double epsilon, int iterations) {
  check_nonempty(a, b);
  if (!(epsilon > 0.0) || iterations < 1) throw Error(ErrorCode::kInvalidArgument, "bad Sinkhorn parameters");
  const MatrixD c = euclidean_costs(a, b);
  const Eigen::Index n = c.rows(), m = c.cols();
  const double log_a = -std::log(static_cast<double>(n)), log_b = -std::log(static_cast<double>(m));
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n), g = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd buf;
  auto lse = [](const auto& x) {
    const double mx = x.maxCoeff();
    return mx + std::log((x.array() - mx).exp().sum());
  };
  for (int it = 0; it < iterations; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      buf = (g.transpose() - c.row(i)) / epsilon;
      f(i) = epsilon * (log_a - lse(buf));
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      buf = (f - c.col(j)) / epsilon;
      g(j) = epsilon * (log_b - lse(buf));
    }
  }
  double cost = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) cost += std::exp((f(i) + g(j) - c(i, j)) / epsilon) * c(i, j);
  }
  return cost;
}

double emd(const Points& a, const Points& b, const MetricConfig& config) {
  if (a.rows() <= config.emd_exact_max && b.rows() <= config.emd_exact_max) return emd_exact(a, b);
  return emd_sinkhorn(a, b, config.sinkhorn_epsilon, config.sinkhorn_iterations);
}

}  // namespace sgen
