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

#pragma once

// Brute-force references for the evaluation metrics. Deliberately naive:
// every quantity is recomputed from its definition without sharing code with
// the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>
#include <utility>
#include <vector>

#include "sgen/shape.hpp"

namespace sgen::oracle {

inline double sq_dist(const Points& a, Eigen::Index i, const Points& b, Eigen::Index j) {
  double s = 0;
  for (int c = 0; c < 3; ++c) {
    const double d = static_cast<double>(a(i, c)) - static_cast<double>(b(j, c));
    s += d * d;
  }
  return s;
}

inline double chamfer(const Points& a, const Points& b) {
  double ab = 0, ba = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < b.rows(); ++j) best = std::min(best, sq_dist(a, i, b, j));
    ab += best;
  }
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < a.rows(); ++i) best = std::min(best, sq_dist(a, i, b, j));
    ba += best;
  }
  return ab / static_cast<double>(a.rows()) + ba / static_cast<double>(b.rows());
}

/// Exact assignment by dynamic programming over subsets of b (n <= 20).
inline double emd(const Points& a, const Points& b) {
  const int n = static_cast<int>(a.rows());
  std::vector<double> best(size_t{1} << n, std::numeric_limits<double>::infinity());
  best[0] = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (!std::isfinite(best[mask])) continue;
    const int i = __builtin_popcount(mask);
    if (i == n) continue;
    for (int j = 0; j < n; ++j) {
      if (mask & (1u << j)) continue;
      const double c = best[mask] + std::sqrt(sq_dist(a, i, b, j));
      best[mask | (1u << j)] = std::min(best[mask | (1u << j)], c);
    }
  }
  return best[(1u << n) - 1] / n;
}

using Kernel = double (*)(const Points&, const Points&);

inline double mmd(const std::vector<Points>& gen, const std::vector<Points>& ref, Kernel k) {
  double total = 0;
  for (const auto& r : ref) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : gen) best = std::min(best, k(g, r));
    total += best;
  }
  return total / static_cast<double>(ref.size());
}

inline double cov(const std::vector<Points>& gen, const std::vector<Points>& ref, Kernel k) {
  std::vector<bool> matched(ref.size(), false);
  for (const auto& g : gen) {
    // (distance, index) pairs sort ties toward the lower index.
    std::vector<std::pair<double, size_t>> d;
    for (size_t j = 0; j < ref.size(); ++j) d.emplace_back(k(g, ref[j]), j);
    matched[std::min_element(d.begin(), d.end())->second] = true;
  }
  return static_cast<double>(std::count(matched.begin(), matched.end(), true)) / static_cast<double>(ref.size());
}

inline double nna(const std::vector<Points>& gen, const std::vector<Points>& ref, Kernel k) {
  std::vector<std::pair<const Points*, int>> all;
  for (const auto& g : gen) all.emplace_back(&g, 0);
  for (const auto& r : ref) all.emplace_back(&r, 1);
  int correct = 0;
  for (size_t a = 0; a < all.size(); ++a) {
    std::vector<std::pair<double, size_t>> d;
    for (size_t b = 0; b < all.size(); ++b) {
      if (b != a) d.emplace_back(k(*all[a].first, *all[b].first), b);
    }
    correct += all[std::min_element(d.begin(), d.end())->second].second == all[a].second;
  }
  return static_cast<double>(correct) / static_cast<double>(all.size());
}

inline double jsd(const std::vector<Points>& gen, const std::vector<Points>& ref, int res, double extent) {
  auto hist = [&](const std::vector<Points>& set) {
    std::map<std::tuple<int, int, int>, double> h;
    double n = 0;
    for (const auto& p : set) {
      for (Eigen::Index i = 0; i < p.rows(); ++i) {
        int idx[3];
        for (int c = 0; c < 3; ++c) {
          int v = static_cast<int>(std::floor((p(i, c) + extent) * res / (2 * extent)));
          idx[c] = std::max(0, std::min(res - 1, v));
        }
        h[{idx[0], idx[1], idx[2]}] += 1;
        n += 1;
      }
    }
    for (auto& [key, v] : h) v /= n;
    return h;
  };
  auto p = hist(gen), q = hist(ref);
  std::map<std::tuple<int, int, int>, std::pair<double, double>> joint;
  for (auto& [key, v] : p) joint[key].first = v;
  for (auto& [key, v] : q) joint[key].second = v;
  double kl_p = 0, kl_q = 0;
  for (auto& [key, pq] : joint) {
    const double m = (pq.first + pq.second) / 2;
    if (pq.first > 0) kl_p += pq.first * std::log(pq.first / m);
    if (pq.second > 0) kl_q += pq.second * std::log(pq.second / m);
  }
  return 0.5 * kl_p + 0.5 * kl_q;
}

inline double sca(const BinaryVector& v, const BinaryMatrix& e, const BinaryVector& pv, const BinaryMatrix& pe) {
  const int m = static_cast<int>(v.size());
  double s = 0;
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < m; ++k) s += (v[j] == pv[j] ? 1.0 : 0.0) * (e(j, k) == pe(j, k) ? 1.0 : 0.0);
  }
  return s / (m * m);
}

}  // namespace sgen::oracle
