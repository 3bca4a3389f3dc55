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

#include "sgen/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sgen {

GradCheckReport grad_check(const LossFunction& loss, ParamStore<double>& store, int probes, double h,
                           std::uint64_t seed) {
  if (!(h >= 1e-6 && h <= 1e-4)) throw Error(ErrorCode::kInvalidRange, "h must lie in [1e-6, 1e-4]");
  store.zero_grad();
  const double base = loss(store, true);
  std::map<std::string, MatrixD> analytic;
  for (const auto& [name, p] : store.entries()) {
    if (!p.has_grad || p.grad.size() != p.value.size()) throw Error(ErrorCode::kMissingGradient, name);
    analytic[name] = p.grad;
  }
  store.zero_grad();
  if (loss(store, false) != base) throw Error(ErrorCode::kNondeterministicLoss, "repeated evaluation differs");

  GradCheckReport report;
  Rng rng(seed);
  for (auto& [name, p] : store.entries()) {
    const Eigen::Index size = p.value.size();
    std::vector<Eigen::Index> picks(static_cast<size_t>(size));
    std::iota(picks.begin(), picks.end(), Eigen::Index{0});
    for (Eigen::Index i = size; i > 1; --i) {
      std::swap(picks[static_cast<size_t>(i - 1)], picks[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i - 1)))]);
    }
    picks.resize(std::min<size_t>(picks.size(), static_cast<size_t>(probes)));
    double worst = 0.0;
    for (Eigen::Index idx : picks) {
      double& x = p.value.data()[idx];
      const double saved = x;
      x = saved + h;
      const double up = loss(store, false);
      x = saved - h;
      const double down = loss(store, false);
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double exact = analytic[name].data()[idx];
      const double rel = std::abs(exact - numeric) / std::max({std::abs(exact), std::abs(numeric), 1e-8});
      worst = std::max(worst, rel);
      ++report.probes;
    }
    report.max_rel_error[name] = worst;
    report.max_error = std::max(report.max_error, worst);
  }
  store.zero_grad();
  report.pass = report.max_error < kGradCheckTolerance;
  return report;
}

}  // namespace sgen
