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

#include <vector>

#include <nlohmann/json.hpp>

#include "sgen/tensor.hpp"

namespace sgen {

/// Linear variance schedule. Vectors are indexed by t = 0..T with alpha_bar[0] = 1
/// and beta[0] = 0 as placeholders, so beta[t] is the usual 1-based beta_t.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  /// sigma_t of the reverse step; zero at t = 1.
  double sigma(int t) const;
};

void to_json(nlohmann::json& j, const NoiseSchedule& s);
void from_json(const nlohmann::json& j, NoiseSchedule& s);

inline constexpr double kReferenceBetaStart = 1e-4;
inline constexpr double kReferenceBetaEnd = 0.02;
inline constexpr int kReferenceSteps = 1000;

/// beta_t = beta_start + (t - 1)(beta_end - beta_start)/(T - 1).
NoiseSchedule build_schedule(int T, double beta_start, double beta_end);

/// Linear schedule for T steps whose endpoints are the reference (1e-4, 0.02)
/// scaled by one common factor so that alpha_bar_T matches the T = 1000
/// reference. Returns the reference schedule itself for T = 1000.
NoiseSchedule matched_schedule(int T);

/// sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
template <typename T>
Matrix<T> q_sample(const Matrix<T>& x0, int t, const Matrix<T>& eps, const NoiseSchedule& schedule);

/// Interleaved (sin, cos) pairs with frequencies 10000^{-2i/dim}.
Eigen::RowVectorXd time_embedding(double t, int dim);

/// x_{t-1} = (x_t - (1 - alpha_t)/sqrt(1 - alpha_bar_t) eps_hat)/sqrt(alpha_t) + sigma_t z.
template <typename T>
Matrix<T> p_sample_step(const Matrix<T>& x_t, int t, const Matrix<T>& predicted_noise, const Matrix<T>& z,
                        const NoiseSchedule& schedule);

}  // namespace sgen
