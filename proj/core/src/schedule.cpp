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

#include "sgen/schedule.hpp"

#include <cmath>

#include "sgen/error.hpp"

namespace sgen {

double NoiseSchedule::sigma(int t) const {
  if (t < 1 || t > T) throw Error(ErrorCode::kInvalidRange, "t outside 1..T");
  return std::sqrt((1.0 - alpha_bar[t - 1]) / (1.0 - alpha_bar[t]) * beta[t]);
}

void to_json(nlohmann::json& j, const NoiseSchedule& s) {
  j = {{"T", s.T}, {"beta", s.beta}};
}

void from_json(const nlohmann::json& j, NoiseSchedule& s) {
  s.T = j.at("T").get<int>();
  s.beta = j.at("beta").get<std::vector<double>>();
  if (static_cast<int>(s.beta.size()) != s.T + 1) throw Error(ErrorCode::kCheckpointMismatch, "schedule length");
  s.alpha.assign(s.beta.size(), 1.0);
  s.alpha_bar.assign(s.beta.size(), 1.0);
  for (int t = 1; t <= s.T; ++t) {
    s.alpha[t] = 1.0 - s.beta[t];
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
  }
}

NoiseSchedule build_schedule(int T, double beta_start, double beta_end) {
  if (T < 2) throw Error(ErrorCode::kInvalidRange, "T must be >= 2");
  if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0)) {
    throw Error(ErrorCode::kInvalidRange, "need 0 < beta_start < beta_end < 1");
  }
  NoiseSchedule s;
  s.T = T;
  s.beta.assign(static_cast<size_t>(T) + 1, 0.0);
  s.alpha.assign(static_cast<size_t>(T) + 1, 1.0);
  s.alpha_bar.assign(static_cast<size_t>(T) + 1, 1.0);
  for (int t = 1; t <= T; ++t) {
    s.beta[t] = beta_start + (t - 1) * (beta_end - beta_start) / (T - 1);
    s.alpha[t] = 1.0 - s.beta[t];
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
  }
  return s;
}

NoiseSchedule matched_schedule(int T) {
  if (T == kReferenceSteps) return build_schedule(T, kReferenceBetaStart, kReferenceBetaEnd);
  const double target = std::log(build_schedule(kReferenceSteps, kReferenceBetaStart, kReferenceBetaEnd).alpha_bar.back());
  auto log_end = [T](double scale) {
    return std::log(build_schedule(T, kReferenceBetaStart * scale, kReferenceBetaEnd * scale).alpha_bar.back());
  };
  // log alpha_bar_T decreases monotonically in the scale factor.
  double lo = 1e-3, hi = 0.999 / kReferenceBetaEnd;
  if (log_end(hi) > target) return build_schedule(T, kReferenceBetaStart * hi, kReferenceBetaEnd * hi);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (log_end(mid) > target ? lo : hi) = mid;
  }
  const double scale = 0.5 * (lo + hi);
  return build_schedule(T, kReferenceBetaStart * scale, kReferenceBetaEnd * scale);
}

template <typename T>
Matrix<T> q_sample(const Matrix<T>& x0, int t, const Matrix<T>& eps, const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.T) throw Error(ErrorCode::kInvalidRange, "t outside 1..T");
  const T a = static_cast<T>(std::sqrt(schedule.alpha_bar[t]));
  const T b = static_cast<T>(std::sqrt(1.0 - schedule.alpha_bar[t]));
  return a * x0 + b * eps;
}

Eigen::RowVectorXd time_embedding(double t, int dim) {
  Eigen::RowVectorXd e(dim);
  for (int i = 0; 2 * i < dim; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / dim);
    e(2 * i) = std::sin(t * freq);
    if (2 * i + 1 < dim) e(2 * i + 1) = std::cos(t * freq);
  }
  return e;
}

template <typename T>
Matrix<T> p_sample_step(const Matrix<T>& x_t, int t, const Matrix<T>& predicted_noise, const Matrix<T>& z,
                        const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.T) throw Error(ErrorCode::kInvalidRange, "t outside 1..T");
  const double coef = (1.0 - schedule.alpha[t]) / std::sqrt(1.0 - schedule.alpha_bar[t]);
  const double inv = 1.0 / std::sqrt(schedule.alpha[t]);
  Matrix<T> out = static_cast<T>(inv) * (x_t - static_cast<T>(coef) * predicted_noise);
  const double sigma = schedule.sigma(t);
  if (sigma != 0.0) out += static_cast<T>(sigma) * z;
  return out;
}

template Matrix<float> q_sample<float>(const Matrix<float>&, int, const Matrix<float>&, const NoiseSchedule&);
template Matrix<double> q_sample<double>(const Matrix<double>&, int, const Matrix<double>&, const NoiseSchedule&);
template Matrix<float> p_sample_step<float>(const Matrix<float>&, int, const Matrix<float>&, const Matrix<float>&,
                                            const NoiseSchedule&);
template Matrix<double> p_sample_step<double>(const Matrix<double>&, int, const Matrix<double>&,
                                              const Matrix<double>&, const NoiseSchedule&);

}  // namespace sgen
