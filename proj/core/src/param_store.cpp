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

#include "sgen/param_store.hpp"

#include <cmath>

namespace sgen {

template <typename T>
Parameter<T>& ParamStore<T>::add(const std::string& name, Matrix<T> value) {
  if (params_.count(name) != 0) throw Error(ErrorCode::kInvalidArgument, "duplicate parameter " + name);
  auto& p = params_[name];
  p.name = name;
  p.grad = Matrix<T>::Zero(value.rows(), value.cols());
  p.value = std::move(value);
  order_.push_back(name);
  return p;
}

template <typename T>
Parameter<T>& ParamStore<T>::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(ErrorCode::kCheckpointMismatch, "missing parameter " + name);
  return it->second;
}

template <typename T>
const Parameter<T>& ParamStore<T>::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(ErrorCode::kCheckpointMismatch, "missing parameter " + name);
  return it->second;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& [_, p] : params_) {
    p.grad.setZero();
    p.has_grad = false;
  }
}

template <typename T>
size_t ParamStore<T>::scalar_count() const {
  size_t total = 0;
  for (const auto& [_, p] : params_) total += static_cast<size_t>(p.value.size());
  return total;
}

template <typename T>
Matrix<T> glorot(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng, double gain) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix<T> w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(rng.uniform(-limit, limit));
  return w;
}

template <typename T>
double clip_grad_norm(ParamStore<T>& store, double max_norm) {
  double sq = 0.0;
  for (auto& [_, p] : store.entries()) sq += p.grad.template cast<double>().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T factor = static_cast<T>(max_norm / norm);
    for (auto& [_, p] : store.entries()) p.grad *= factor;
  }
  return norm;
}

bool is_frozen(const AdamState& state, const std::string& name) {
  for (const auto& prefix : state.frozen_prefixes) {
    if (name.compare(0, prefix.size(), prefix) == 0) return true;
  }
  return false;
}

template <typename T>
void adam_step(ParamStore<T>& store, AdamState& state) {
  for (const auto& [name, p] : store.entries()) {
    if (!is_frozen(state, name) && !p.has_grad) throw Error(ErrorCode::kMissingGradient, name);
  }
  const double t = static_cast<double>(store.step + 1);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, p] : store.entries()) {
    if (is_frozen(state, name)) continue;
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() == 0) {
      m = MatrixD::Zero(p.value.rows(), p.value.cols());
      v = MatrixD::Zero(p.value.rows(), p.value.cols());
    }
    const MatrixD g = p.grad.template cast<double>();
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double mhat = m.data()[i] / c1;
      const double vhat = v.data()[i] / c2;
      p.value.data()[i] = static_cast<T>(p.value.data()[i] - state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
  ++store.step;
  store.zero_grad();
}

template class ParamStore<float>;
template class ParamStore<double>;
template Matrix<float> glorot<float>(Eigen::Index, Eigen::Index, Rng&, double);
template Matrix<double> glorot<double>(Eigen::Index, Eigen::Index, Rng&, double);
template double clip_grad_norm<float>(ParamStore<float>&, double);
template double clip_grad_norm<double>(ParamStore<double>&, double);
template void adam_step<float>(ParamStore<float>&, AdamState&);
template void adam_step<double>(ParamStore<double>&, AdamState&);

}  // namespace sgen
