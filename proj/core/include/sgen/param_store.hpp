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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sgen/error.hpp"
#include "sgen/rng.hpp"
#include "sgen/tensor.hpp"

namespace sgen {

template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
  bool has_grad = false;
};

/// Named parameter arrays with gradient accumulators. Entries have stable
/// addresses; iteration is in name order.
template <typename T>
class ParamStore {
 public:
  Parameter<T>& add(const std::string& name, Matrix<T> value);
  Parameter<T>& at(const std::string& name);
  const Parameter<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  /// Registration order.
  const std::vector<std::string>& names() const { return order_; }
  std::map<std::string, Parameter<T>>& entries() { return params_; }
  const std::map<std::string, Parameter<T>>& entries() const { return params_; }

  void zero_grad();
  size_t scalar_count() const;

  std::int64_t step = 0;

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& name : order_) {
      const auto& p = params_.at(name);
      auto& q = out.add(name, p.value.template cast<U>());
      if (p.has_grad) {
        q.grad = p.grad.template cast<U>();
        q.has_grad = true;
      }
    }
    out.step = step;
    return out;
  }

 private:
  std::map<std::string, Parameter<T>> params_;
  std::vector<std::string> order_;
};

/// Glorot-uniform initialization for a fan_in x fan_out weight.
template <typename T>
Matrix<T> glorot(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng, double gain = 1.0);

/// Scales all gradients so their global L2 norm is at most max_norm. Returns the
/// norm before clipping.
template <typename T>
double clip_grad_norm(ParamStore<T>& store, double max_norm);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::map<std::string, MatrixD> m;
  std::map<std::string, MatrixD> v;
  std::vector<std::string> frozen_prefixes;  // parameters skipped by adam_step
};

bool is_frozen(const AdamState& state, const std::string& name);

/// Bias-corrected Adam update of every non-frozen parameter, then increments
/// store.step and clears gradients. Throws MISSING_GRADIENT if a trainable
/// parameter has no gradient.
template <typename T>
void adam_step(ParamStore<T>& store, AdamState& state);

}  // namespace sgen
