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
#include <functional>
#include <map>
#include <string>

#include "sgen/param_store.hpp"

namespace sgen {

struct GradCheckReport {
  std::map<std::string, double> max_rel_error;  // per parameter
  double max_error = 0.0;
  int probes = 0;
  bool pass = false;
};

inline constexpr double kGradCheckTolerance = 1e-4;

/// Evaluates the loss at the store's current values. When `with_grad` is true
/// it must also accumulate analytic gradients into the store.
using LossFunction = std::function<double(ParamStore<double>& store, bool with_grad)>;

/// Compares analytic gradients to central differences (L(p+h) - L(p-h)) / 2h on
/// up to `probes` randomly chosen scalars per parameter. Relative error is
/// |ga - gn| / max(|ga|, |gn|, 1e-8); pass iff every error < 1e-4.
GradCheckReport grad_check(const LossFunction& loss, ParamStore<double>& store, int probes, double h,
                           std::uint64_t seed = 0);

}  // namespace sgen
