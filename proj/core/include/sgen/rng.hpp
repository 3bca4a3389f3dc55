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
#include <random>

#include "sgen/tensor.hpp"

namespace sgen {

/// Seeded random stream. Identical seeds give identical draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  double uniform();                          // [0, 1)
  double uniform(double lo, double hi);      // [lo, hi)
  int uniform_int(int lo, int hi);           // inclusive
  double gaussian();
  std::uint64_t next_u64() { return engine_(); }

  /// Independent child stream keyed by `stream`; does not advance this one.
  Rng fork(std::uint64_t stream) const;

  /// rows x cols standard normal draws, filled in row-major order.
  template <typename T>
  Matrix<T> gaussian(Eigen::Index rows, Eigen::Index cols) {
    Matrix<T> out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = static_cast<T>(gaussian());
    }
    return out;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

inline Rng seeded_rng(std::uint64_t seed) { return Rng(seed); }

std::uint64_t splitmix64(std::uint64_t x);
/// 64-bit FNV-1a.
std::uint64_t fnv1a(const void* data, size_t size, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace sgen
