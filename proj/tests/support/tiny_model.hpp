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

#include "sgen/model.hpp"
#include "sgen/synthgen.hpp"

namespace sgen::testing {

/// Smallest configuration that exercises every module path.
inline ModelConfig tiny_model_config() {
  ModelConfig c;
  c.sgn.point_hidden = 16;
  c.sgn.feature_width = 16;
  c.sgn.gat_layers = 1;
  c.sgn.gat_heads = 2;
  c.sgn.gat_hidden = 16;
  c.sgn.latent_dim = 4;
  c.flow.latent_dim = 4;
  c.flow.hidden = 16;
  c.flow.hidden_layers = 2;
  c.flow.steps = 8;
  c.denoiser.layers = 1;
  c.denoiser.width = 16;
  c.denoiser.heads = 2;
  c.denoiser.time_dim = 8;
  c.denoiser.ffn = 32;
  c.T = 20;
  return c;
}

/// `per_code` shapes of every catalog code with n points each.
inline std::vector<ShapeRecord> small_corpus(int per_code, int n, std::uint64_t seed) {
  GeneratorConfig g;
  g.n = n;
  g.count_per_code = per_code;
  g.seed = seed;
  return make_dataset(g).records;
}

}  // namespace sgen::testing
