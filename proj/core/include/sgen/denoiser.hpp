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

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgen/autodiff.hpp"
#include "sgen/schedule.hpp"

namespace sgen {

struct DenoiserConfig {
  int layers = 4;
  int width = 256;
  int heads = 8;
  int time_dim = 64;
  int ffn = 512;

  void validate() const;
};

void to_json(nlohmann::json& j, const DenoiserConfig& c);
void from_json(const nlohmann::json& j, DenoiserConfig& c);

/// Context token width: z_j, v_j and the adjacency row e_j,.
inline int context_dim(int latent_dim, int m) { return latent_dim + 1 + m; }

/// Registers "ddpm/..." parameters. With `zero_output` the final head starts at
/// zero, so the untrained denoiser predicts no noise.
template <typename T>
void register_denoiser_params(ParamStore<T>& store, const DenoiserConfig& config, int m, int latent_dim, Rng& rng,
                              bool zero_output = false);

/// m tokens per shape, row b*m + j = (z_j, v_j, e_j,.).
template <typename T>
ad::Var context_tokens(ad::Tape<T>& tape, ad::Var z, const Matrix<T>& existence, const Matrix<T>& adjacency);

/// Rows of time embeddings for per-point steps.
template <typename T>
Matrix<T> time_embedding_rows(const std::vector<int>& steps, int dim);

/// Pre-norm block: x + Attn(LN(x)) then x + FFN(LN(x)). Queries come from the
/// point tokens, keys and values from the m context tokens of each point's
/// shape. The time embedding enters the values through its own block of the
/// value projection; its key block would add the same logit to every token of
/// a point, so it cancels in the softmax and is not parameterized.
template <typename T>
ad::Var cross_attention_layer(ad::Tape<T>& tape, ParamStore<T>& store, const DenoiserConfig& config,
                              const std::string& prefix, ad::Var x, ad::Var tokens, const Matrix<T>& time_emb,
                              const std::vector<int>& group, int m);

/// Attention output before the residual (exposed for tests).
template <typename T>
ad::Var attention_block(ad::Tape<T>& tape, ParamStore<T>& store, const DenoiserConfig& config,
                        const std::string& prefix, ad::Var normed, ad::Var tokens, const Matrix<T>& time_emb,
                        const std::vector<int>& group, int m);

/// Predicted noise (N x 3) for noised points x_t with one-hot labels.
template <typename T>
ad::Var denoiser_forward(ad::Tape<T>& tape, ParamStore<T>& store, const DenoiserConfig& config, int m, ad::Var x_t,
                         const Matrix<T>& labels, ad::Var tokens, const Matrix<T>& time_emb,
                         const std::vector<int>& group);

/// Points of a batch with their per-point step, noise and shape index.
template <typename T>
struct DiffusionBatch {
  Matrix<T> x0;
  Matrix<T> labels;
  std::vector<int> group;
  std::vector<int> t;
  Matrix<T> eps;
};

/// Mean over points of |eps - prediction|^2.
template <typename T>
ad::Var noise_prediction_loss(ad::Tape<T>& tape, ad::Var prediction, const Matrix<T>& eps);

template <typename T>
ad::Var diffusion_loss(ad::Tape<T>& tape, ParamStore<T>& store, const DenoiserConfig& config,
                       const NoiseSchedule& schedule, int m, const DiffusionBatch<T>& batch, ad::Var tokens);

}  // namespace sgen
