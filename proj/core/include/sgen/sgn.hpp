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

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgen/autodiff.hpp"
#include "sgen/shape.hpp"

namespace sgen {

struct SgnConfig {
  int point_hidden = 128;
  int feature_width = 128;  // c
  int gat_layers = 2;
  int gat_heads = 4;
  int gat_hidden = 128;
  int latent_dim = 32;  // d

  void validate() const;
};

void to_json(nlohmann::json& j, const SgnConfig& c);
void from_json(const nlohmann::json& j, SgnConfig& c);

inline constexpr double kLogSigmaMin = -7.0;
inline constexpr double kLogSigmaMax = 2.0;
inline constexpr double kGatSlope = 0.2;

template <typename T>
void register_sgn_params(ParamStore<T>& store, const SgnConfig& config, int m, Rng& rng);

/// Shapes flattened into one encoder batch. Node rows are ordered shape-major:
/// row b*m + j is part j of shape b.
template <typename T>
struct GraphBatch {
  int shapes = 0;
  int m = 0;
  Matrix<T> points;               // N x 3
  Matrix<T> labels;               // N x m one-hot
  std::vector<int> point_shape;   // N
  std::vector<int> point_segment; // N, b*m + label
  Matrix<T> existence;            // shapes*m x 1
  Matrix<T> adjacency;            // shapes*m x m

  static GraphBatch from(std::span<const PointCloud* const> clouds, std::span<const StructureGraph* const> graphs);
  static GraphBatch from(const PointCloud& cloud, const StructureGraph& graph);
};

/// Shared-weight per-point MLP: N x 3 -> N x c.
template <typename T>
ad::Var pointwise_encoder(ad::Tape<T>& tape, ParamStore<T>& store, ad::Var points);

/// Mean of point features per (shape, part); zero rows for empty parts.
template <typename T>
ad::Var part_pool(ad::Tape<T>& tape, ad::Var features, const GraphBatch<T>& batch);

/// Neighborhood mask for graph attention: node j is visible from node i iff
/// both exist and (j == i or E[i][j] = 1).
template <typename T>
Matrix<T> attention_mask(const Matrix<T>& existence, const Matrix<T>& adjacency, int m);

/// One multi-head GAT layer (ELU output, zero rows for absent nodes).
template <typename T>
ad::Var gat_layer(ad::Tape<T>& tape, ParamStore<T>& store, const std::string& prefix, ad::Var nodes,
                  const Matrix<T>& mask, int m, int heads);

template <typename T>
struct PosteriorVars {
  ad::Var mu;
  ad::Var log_sigma;
  ad::Var sigma;
  ad::Var z;
};

/// z = mu + sigma * eps.
template <typename T>
ad::Var reparameterize(ad::Tape<T>& tape, ad::Var mu, ad::Var sigma, ad::Var eps);

/// Full encoder: features -> pooled parts (+ part one-hot and v_j) -> GAT
/// stack -> mu / log-sigma heads; z = mu + sigma * eps. eps is shapes*m x d.
template <typename T>
PosteriorVars<T> sgn_forward(ad::Tape<T>& tape, ParamStore<T>& store, const SgnConfig& config,
                             const GraphBatch<T>& batch, ad::Var eps);

/// Node features after the GAT stack (input to the posterior heads).
template <typename T>
ad::Var sgn_node_features(ad::Tape<T>& tape, ParamStore<T>& store, const SgnConfig& config,
                          const GraphBatch<T>& batch);

/// Per-part posterior for one shape (m x d each).
struct PosteriorOutput {
  MatrixD mu;
  MatrixD sigma;
  MatrixD z;
};

template <typename T>
PosteriorOutput encode_shape(ParamStore<T>& store, const SgnConfig& config, const PointCloud& cloud,
                             const StructureGraph& graph, const MatrixD& eps);

}  // namespace sgen
