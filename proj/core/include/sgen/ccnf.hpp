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

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "sgen/autodiff.hpp"
#include "sgen/sgn.hpp"

namespace sgen {

struct FlowConfig {
  int latent_dim = 32;  // d
  int hidden = 128;
  int hidden_layers = 3;
  int steps = 64;  // K, fixed-step RK4

  void validate() const;
};

void to_json(nlohmann::json& j, const FlowConfig& c);
void from_json(const nlohmann::json& j, FlowConfig& c);

template <typename T>
void register_flow_params(ParamStore<T>& store, const FlowConfig& config, int m, Rng& rng);

/// Velocity f(z, t) for a batch of rows and, when requested, the exact
/// divergence tr(df/dz) per row (B x 1).
template <typename T>
struct DynamicsEval {
  ad::Var dz;
  ad::Var trace;
};

template <typename T>
using Dynamics = std::function<DynamicsEval<T>(ad::Tape<T>&, ad::Var z, T t, bool with_trace)>;

/// tanh MLP on [z, t, condition] for one part. `condition` is B x (1 + m):
/// the part's existence flag followed by its adjacency row.
template <typename T>
Dynamics<T> mlp_dynamics(ParamStore<T>& store, const FlowConfig& config, int part, Matrix<T> condition);

/// f(z) = a z.
template <typename T>
Dynamics<T> linear_dynamics(T a);

template <typename T>
struct FlowVars {
  ad::Var w;
  ad::Var delta_logdet;  // B x 1, -integral of tr(df/dz) dt
};

/// Integrates dz/dt = f from t = 0 to 1.
template <typename T>
FlowVars<T> integrate_forward(ad::Tape<T>& tape, const Dynamics<T>& f, ad::Var z, int steps, bool with_logdet = true);

/// Integrates the same field from t = 1 back to 0.
template <typename T>
ad::Var integrate_inverse(ad::Tape<T>& tape, const Dynamics<T>& f, ad::Var w, int steps);

/// log N(w; 0, I) - delta_logdet, per row.
template <typename T>
ad::Var log_prob(ad::Tape<T>& tape, const Dynamics<T>& f, ad::Var z, int steps);

/// Condition rows (v_j, e_j,.) for part j of every shape in a node-major batch.
template <typename T>
Matrix<T> part_condition(const Matrix<T>& existence, const Matrix<T>& adjacency, int m, int part);

template <typename T>
using DynamicsFactory = std::function<Dynamics<T>(int part, const Matrix<T>& condition)>;

template <typename T>
struct PriorLossVars {
  ad::Var total;
  std::vector<ad::Var> cross_entropy;  // per part, batch mean of -log P(z_j)
  std::vector<ad::Var> entropy;        // per part, batch mean of H(Q_j)
};

/// sum_j [ -log P_j(z_j) - H(Q_j) ] averaged over the batch, all m parts included.
template <typename T>
PriorLossVars<T> prior_loss(ad::Tape<T>& tape, const DynamicsFactory<T>& dynamics, int steps,
                            const PosteriorVars<T>& posterior, const GraphBatch<T>& batch);

template <typename T>
PriorLossVars<T> prior_loss(ad::Tape<T>& tape, ParamStore<T>& store, const FlowConfig& config,
                            const PosteriorVars<T>& posterior, const GraphBatch<T>& batch);

struct PriorLossReport {
  std::vector<double> cross_entropy;
  std::vector<double> entropy;
  double total = 0.0;
};

template <typename T>
PriorLossReport prior_loss_report(const ad::Tape<T>& tape, const PriorLossVars<T>& vars);

/// Analytic entropy of N(mu, diag(sigma^2)) given log sigma.
double gaussian_entropy(const Eigen::VectorXd& log_sigma);

struct FlowResult {
  Eigen::VectorXd w;
  double delta_logdet = 0.0;
};

/// Single-vector convenience wrappers around the part-j flow.
template <typename T>
FlowResult flow_forward(ParamStore<T>& store, const FlowConfig& config, int part, const Eigen::VectorXd& z, int v_j,
                        std::span<const std::uint8_t> e_row);
template <typename T>
Eigen::VectorXd flow_inverse(ParamStore<T>& store, const FlowConfig& config, int part, const Eigen::VectorXd& w,
                             int v_j, std::span<const std::uint8_t> e_row);
template <typename T>
double flow_log_prob(ParamStore<T>& store, const FlowConfig& config, int part, const Eigen::VectorXd& z, int v_j,
                     std::span<const std::uint8_t> e_row);

}  // namespace sgen
