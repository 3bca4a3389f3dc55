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

#include "sgen/ccnf.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace sgen {

using ad::Var;

void FlowConfig::validate() const {
  if (latent_dim < 1) throw Error(ErrorCode::kInvalidArgument, "latent_dim must be >= 1");
  if (steps < 8) throw Error(ErrorCode::kInvalidArgument, "flow steps must be >= 8");
  if (hidden < 1 || hidden_layers < 1) throw Error(ErrorCode::kInvalidArgument, "flow widths must be positive");
}

void to_json(nlohmann::json& j, const FlowConfig& c) {
  j = {{"latent_dim", c.latent_dim}, {"hidden", c.hidden}, {"hidden_layers", c.hidden_layers}, {"steps", c.steps}};
}

void from_json(const nlohmann::json& j, FlowConfig& c) {
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
  c.steps = j.value("steps", c.steps);
}

namespace {

std::string part_prefix(int part) { return "ccnf/part" + std::to_string(part); }

template <typename T>
void check_finite(const ad::Tape<T>& tape, Var v, const char* what) {
  if (!tape.value(v).allFinite()) throw Error(ErrorCode::kNonfiniteState, what);
}

}  // namespace

template <typename T>
void register_flow_params(ParamStore<T>& store, const FlowConfig& c, int m, Rng& rng) {
  c.validate();
  for (int j = 0; j < m; ++j) {
    const std::string p = part_prefix(j);
    // First layer split into the z block and the (t, condition) block so the
    // tangent pass can reuse the z block directly.
    store.add(p + "/l0/wz", glorot<T>(c.latent_dim + 2 + m, c.hidden, rng).topRows(c.latent_dim));
    store.add(p + "/l0/wc", glorot<T>(c.latent_dim + 2 + m, c.hidden, rng).topRows(2 + m));
    store.add(p + "/l0/b", Matrix<T>::Zero(1, c.hidden));
    for (int l = 1; l < c.hidden_layers; ++l) {
      ad::register_linear(store, p + "/l" + std::to_string(l), c.hidden, c.hidden, rng);
    }
    ad::register_linear(store, p + "/out", c.hidden, c.latent_dim, rng, true, 0.1);
  }
}

template <typename T>
Dynamics<T> mlp_dynamics(ParamStore<T>& store, const FlowConfig& config, int part, Matrix<T> condition) {
  const std::string p = part_prefix(part);
  return [&store, config, p, condition = std::move(condition)](ad::Tape<T>& tape, Var z, T t, bool with_trace) {
    const Eigen::Index rows = condition.rows();
    const Eigen::Index d = config.latent_dim;
    Matrix<T> tc(rows, condition.cols() + 1);
    tc.col(0).setConstant(t);
    tc.rightCols(condition.cols()) = condition;
    Var wz = tape.param(store, p + "/l0/wz");
    Var a = ad::add_row(tape,
                        ad::add(tape, ad::matmul(tape, z, wz),
                                ad::matmul(tape, tape.constant(std::move(tc)), tape.param(store, p + "/l0/wc"))),
                        tape.param(store, p + "/l0/b"));
    Var h = ad::tanh(tape, a);
    auto slope = [&](Var act) {
      return ad::add_scalar(tape, ad::scale(tape, ad::square(tape, act), T(-1)), T(1));
    };
    // Tangent rows b*d + k hold dh_b/dz_k.
    Var tangent;
    if (with_trace) tangent = ad::mul(tape, ad::tile_rows(tape, wz, rows), ad::repeat_rows(tape, slope(h), d));
    for (int l = 1; l < config.hidden_layers; ++l) {
      const std::string lp = p + "/l" + std::to_string(l);
      h = ad::tanh(tape, ad::linear(tape, store, lp, h));
      if (with_trace) {
        tangent = ad::mul(tape, ad::matmul(tape, tangent, tape.param(store, lp + "/w")),
                          ad::repeat_rows(tape, slope(h), d));
      }
    }
    DynamicsEval<T> out;
    out.dz = ad::linear(tape, store, p + "/out", h);
    if (with_trace) out.trace = ad::block_trace(tape, ad::matmul(tape, tangent, tape.param(store, p + "/out/w")), d);
    return out;
  };
}

template <typename T>
Dynamics<T> linear_dynamics(T a) {
  return [a](ad::Tape<T>& tape, Var z, T, bool with_trace) {
    DynamicsEval<T> out;
    out.dz = ad::scale(tape, z, a);
    if (with_trace) {
      const auto& zv = tape.value(z);
      out.trace = tape.constant(Matrix<T>::Constant(zv.rows(), 1, a * static_cast<T>(zv.cols())));
    }
    return out;
  };
}

template <typename T>
FlowVars<T> integrate_forward(ad::Tape<T>& tape, const Dynamics<T>& f, Var z, int steps, bool with_logdet) {
  if (steps < 1) throw Error(ErrorCode::kInvalidArgument, "integration steps must be positive");
  const T h = T(1) / static_cast<T>(steps);
  Var logdet = tape.constant(Matrix<T>::Zero(tape.value(z).rows(), 1));
  for (int n = 0; n < steps; ++n) {
    const T t = static_cast<T>(n) * h;
    auto e1 = f(tape, z, t, with_logdet);
    auto e2 = f(tape, ad::add(tape, z, ad::scale(tape, e1.dz, h / 2)), t + h / 2, with_logdet);
    auto e3 = f(tape, ad::add(tape, z, ad::scale(tape, e2.dz, h / 2)), t + h / 2, with_logdet);
    auto e4 = f(tape, ad::add(tape, z, ad::scale(tape, e3.dz, h)), t + h, with_logdet);
    Var incr = ad::add(tape, ad::add(tape, e1.dz, e4.dz), ad::scale(tape, ad::add(tape, e2.dz, e3.dz), T(2)));
    z = ad::add(tape, z, ad::scale(tape, incr, h / 6));
    check_finite(tape, z, "flow state");
    if (with_logdet) {
      Var tr = ad::add(tape, ad::add(tape, e1.trace, e4.trace), ad::scale(tape, ad::add(tape, e2.trace, e3.trace), T(2)));
      logdet = ad::sub(tape, logdet, ad::scale(tape, tr, h / 6));
      check_finite(tape, logdet, "flow log-determinant");
    }
  }
  return {z, logdet};
}

template <typename T>
Var integrate_inverse(ad::Tape<T>& tape, const Dynamics<T>& f, Var w, int steps) {
  if (steps < 1) throw Error(ErrorCode::kInvalidArgument, "integration steps must be positive");
  const T h = T(-1) / static_cast<T>(steps);
  for (int n = 0; n < steps; ++n) {
    const T t = T(1) + static_cast<T>(n) * h;
    auto e1 = f(tape, w, t, false);
    auto e2 = f(tape, ad::add(tape, w, ad::scale(tape, e1.dz, h / 2)), t + h / 2, false);
    auto e3 = f(tape, ad::add(tape, w, ad::scale(tape, e2.dz, h / 2)), t + h / 2, false);
    auto e4 = f(tape, ad::add(tape, w, ad::scale(tape, e3.dz, h)), t + h, false);
    Var incr = ad::add(tape, ad::add(tape, e1.dz, e4.dz), ad::scale(tape, ad::add(tape, e2.dz, e3.dz), T(2)));
    w = ad::add(tape, w, ad::scale(tape, incr, h / 6));
    check_finite(tape, w, "flow state");
  }
  return w;
}

template <typename T>
Var log_prob(ad::Tape<T>& tape, const Dynamics<T>& f, Var z, int steps) {
  auto fw = integrate_forward(tape, f, z, steps, true);
  const T d = static_cast<T>(tape.value(z).cols());
  Var quad = ad::scale(tape, ad::row_sum(tape, ad::square(tape, fw.w)), T(-0.5));
  Var lp = ad::add_scalar(tape, quad, static_cast<T>(-0.5 * std::log(2.0 * std::numbers::pi)) * d);
  return ad::sub(tape, lp, fw.delta_logdet);
}

template <typename T>
Matrix<T> part_condition(const Matrix<T>& existence, const Matrix<T>& adjacency, int m, int part) {
  const Eigen::Index shapes = existence.rows() / m;
  Matrix<T> cond(shapes, m + 1);
  for (Eigen::Index b = 0; b < shapes; ++b) {
    cond(b, 0) = existence(b * m + part, 0);
    cond.row(b).tail(m) = adjacency.row(b * m + part);
  }
  return cond;
}

template <typename T>
PriorLossVars<T> prior_loss(ad::Tape<T>& tape, const DynamicsFactory<T>& dynamics, int steps,
                            const PosteriorVars<T>& posterior, const GraphBatch<T>& batch) {
  const int m = batch.m;
  const T d = static_cast<T>(tape.value(posterior.z).cols());
  const T half_log_2pie = static_cast<T>(0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e));
  PriorLossVars<T> out;
  Var total;
  for (int j = 0; j < m; ++j) {
    std::vector<int> rows(static_cast<size_t>(batch.shapes));
    for (int b = 0; b < batch.shapes; ++b) rows[static_cast<size_t>(b)] = b * m + j;
    Var zj = ad::gather_rows(tape, posterior.z, rows);
    auto f = dynamics(j, part_condition(batch.existence, batch.adjacency, m, j));
    Var cross = ad::scale(tape, ad::mean(tape, log_prob(tape, f, zj, steps)), T(-1));
    Var ent = ad::add_scalar(tape, ad::mean(tape, ad::row_sum(tape, ad::gather_rows(tape, posterior.log_sigma, rows))),
                             d * half_log_2pie);
    out.cross_entropy.push_back(cross);
    out.entropy.push_back(ent);
    Var term = ad::sub(tape, cross, ent);
    total = total.valid() ? ad::add(tape, total, term) : term;
  }
  out.total = total;
  return out;
}

template <typename T>
PriorLossVars<T> prior_loss(ad::Tape<T>& tape, ParamStore<T>& store, const FlowConfig& config,
                            const PosteriorVars<T>& posterior, const GraphBatch<T>& batch) {
  DynamicsFactory<T> factory = [&store, &config](int part, const Matrix<T>& cond) {
    return mlp_dynamics(store, config, part, cond);
  };
  return prior_loss(tape, factory, config.steps, posterior, batch);
}

template <typename T>
PriorLossReport prior_loss_report(const ad::Tape<T>& tape, const PriorLossVars<T>& vars) {
  PriorLossReport r;
  for (Var v : vars.cross_entropy) r.cross_entropy.push_back(static_cast<double>(tape.scalar(v)));
  for (Var v : vars.entropy) r.entropy.push_back(static_cast<double>(tape.scalar(v)));
  r.total = static_cast<double>(tape.scalar(vars.total));
  return r;
}

double gaussian_entropy(const Eigen::VectorXd& log_sigma) {
  return static_cast<double>(log_sigma.size()) * 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e) +
         log_sigma.sum();
}

namespace {

template <typename T>
Matrix<T> single_condition(int v_j, std::span<const std::uint8_t> e_row) {
  Matrix<T> cond(1, static_cast<Eigen::Index>(e_row.size()) + 1);
  cond(0, 0) = static_cast<T>(v_j);
  for (size_t k = 0; k < e_row.size(); ++k) cond(0, static_cast<Eigen::Index>(k) + 1) = static_cast<T>(e_row[k]);
  return cond;
}

template <typename T>
Matrix<T> as_row(const Eigen::VectorXd& v) {
  return v.transpose().cast<T>();
}

}  // namespace

template <typename T>
FlowResult flow_forward(ParamStore<T>& store, const FlowConfig& config, int part, const Eigen::VectorXd& z, int v_j,
                        std::span<const std::uint8_t> e_row) {
  ad::Tape<T> tape(false);
  auto f = mlp_dynamics(store, config, part, single_condition<T>(v_j, e_row));
  auto out = integrate_forward(tape, f, tape.constant(as_row<T>(z)), config.steps, true);
  return {tape.value(out.w).row(0).transpose().template cast<double>(),
          static_cast<double>(tape.scalar(out.delta_logdet))};
}

template <typename T>
Eigen::VectorXd flow_inverse(ParamStore<T>& store, const FlowConfig& config, int part, const Eigen::VectorXd& w,
                             int v_j, std::span<const std::uint8_t> e_row) {
  ad::Tape<T> tape(false);
  auto f = mlp_dynamics(store, config, part, single_condition<T>(v_j, e_row));
  Var z = integrate_inverse(tape, f, tape.constant(as_row<T>(w)), config.steps);
  return tape.value(z).row(0).transpose().template cast<double>();
}

template <typename T>
double flow_log_prob(ParamStore<T>& store, const FlowConfig& config, int part, const Eigen::VectorXd& z, int v_j,
                     std::span<const std::uint8_t> e_row) {
  ad::Tape<T> tape(false);
  auto f = mlp_dynamics(store, config, part, single_condition<T>(v_j, e_row));
  return static_cast<double>(tape.scalar(log_prob(tape, f, tape.constant(as_row<T>(z)), config.steps)));
}

#define SGEN_INSTANTIATE(T)                                                                                        \
  template void register_flow_params<T>(ParamStore<T>&, const FlowConfig&, int, Rng&);                           \
  template Dynamics<T> mlp_dynamics<T>(ParamStore<T>&, const FlowConfig&, int, Matrix<T>);                       \
  template Dynamics<T> linear_dynamics<T>(T);                                                                    \
  template FlowVars<T> integrate_forward<T>(ad::Tape<T>&, const Dynamics<T>&, Var, int, bool);                   \
  template Var integrate_inverse<T>(ad::Tape<T>&, const Dynamics<T>&, Var, int);                                 \
  template Var log_prob<T>(ad::Tape<T>&, const Dynamics<T>&, Var, int);                                          \
  template Matrix<T> part_condition<T>(const Matrix<T>&, const Matrix<T>&, int, int);                            \
  template PriorLossVars<T> prior_loss<T>(ad::Tape<T>&, const DynamicsFactory<T>&, int, const PosteriorVars<T>&, \
                                          const GraphBatch<T>&);                                                 \
  template PriorLossVars<T> prior_loss<T>(ad::Tape<T>&, ParamStore<T>&, const FlowConfig&,                       \
                                          const PosteriorVars<T>&, const GraphBatch<T>&);                        \
  template PriorLossReport prior_loss_report<T>(const ad::Tape<T>&, const PriorLossVars<T>&);                    \
  template FlowResult flow_forward<T>(ParamStore<T>&, const FlowConfig&, int, const Eigen::VectorXd&, int,       \
                                      std::span<const std::uint8_t>);                                            \
  template Eigen::VectorXd flow_inverse<T>(ParamStore<T>&, const FlowConfig&, int, const Eigen::VectorXd&, int,  \
                                           std::span<const std::uint8_t>);                                       \
  template double flow_log_prob<T>(ParamStore<T>&, const FlowConfig&, int, const Eigen::VectorXd&, int,          \
                                   std::span<const std::uint8_t>);

SGEN_INSTANTIATE(float)
SGEN_INSTANTIATE(double)

}  // namespace sgen
