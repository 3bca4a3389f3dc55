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

#include "sgen/denoiser.hpp"

#include <cmath>

namespace sgen {

using ad::Var;

void DenoiserConfig::validate() const {
  if (layers < 1 || width < 1 || ffn < 1 || time_dim < 2) {
    throw Error(ErrorCode::kInvalidArgument, "denoiser sizes must be positive");
  }
  if (heads < 1 || width % heads != 0) throw Error(ErrorCode::kInvalidArgument, "heads must divide width");
}

void to_json(nlohmann::json& j, const DenoiserConfig& c) {
  j = {{"layers", c.layers}, {"width", c.width}, {"heads", c.heads}, {"time_dim", c.time_dim}, {"ffn", c.ffn}};
}

void from_json(const nlohmann::json& j, DenoiserConfig& c) {
  c.layers = j.value("layers", c.layers);
  c.width = j.value("width", c.width);
  c.heads = j.value("heads", c.heads);
  c.time_dim = j.value("time_dim", c.time_dim);
  c.ffn = j.value("ffn", c.ffn);
}

namespace {

template <typename T>
void register_norm(ParamStore<T>& store, const std::string& prefix, int width) {
  store.add(prefix + "/g", Matrix<T>::Ones(1, width));
  store.add(prefix + "/b", Matrix<T>::Zero(1, width));
}

template <typename T>
Var norm(ad::Tape<T>& tape, ParamStore<T>& store, const std::string& prefix, Var x) {
  return ad::add_row(tape, ad::mul_row(tape, ad::layer_norm(tape, x), tape.param(store, prefix + "/g")),
                     tape.param(store, prefix + "/b"));
}

std::string layer_prefix(int l) { return "ddpm/layer" + std::to_string(l); }

}  // namespace

template <typename T>
void register_denoiser_params(ParamStore<T>& store, const DenoiserConfig& c, int m, int latent_dim, Rng& rng,
                              bool zero_output) {
  c.validate();
  const int ctx = context_dim(latent_dim, m);
  ad::register_linear(store, "ddpm/in", 3 + m, c.width, rng);
  for (int l = 0; l < c.layers; ++l) {
    const std::string p = layer_prefix(l);
    register_norm(store, p + "/ln1", c.width);
    ad::register_linear(store, p + "/q", c.width, c.width, rng, false);
    ad::register_linear(store, p + "/k", ctx, c.width, rng, false);
    ad::register_linear(store, p + "/v", ctx, c.width, rng, false);
    ad::register_linear(store, p + "/vt", c.time_dim, c.width, rng, false);
    ad::register_linear(store, p + "/o", c.width, c.width, rng);
    register_norm(store, p + "/ln2", c.width);
    ad::register_linear(store, p + "/ffn1", c.width, c.ffn, rng);
    ad::register_linear(store, p + "/ffn2", c.ffn, c.width, rng);
  }
  register_norm(store, "ddpm/ln_out", c.width);
  ad::register_linear(store, "ddpm/out", c.width, 3, rng, true, zero_output ? 0.0 : 1.0);
}

template <typename T>
Var context_tokens(ad::Tape<T>& tape, Var z, const Matrix<T>& existence, const Matrix<T>& adjacency) {
  return ad::concat_cols(tape, {z, tape.constant(existence), tape.constant(adjacency)});
}

template <typename T>
Matrix<T> time_embedding_rows(const std::vector<int>& steps, int dim) {
  Matrix<T> out(static_cast<Eigen::Index>(steps.size()), dim);
  // Steps repeat heavily within a batch; embed each distinct value once.
  std::vector<std::pair<int, Eigen::RowVectorXd>> cache;
  for (size_t i = 0; i < steps.size(); ++i) {
    const Eigen::RowVectorXd* row = nullptr;
    for (const auto& [t, e] : cache) {
      if (t == steps[i]) row = &e;
    }
    if (row == nullptr) {
      cache.emplace_back(steps[i], time_embedding(steps[i], dim));
      row = &cache.back().second;
    }
    out.row(static_cast<Eigen::Index>(i)) = row->cast<T>();
  }
  return out;
}

template <typename T>
Var attention_block(ad::Tape<T>& tape, ParamStore<T>& store, const DenoiserConfig& c, const std::string& p,
                    Var normed, Var tokens, const Matrix<T>& time_emb, const std::vector<int>& group, int m) {
  Var q = ad::linear(tape, store, p + "/q", normed);
  Var k = ad::linear(tape, store, p + "/k", tokens);
  Var v = ad::linear(tape, store, p + "/v", tokens);
  Var att = ad::cross_attention(tape, q, k, v, group, m, c.heads);
  return ad::add(tape, att, ad::linear(tape, store, p + "/vt", tape.constant(time_emb)));
}

template <typename T>
Var cross_attention_layer(ad::Tape<T>& tape, ParamStore<T>& store, const DenoiserConfig& c, const std::string& p,
                          Var x, Var tokens, const Matrix<T>& time_emb, const std::vector<int>& group, int m) {
  Var att = attention_block(tape, store, c, p, norm(tape, store, p + "/ln1", x), tokens, time_emb, group, m);
  x = ad::add(tape, x, ad::linear(tape, store, p + "/o", att));
  Var f = ad::silu(tape, ad::linear(tape, store, p + "/ffn1", norm(tape, store, p + "/ln2", x)));
  return ad::add(tape, x, ad::linear(tape, store, p + "/ffn2", f));
}

template <typename T>
Var denoiser_forward(ad::Tape<T>& tape, ParamStore<T>& store, const DenoiserConfig& c, int m, Var x_t,
                     const Matrix<T>& labels, Var tokens, const Matrix<T>& time_emb, const std::vector<int>& group) {
  Var x = ad::linear(tape, store, "ddpm/in", ad::concat_cols(tape, {x_t, tape.constant(labels)}));
  for (int l = 0; l < c.layers; ++l) {
    x = cross_attention_layer(tape, store, c, layer_prefix(l), x, tokens, time_emb, group, m);
  }
  return ad::linear(tape, store, "ddpm/out", norm(tape, store, "ddpm/ln_out", x));
}

template <typename T>
Var noise_prediction_loss(ad::Tape<T>& tape, Var prediction, const Matrix<T>& eps) {
  const T n = static_cast<T>(eps.rows());
  return ad::scale(tape, ad::sum(tape, ad::square(tape, ad::sub(tape, prediction, tape.constant(eps)))), T(1) / n);
}

template <typename T>
Var diffusion_loss(ad::Tape<T>& tape, ParamStore<T>& store, const DenoiserConfig& c, const NoiseSchedule& schedule,
                   int m, const DiffusionBatch<T>& batch, Var tokens) {
  const Eigen::Index n = batch.x0.rows();
  Matrix<T> xt(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int t = batch.t[static_cast<size_t>(i)];
    if (t < 1 || t > schedule.T) throw Error(ErrorCode::kInvalidRange, "t outside 1..T");
    xt.row(i) = static_cast<T>(std::sqrt(schedule.alpha_bar[t])) * batch.x0.row(i) +
                static_cast<T>(std::sqrt(1.0 - schedule.alpha_bar[t])) * batch.eps.row(i);
  }
  const Matrix<T> temb = time_embedding_rows<T>(batch.t, c.time_dim);
  Var pred = denoiser_forward(tape, store, c, m, tape.constant(std::move(xt)), batch.labels, tokens, temb, batch.group);
  return noise_prediction_loss(tape, pred, batch.eps);
}

#define SGEN_INSTANTIATE(T)                                                                                      \
  template void register_denoiser_params<T>(ParamStore<T>&, const DenoiserConfig&, int, int, Rng&, bool);      \
  template Var context_tokens<T>(ad::Tape<T>&, Var, const Matrix<T>&, const Matrix<T>&);                       \
  template Matrix<T> time_embedding_rows<T>(const std::vector<int>&, int);                                     \
  template Var attention_block<T>(ad::Tape<T>&, ParamStore<T>&, const DenoiserConfig&, const std::string&, Var, \
                                  Var, const Matrix<T>&, const std::vector<int>&, int);                        \
  template Var cross_attention_layer<T>(ad::Tape<T>&, ParamStore<T>&, const DenoiserConfig&, const std::string&, \
                                        Var, Var, const Matrix<T>&, const std::vector<int>&, int);             \
  template Var denoiser_forward<T>(ad::Tape<T>&, ParamStore<T>&, const DenoiserConfig&, int, Var,              \
                                   const Matrix<T>&, Var, const Matrix<T>&, const std::vector<int>&);          \
  template Var noise_prediction_loss<T>(ad::Tape<T>&, Var, const Matrix<T>&);                                  \
  template Var diffusion_loss<T>(ad::Tape<T>&, ParamStore<T>&, const DenoiserConfig&, const NoiseSchedule&, int, \
                                 const DiffusionBatch<T>&, Var);

SGEN_INSTANTIATE(float)
SGEN_INSTANTIATE(double)

}  // namespace sgen
