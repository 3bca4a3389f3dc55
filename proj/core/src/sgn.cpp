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

#include "sgen/sgn.hpp"

namespace sgen {

using ad::Var;

void SgnConfig::validate() const {
  if (latent_dim < 1) throw Error(ErrorCode::kInvalidArgument, "latent_dim must be >= 1");
  if (gat_heads < 1 || gat_hidden % gat_heads != 0) {
    throw Error(ErrorCode::kInvalidArgument, "gat_heads must divide gat_hidden");
  }
  if (point_hidden < 1 || feature_width < 1 || gat_layers < 1) {
    throw Error(ErrorCode::kInvalidArgument, "encoder widths must be positive");
  }
}

void to_json(nlohmann::json& j, const SgnConfig& c) {
  j = {{"point_hidden", c.point_hidden}, {"feature_width", c.feature_width}, {"gat_layers", c.gat_layers},
       {"gat_heads", c.gat_heads},       {"gat_hidden", c.gat_hidden},       {"latent_dim", c.latent_dim}};
}

void from_json(const nlohmann::json& j, SgnConfig& c) {
  c.point_hidden = j.value("point_hidden", c.point_hidden);
  c.feature_width = j.value("feature_width", c.feature_width);
  c.gat_layers = j.value("gat_layers", c.gat_layers);
  c.gat_heads = j.value("gat_heads", c.gat_heads);
  c.gat_hidden = j.value("gat_hidden", c.gat_hidden);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
}

template <typename T>
void register_sgn_params(ParamStore<T>& store, const SgnConfig& c, int m, Rng& rng) {
  c.validate();
  ad::register_linear(store, "sgn/point/l0", 3, c.point_hidden, rng);
  ad::register_linear(store, "sgn/point/l1", c.point_hidden, c.point_hidden, rng);
  ad::register_linear(store, "sgn/point/l2", c.point_hidden, c.feature_width, rng);
  int in = c.feature_width + m + 1;
  for (int l = 0; l < c.gat_layers; ++l) {
    const std::string p = "sgn/gat" + std::to_string(l);
    store.add(p + "/w", glorot<T>(in, c.gat_hidden, rng));
    store.add(p + "/a_src", glorot<T>(1, c.gat_hidden, rng, 0.5));
    store.add(p + "/a_dst", glorot<T>(1, c.gat_hidden, rng, 0.5));
    in = c.gat_hidden;
  }
  ad::register_linear(store, "sgn/mu", c.gat_hidden, c.latent_dim, rng);
  ad::register_linear(store, "sgn/log_sigma", c.gat_hidden, c.latent_dim, rng, true, 0.1);
}

template <typename T>
GraphBatch<T> GraphBatch<T>::from(std::span<const PointCloud* const> clouds,
                                  std::span<const StructureGraph* const> graphs) {
  GraphBatch<T> b;
  b.shapes = static_cast<int>(clouds.size());
  b.m = graphs.empty() ? 0 : graphs[0]->part_count();
  Eigen::Index total = 0;
  for (const auto* c : clouds) total += c->size();
  b.points.resize(total, 3);
  b.labels = Matrix<T>::Zero(total, b.m);
  b.existence = Matrix<T>::Zero(static_cast<Eigen::Index>(b.shapes) * b.m, 1);
  b.adjacency = Matrix<T>::Zero(static_cast<Eigen::Index>(b.shapes) * b.m, b.m);
  Eigen::Index row = 0;
  for (int s = 0; s < b.shapes; ++s) {
    const auto& cloud = *clouds[static_cast<size_t>(s)];
    const auto& graph = *graphs[static_cast<size_t>(s)];
    if (graph.part_count() != b.m) throw Error(ErrorCode::kInvalidArgument, "mixed part counts in batch");
    if (auto bad = validate_structuregraph(graph, cloud.size())) throw Error(*bad, "batch shape " + std::to_string(s));
    const auto idx = label_indices(graph.labels);
    for (Eigen::Index i = 0; i < cloud.size(); ++i, ++row) {
      b.points.row(row) = cloud.points.row(i).template cast<T>();
      b.labels(row, idx[static_cast<size_t>(i)]) = T(1);
      b.point_shape.push_back(s);
      b.point_segment.push_back(s * b.m + idx[static_cast<size_t>(i)]);
    }
    for (int j = 0; j < b.m; ++j) {
      b.existence(s * b.m + j, 0) = static_cast<T>(graph.existence[static_cast<size_t>(j)]);
      for (int k = 0; k < b.m; ++k) b.adjacency(s * b.m + j, k) = static_cast<T>(graph.adjacency(j, k));
    }
  }
  return b;
}

template <typename T>
GraphBatch<T> GraphBatch<T>::from(const PointCloud& cloud, const StructureGraph& graph) {
  const PointCloud* c[] = {&cloud};
  const StructureGraph* g[] = {&graph};
  return from(std::span<const PointCloud* const>(c), std::span<const StructureGraph* const>(g));
}

template <typename T>
Var pointwise_encoder(ad::Tape<T>& tape, ParamStore<T>& store, Var points) {
  Var h = ad::silu(tape, ad::linear(tape, store, "sgn/point/l0", points));
  h = ad::silu(tape, ad::linear(tape, store, "sgn/point/l1", h));
  return ad::linear(tape, store, "sgn/point/l2", h);
}

template <typename T>
Var part_pool(ad::Tape<T>& tape, Var features, const GraphBatch<T>& batch) {
  return ad::segment_mean(tape, features, batch.point_segment, batch.shapes * batch.m);
}

template <typename T>
Matrix<T> attention_mask(const Matrix<T>& existence, const Matrix<T>& adjacency, int m) {
  Matrix<T> mask = Matrix<T>::Zero(existence.rows(), m);
  for (Eigen::Index r = 0; r < existence.rows(); ++r) {
    if (existence(r, 0) == T(0)) continue;
    const Eigen::Index base = (r / m) * m;
    const int self = static_cast<int>(r % m);
    for (int j = 0; j < m; ++j) {
      if (existence(base + j, 0) == T(0)) continue;
      if (j == self || adjacency(r, j) != T(0)) mask(r, j) = T(1);
    }
  }
  return mask;
}

template <typename T>
Var gat_layer(ad::Tape<T>& tape, ParamStore<T>& store, const std::string& prefix, Var nodes, const Matrix<T>& mask,
              int m, int heads) {
  Var wh = ad::matmul(tape, nodes, tape.param(store, prefix + "/w"));
  Var att = ad::graph_attention(tape, wh, tape.param(store, prefix + "/a_src"), tape.param(store, prefix + "/a_dst"),
                                mask, m, heads, static_cast<T>(kGatSlope));
  return ad::elu(tape, att);
}

template <typename T>
Var sgn_node_features(ad::Tape<T>& tape, ParamStore<T>& store, const SgnConfig& config, const GraphBatch<T>& batch) {
  const int m = batch.m;
  Var pts = tape.constant(batch.points);
  Var pooled = part_pool(tape, pointwise_encoder(tape, store, pts), batch);
  Matrix<T> ident = Matrix<T>::Zero(static_cast<Eigen::Index>(batch.shapes) * m, m);
  for (Eigen::Index r = 0; r < ident.rows(); ++r) ident(r, r % m) = T(1);
  Var nodes = ad::concat_cols(tape, {pooled, tape.constant(std::move(ident)), tape.constant(batch.existence)});
  const Matrix<T> mask = attention_mask(batch.existence, batch.adjacency, m);
  for (int l = 0; l < config.gat_layers; ++l) {
    nodes = gat_layer(tape, store, "sgn/gat" + std::to_string(l), nodes, mask, m, config.gat_heads);
  }
  return nodes;
}

template <typename T>
Var reparameterize(ad::Tape<T>& tape, Var mu, Var sigma, Var eps) {
  return ad::add(tape, mu, ad::mul(tape, sigma, eps));
}

template <typename T>
PosteriorVars<T> sgn_forward(ad::Tape<T>& tape, ParamStore<T>& store, const SgnConfig& config,
                             const GraphBatch<T>& batch, Var eps) {
  Var nodes = sgn_node_features(tape, store, config, batch);
  Var v = tape.constant(batch.existence);
  PosteriorVars<T> out;
  out.mu = ad::mul_col(tape, ad::linear(tape, store, "sgn/mu", nodes), v);
  Var raw = ad::clamp(tape, ad::linear(tape, store, "sgn/log_sigma", nodes), static_cast<T>(kLogSigmaMin),
                      static_cast<T>(kLogSigmaMax));
  out.log_sigma = ad::mul_col(tape, raw, v);
  out.sigma = ad::exp(tape, out.log_sigma);
  out.z = reparameterize(tape, out.mu, out.sigma, eps);
  return out;
}

template <typename T>
PosteriorOutput encode_shape(ParamStore<T>& store, const SgnConfig& config, const PointCloud& cloud,
                             const StructureGraph& graph, const MatrixD& eps) {
  ad::Tape<T> tape(false);
  const auto batch = GraphBatch<T>::from(cloud, graph);
  auto post = sgn_forward(tape, store, config, batch, tape.constant(eps.cast<T>()));
  return {tape.value(post.mu).template cast<double>(), tape.value(post.sigma).template cast<double>(),
          tape.value(post.z).template cast<double>()};
}

#define SGEN_INSTANTIATE(T)                                                                                      \
  template void register_sgn_params<T>(ParamStore<T>&, const SgnConfig&, int, Rng&);                           \
  template struct GraphBatch<T>;                                                                               \
  template Var pointwise_encoder<T>(ad::Tape<T>&, ParamStore<T>&, Var);                                        \
  template Var part_pool<T>(ad::Tape<T>&, Var, const GraphBatch<T>&);                                          \
  template Matrix<T> attention_mask<T>(const Matrix<T>&, const Matrix<T>&, int);                               \
  template Var gat_layer<T>(ad::Tape<T>&, ParamStore<T>&, const std::string&, Var, const Matrix<T>&, int, int); \
  template Var reparameterize<T>(ad::Tape<T>&, Var, Var, Var);                                                 \
  template Var sgn_node_features<T>(ad::Tape<T>&, ParamStore<T>&, const SgnConfig&, const GraphBatch<T>&);     \
  template PosteriorVars<T> sgn_forward<T>(ad::Tape<T>&, ParamStore<T>&, const SgnConfig&, const GraphBatch<T>&, \
                                           Var);                                                               \
  template PosteriorOutput encode_shape<T>(ParamStore<T>&, const SgnConfig&, const PointCloud&,                \
                                           const StructureGraph&, const MatrixD&);

SGEN_INSTANTIATE(float)
SGEN_INSTANTIATE(double)

}  // namespace sgen
