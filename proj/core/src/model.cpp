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

#include "sgen/model.hpp"

#include <cmath>

#include "sgen/checkpoint.hpp"
#include "sgen/synthgen.hpp"

namespace sgen {

using ad::Var;

void ModelConfig::validate() const {
  if (m < 1) throw Error(ErrorCode::kInvalidArgument, "m must be positive");
  sgn.validate();
  flow.validate();
  denoiser.validate();
  if (flow.latent_dim != sgn.latent_dim) throw Error(ErrorCode::kInvalidArgument, "flow and encoder latent dims differ");
  if (T < 2) throw Error(ErrorCode::kInvalidRange, "T must be at least 2");
}

NoiseSchedule ModelConfig::schedule() const {
  if (beta_start == 0.0 && beta_end == 0.0) return matched_schedule(T);
  return build_schedule(T, beta_start, beta_end);
}

ModelConfig compact_model_config(int m) {
  ModelConfig c;
  c.m = m;
  c.sgn.point_hidden = 64;
  c.sgn.feature_width = 64;
  c.sgn.gat_hidden = 64;
  c.sgn.latent_dim = 16;
  c.flow.latent_dim = 16;
  c.flow.hidden = 64;
  c.flow.steps = 16;
  c.denoiser.width = 128;
  c.denoiser.heads = 4;
  c.denoiser.time_dim = 32;
  c.denoiser.ffn = 256;
  return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"m", c.m},       {"sgn", c.sgn},   {"flow", c.flow},           {"denoiser", c.denoiser},
       {"T", c.T},       {"beta_start", c.beta_start}, {"beta_end", c.beta_end}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.m = j.value("m", c.m);
  if (j.contains("sgn")) c.sgn = j.at("sgn").get<SgnConfig>();
  if (j.contains("flow")) c.flow = j.at("flow").get<FlowConfig>();
  if (j.contains("denoiser")) c.denoiser = j.at("denoiser").get<DenoiserConfig>();
  c.T = j.value("T", c.T);
  c.beta_start = j.value("beta_start", c.beta_start);
  c.beta_end = j.value("beta_end", c.beta_end);
  // The flow always shares the encoder's latent size.
  if (!j.contains("flow") || !j.at("flow").contains("latent_dim")) c.flow.latent_dim = c.sgn.latent_dim;
}

namespace {

ParamStore<float> fresh_params(const ModelConfig& c, std::uint64_t seed) {
  ParamStore<float> store;
  Rng root(seed);
  Rng r1 = root.fork(1), r2 = root.fork(2), r3 = root.fork(3);
  register_sgn_params(store, c.sgn, c.m, r1);
  register_flow_params(store, c.flow, c.m, r2);
  register_denoiser_params(store, c.denoiser, c.m, c.sgn.latent_dim, r3);
  return store;
}

}  // namespace

GenerativeModel init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  return {config, config.schedule(), fresh_params(config, seed)};
}

void save_model(const std::filesystem::path& path, const GenerativeModel& model, const nlohmann::json& extra) {
  nlohmann::json meta = extra;
  meta["kind"] = "sgen-model";
  meta["config"] = model.config;
  meta["schedule"] = model.schedule;
  save_checkpoint(path, model.params, meta);
}

GenerativeModel model_from_checkpoint(const Checkpoint& ck) {
  if (!ck.meta.is_object() || ck.meta.value("kind", "") != "sgen-model" || !ck.meta.contains("config")) {
    throw Error(ErrorCode::kCheckpointMismatch, "checkpoint does not hold a generative model");
  }
  GenerativeModel model;
  try {
    model.config = ck.meta.at("config").get<ModelConfig>();
    model.schedule = ck.meta.contains("schedule") ? ck.meta.at("schedule").get<NoiseSchedule>()
                                                  : model.config.schedule();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCheckpointMismatch, std::string("model header: ") + e.what());
  }
  model.config.validate();
  if (model.schedule.T != model.config.T) throw Error(ErrorCode::kCheckpointMismatch, "schedule length differs from T");
  const ParamStore<float> expected = fresh_params(model.config, 0);
  if (expected.names().size() != ck.params.names().size()) {
    throw Error(ErrorCode::kCheckpointMismatch, "parameter count differs from config");
  }
  for (const auto& name : expected.names()) {
    if (!ck.params.contains(name)) throw Error(ErrorCode::kCheckpointMismatch, "missing parameter " + name);
    const auto& a = expected.at(name).value;
    const auto& b = ck.params.at(name).value;
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
      throw Error(ErrorCode::kCheckpointMismatch, "shape of " + name + " differs from config");
    }
  }
  model.params = ck.params;
  return model;
}

GenerativeModel load_model(const std::filesystem::path& path) { return model_from_checkpoint(load_checkpoint(path)); }

namespace {

MatrixF graph_existence(const BinaryVector& v) {
  MatrixF out(static_cast<Eigen::Index>(v.size()), 1);
  for (size_t j = 0; j < v.size(); ++j) out(static_cast<Eigen::Index>(j), 0) = v[j];
  return out;
}

void check_structure(const ModelConfig& c, const BinaryVector& existence, const BinaryMatrix& adjacency) {
  if (static_cast<int>(existence.size()) != c.m || adjacency.rows() != c.m || adjacency.cols() != c.m) {
    throw Error(ErrorCode::kCheckpointMismatch,
                "structure has " + std::to_string(existence.size()) + " parts, model expects " + std::to_string(c.m));
  }
  bool any = false;
  for (auto v : existence) any = any || v != 0;
  if (!any) throw Error(ErrorCode::kNoExistingPart, "structure has no existing part");
}

}  // namespace

MatrixD sample_prior_latents(const GenerativeModel& model, const BinaryVector& existence,
                             const BinaryMatrix& adjacency, Rng& rng) {
  const ModelConfig& c = model.config;
  check_structure(c, existence, adjacency);
  // No-grad tapes only read parameter values.
  auto& params = const_cast<ParamStore<float>&>(model.params);
  const MatrixF ex = graph_existence(existence);
  const MatrixF adj = adjacency.cast<float>();
  const MatrixF w = rng.gaussian<float>(c.m, c.sgn.latent_dim);
  MatrixD z(c.m, c.sgn.latent_dim);
  for (int j = 0; j < c.m; ++j) {
    ad::Tape<float> tape(false);
    auto f = mlp_dynamics(params, c.flow, j, part_condition(ex, adj, c.m, j));
    Var zj = integrate_inverse(tape, f, tape.constant(w.row(j)), c.flow.steps);
    z.row(j) = tape.value(zj).cast<double>();
  }
  return z;
}

ShapeRecord sample_shape(const GenerativeModel& model, const SampleRequest& req) {
  const ModelConfig& c = model.config;
  check_structure(c, req.existence, req.adjacency);
  StructureGraph graph;
  graph.existence = req.existence;
  graph.adjacency = req.adjacency;
  if (req.labels) {
    graph.labels = *req.labels;
  } else {
    if (req.points < 1) throw Error(ErrorCode::kInvalidArgument, "point count must be positive");
    graph.labels = default_segmentation(req.points, req.existence);
  }
  const Eigen::Index n = graph.labels.rows();
  if (n < 1) throw Error(ErrorCode::kEmptyCloud, "no points requested");
  if (auto err = validate_structuregraph(graph, n)) throw Error(*err, "invalid structure for sampling");

  Rng rng(req.seed);
  const MatrixD z = sample_prior_latents(model, req.existence, req.adjacency, rng);
  auto& params = const_cast<ParamStore<float>&>(model.params);
  const MatrixF labels = graph.labels.cast<float>();
  const std::vector<int> group(static_cast<size_t>(n), 0);
  MatrixF x = rng.gaussian<float>(n, 3);
  for (int t = model.schedule.T; t >= 1; --t) {
    ad::Tape<float> tape(false);
    Var tokens = context_tokens(tape, tape.constant(z.cast<float>()), graph_existence(req.existence),
                                MatrixF(req.adjacency.cast<float>()));
    const MatrixF temb = time_embedding(t, c.denoiser.time_dim).cast<float>().replicate(n, 1);
    Var pred = denoiser_forward(tape, params, c.denoiser, c.m, tape.constant(x), labels, tokens, temb, group);
    const MatrixF noise = t > 1 ? rng.gaussian<float>(n, 3) : MatrixF::Zero(n, 3);
    x = p_sample_step<float>(x, t, tape.value(pred), noise, model.schedule);
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kTrajectoryBound) {
      throw Error(ErrorCode::kNonfiniteState, "reverse diffusion diverged at t=" + std::to_string(t));
    }
  }
  ShapeRecord out;
  out.cloud.points = x;
  out.graph = std::move(graph);
  out.structure_code = code_for_structure(out.graph.existence, out.graph.adjacency).value_or("custom");
  out.shape_id = "sample-" + std::to_string(req.seed);
  return out;
}

}  // namespace sgen
