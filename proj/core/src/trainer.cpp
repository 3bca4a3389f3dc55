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

#include "sgen/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "sgen/checkpoint.hpp"

namespace sgen {

using ad::Var;

void TrainConfig::validate() const {
  if (!(lambda > 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be positive");
  if (batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch size must be at least 1");
  if (iterations < 1) throw Error(ErrorCode::kInvalidArgument, "iterations must be at least 1");
  if (!(lr > 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning rate must be positive");
  if (checkpoint_every < 0 || log_every < 1 || diffusion_points < 0 || clip_norm < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "negative cadence or budget");
  }
  model.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lambda", c.lambda},
       {"batch_size", c.batch_size},
       {"lr", c.lr},
       {"iterations", c.iterations},
       {"model", c.model},
       {"seed", c.seed},
       {"checkpoint_every", c.checkpoint_every},
       {"log_every", c.log_every},
       {"clip_norm", c.clip_norm},
       {"diffusion_points", c.diffusion_points},
       {"staged", c.staged}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.lambda = j.value("lambda", c.lambda);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.iterations = j.value("iterations", c.iterations);
  if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.log_every = j.value("log_every", c.log_every);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.diffusion_points = j.value("diffusion_points", c.diffusion_points);
  c.staged = j.value("staged", c.staged);
}

void to_json(nlohmann::json& j, const RunManifest& r) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : r.curve) {
    curve.push_back({{"step", p.step}, {"prior", p.prior}, {"diffusion", p.diffusion}, {"total", p.total}});
  }
  j = {{"config_hash", r.config_hash},
       {"dataset_hash", r.dataset_hash},
       {"checkpoint", r.checkpoint},
       {"curve", curve},
       {"wall_seconds", r.wall_seconds}};
}

void from_json(const nlohmann::json& j, RunManifest& r) {
  r.config_hash = j.at("config_hash").get<std::string>();
  r.dataset_hash = j.at("dataset_hash").get<std::string>();
  r.checkpoint = j.at("checkpoint").get<std::string>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.curve.clear();
  for (const auto& p : j.at("curve")) {
    r.curve.push_back({p.at("step").get<std::int64_t>(), p.at("prior").get<double>(), p.at("diffusion").get<double>(),
                       p.at("total").get<double>()});
  }
}

namespace {

struct Fnv {
  std::uint64_t h = 1469598103934665603ull;
  void feed(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

}  // namespace

std::string config_hash(const TrainConfig& config) {
  const std::string text = nlohmann::json(config).dump();
  Fnv f;
  f.feed(text.data(), text.size());
  return f.hex();
}

std::string dataset_hash(std::span<const ShapeRecord> records) {
  Fnv f;
  for (const auto& r : records) {
    const auto blob = encode_blob(r);
    f.feed(blob.data(), blob.size());
    f.feed(r.shape_id.data(), r.shape_id.size());
  }
  return f.hex();
}

template <typename T>
TotalLossVars<T> total_loss(ad::Tape<T>& tape, ParamStore<T>& store, const ModelConfig& c,
                            const NoiseSchedule& schedule, std::span<const ShapeRecord* const> batch, double lambda,
                            Rng& rng, int diffusion_points) {
  std::vector<const PointCloud*> clouds;
  std::vector<const StructureGraph*> graphs;
  for (const ShapeRecord* r : batch) {
    clouds.push_back(&r->cloud);
    graphs.push_back(&r->graph);
  }
  const auto gb = GraphBatch<T>::from(clouds, graphs);
  if (gb.m != c.m) throw Error(ErrorCode::kCheckpointMismatch, "batch part count differs from model");
  const Eigen::Index nodes = static_cast<Eigen::Index>(batch.size()) * c.m;
  Var eps_post = tape.constant(rng.gaussian<T>(nodes, c.sgn.latent_dim));
  auto post = sgn_forward(tape, store, c.sgn, gb, eps_post);
  Var prior = prior_loss(tape, store, c.flow, post, gb).total;

  // Points entering the diffusion term, optionally a random subset per shape.
  std::vector<Eigen::Index> rows;
  Eigen::Index offset = 0;
  for (const ShapeRecord* r : batch) {
    const Eigen::Index n = r->cloud.size();
    std::vector<Eigen::Index> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), offset);
    if (diffusion_points > 0 && diffusion_points < n) {
      for (int i = 0; i < diffusion_points; ++i) {
        const int k = rng.uniform_int(i, static_cast<int>(n) - 1);
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(k)]);
      }
      idx.resize(static_cast<size_t>(diffusion_points));
      std::sort(idx.begin(), idx.end());
    }
    rows.insert(rows.end(), idx.begin(), idx.end());
    offset += n;
  }
  const Eigen::Index count = static_cast<Eigen::Index>(rows.size());
  DiffusionBatch<T> db;
  db.x0.resize(count, 3);
  db.labels.resize(count, c.m);
  db.group.resize(static_cast<size_t>(count));
  db.t.resize(static_cast<size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) {
    const Eigen::Index src = rows[static_cast<size_t>(i)];
    db.x0.row(i) = gb.points.row(src);
    db.labels.row(i) = gb.labels.row(src);
    db.group[static_cast<size_t>(i)] = gb.point_shape[static_cast<size_t>(src)];
    db.t[static_cast<size_t>(i)] = rng.uniform_int(1, schedule.T);
  }
  db.eps = rng.gaussian<T>(count, 3);
  Var tokens = context_tokens(tape, post.z, gb.existence, gb.adjacency);
  Var diff = diffusion_loss(tape, store, c.denoiser, schedule, c.m, db, tokens);
  Var total = ad::add(tape, ad::scale(tape, prior, static_cast<T>(lambda)), diff);
  return {total, prior, diff};
}

namespace {

void check_records(const ModelConfig& c, std::span<const ShapeRecord> records) {
  if (records.empty()) throw Error(ErrorCode::kDatasetInvalid, "training set is empty");
  for (const auto& r : records) {
    if (r.graph.part_count() != c.m) {
      throw Error(ErrorCode::kDatasetInvalid, r.shape_id + ": part count differs from model config");
    }
    if (auto err = validate_structuregraph(r.graph, r.cloud.size())) {
      throw Error(ErrorCode::kDatasetInvalid, r.shape_id + ": " + std::string(error_name(*err)));
    }
  }
}

std::string step_name(std::int64_t step) { return "step_" + std::to_string(step) + ".sgck"; }

}  // namespace

RunManifest train_model(const TrainConfig& config, std::span<const ShapeRecord> records,
                        const std::filesystem::path& out_dir, const LossCallback& on_log) {
  config.validate();
  check_records(config.model, records);
  const auto started = std::chrono::steady_clock::now();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + out_dir.string());

  Rng root(config.seed);
  GenerativeModel model = init_model(config.model, root.fork(1).next_u64());
  Rng order_rng = root.fork(2);
  Rng noise_rng = root.fork(3);
  AdamState adam;
  adam.lr = config.lr;

  RunManifest manifest;
  manifest.config_hash = config_hash(config);
  manifest.dataset_hash = dataset_hash(records);
  const nlohmann::json header = {{"train", config}, {"config_hash", manifest.config_hash},
                                 {"dataset_hash", manifest.dataset_hash}};

  const int joint_end = config.staged ? (2 * config.iterations + 2) / 3 : config.iterations;
  std::vector<size_t> order(records.size());
  std::iota(order.begin(), order.end(), size_t{0});
  size_t cursor = order.size();
  const size_t batch_size = std::min(order.size(), static_cast<size_t>(config.batch_size));

  for (int it = 1; it <= config.iterations; ++it) {
    const bool prior_phase = config.staged && it > joint_end;
    if (config.staged) {
      adam.frozen_prefixes = prior_phase ? std::vector<std::string>{"sgn/", "ddpm/"} : std::vector<std::string>{"ccnf/"};
    }
    std::vector<const ShapeRecord*> batch;
    while (batch.size() < batch_size) {
      if (cursor == order.size()) {
        for (size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[static_cast<size_t>(order_rng.uniform_int(0, static_cast<int>(i) - 1))]);
        }
        cursor = 0;
      }
      batch.push_back(&records[order[cursor++]]);
    }

    ad::Tape<float> tape(true);
    auto loss = total_loss(tape, model.params, config.model, model.schedule, batch, config.lambda, noise_rng,
                           config.diffusion_points);
    LossPoint point{it, tape.scalar(loss.prior), tape.scalar(loss.diffusion), tape.scalar(loss.total)};
    if (!std::isfinite(point.total) || !std::isfinite(point.prior) || !std::isfinite(point.diffusion)) {
      throw Error(ErrorCode::kNonfiniteLoss, "non-finite loss at step " + std::to_string(it));
    }
    Var objective = loss.total;
    if (config.staged) objective = prior_phase ? loss.prior : loss.diffusion;
    tape.backward(objective);
    for (auto& [name, p] : model.params.entries()) {
      if (is_frozen(adam, name) && p.has_grad) p.grad.setZero();
    }
    if (config.clip_norm > 0.0) clip_grad_norm(model.params, config.clip_norm);
    adam_step(model.params, adam);

    if (it % config.log_every == 0 || it == 1 || it == config.iterations) {
      manifest.curve.push_back(point);
      if (on_log) on_log(point);
    }
    if (config.checkpoint_every > 0 && it % config.checkpoint_every == 0) {
      nlohmann::json h = header;
      h["step"] = it;
      save_model(out_dir / step_name(it), model, h);
    }
  }
  nlohmann::json h = header;
  h["step"] = config.iterations;
  save_model(out_dir / "last.sgck", model, h);
  manifest.checkpoint = (out_dir / "last.sgck").string();
  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_file_atomic(out_dir / "run.json", nlohmann::json(manifest).dump(2));
  return manifest;
}

template TotalLossVars<float> total_loss<float>(ad::Tape<float>&, ParamStore<float>&, const ModelConfig&,
                                                const NoiseSchedule&, std::span<const ShapeRecord* const>, double,
                                                Rng&, int);
template TotalLossVars<double> total_loss<double>(ad::Tape<double>&, ParamStore<double>&, const ModelConfig&,
                                                  const NoiseSchedule&, std::span<const ShapeRecord* const>, double,
                                                  Rng&, int);

}  // namespace sgen
