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
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgen/dataset_io.hpp"
#include "sgen/model.hpp"

namespace sgen {

struct TrainConfig {
  double lambda = 1e-3;
  int batch_size = 16;
  double lr = 1e-3;
  int iterations = 5000;
  ModelConfig model;
  std::uint64_t seed = 1;
  int checkpoint_every = 1000;  // 0: only the final checkpoint
  int log_every = 10;
  double clip_norm = 10.0;      // 0: no clipping
  // Points per shape entering the diffusion loss; 0 uses every point.
  int diffusion_points = 0;
  // Two phases instead of the joint objective: encoder + denoiser on L_diff,
  // then the priors on L_prior against the frozen encoder.
  bool staged = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

template <typename T>
struct TotalLossVars {
  ad::Var total;
  ad::Var prior;
  ad::Var diffusion;
};

/// Encodes every shape once, then evaluates L = lambda * L_prior + L_diff on
/// the shared Z. Posterior noise, steps t ~ U{1..T} and eps ~ N(0, I) are drawn
/// from `rng` in that order.
template <typename T>
TotalLossVars<T> total_loss(ad::Tape<T>& tape, ParamStore<T>& store, const ModelConfig& config,
                            const NoiseSchedule& schedule, std::span<const ShapeRecord* const> batch, double lambda,
                            Rng& rng, int diffusion_points = 0);

struct LossPoint {
  std::int64_t step = 0;
  double prior = 0.0;
  double diffusion = 0.0;
  double total = 0.0;
};

struct RunManifest {
  std::string config_hash;
  std::string dataset_hash;
  std::string checkpoint;
  std::vector<LossPoint> curve;
  double wall_seconds = 0.0;
};

void to_json(nlohmann::json& j, const RunManifest& r);
void from_json(const nlohmann::json& j, RunManifest& r);

/// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const TrainConfig& config);
std::string dataset_hash(std::span<const ShapeRecord> records);

using LossCallback = std::function<void(const LossPoint&)>;

/// Adam on the joint objective (or the staged variant). Writes
/// step_<k>.sgck at the cadence, last.sgck and run.json into `out_dir`.
/// Throws DATASET_INVALID for unusable records and NONFINITE_LOSS with the
/// offending step.
RunManifest train_model(const TrainConfig& config, std::span<const ShapeRecord> records,
                        const std::filesystem::path& out_dir, const LossCallback& on_log = {});

}  // namespace sgen
