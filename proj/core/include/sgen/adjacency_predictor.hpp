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
#include <span>

#include <nlohmann/json.hpp>

#include "sgen/sgn.hpp"

namespace sgen {

struct PredictorConfig {
  int hidden = 128;
  int iterations = 3000;
  double lr = 1e-3;
  int batch_size = 64;
  std::uint64_t seed = 1;
  double gate = 0.95;

  void validate() const;
};

void to_json(nlohmann::json& j, const PredictorConfig& c);
void from_json(const nlohmann::json& j, PredictorConfig& c);

struct StructurePrediction {
  BinaryVector existence;
  BinaryMatrix adjacency;
};

/// Existence logits (m) and adjacency logits (m x m) to binary decisions:
/// sigmoid > threshold (strict), E symmetrized as (l_jk + l_kj)/2, zero
/// diagonal, rows and columns of predicted-absent parts cleared.
StructurePrediction decide_structure(const Eigen::VectorXd& existence_logits, const MatrixD& adjacency_logits,
                                     double threshold = 0.5);

/// Encoder input for a shape whose structure is unknown: V from label
/// occupancy, no edges.
StructureGraph observed_graph(const BinaryMatrix& labels);

/// Frozen encoder plus a two-hidden-layer head over the concatenated part
/// features, emitting m existence and m^2 adjacency logits. The encoder
/// weights are a private copy, so the predictor file is self-contained.
class AdjacencyPredictor {
 public:
  AdjacencyPredictor() = default;
  AdjacencyPredictor(const SgnConfig& sgn, int m, const ParamStore<float>& encoder, int hidden, std::uint64_t seed);

  int part_count() const { return m_; }
  int feature_dim() const { return m_ * sgn_.gat_hidden; }

  /// One row of frozen encoder features per shape.
  MatrixF features(const PointCloud& cloud, const BinaryMatrix& labels) const;
  /// Head logits for feature rows: B x (m + m^2).
  MatrixF head_logits(const MatrixF& features) const;

  StructurePrediction predict(const PointCloud& cloud, const BinaryMatrix& labels, double threshold = 0.5) const;
  StructurePrediction predict_from_features(const MatrixF& feature_row, double threshold = 0.5) const;

  ParamStore<float>& params() { return params_; }
  const ParamStore<float>& params() const { return params_; }
  const SgnConfig& encoder_config() const { return sgn_; }

  void save(const std::filesystem::path& path, const nlohmann::json& extra = nlohmann::json::object()) const;
  /// Throws CHECKPOINT_MISMATCH for files that are not predictor files.
  static AdjacencyPredictor load(const std::filesystem::path& path);

 private:
  SgnConfig sgn_;
  int m_ = 0;
  int hidden_ = 0;
  ParamStore<float> params_;  // "sgn/..." (frozen) and "pred/..."
};

/// Fraction of correct entries over V (m) and the upper triangle of E.
double structure_accuracy(const StructurePrediction& prediction, const StructureGraph& truth);

struct PredictorTrainResult {
  AdjacencyPredictor predictor;
  double train_accuracy = 0.0;
  double heldout_accuracy = 0.0;
  bool gate_passed = false;
};

/// BCE on V and off-diagonal E targets with the encoder frozen. With
/// `shuffle_targets` each shape is paired with another shape's structure
/// (negative control).
PredictorTrainResult train_adjacency_predictor(std::span<const ShapeRecord> train, std::span<const ShapeRecord> heldout,
                                               const SgnConfig& sgn, const ParamStore<float>& encoder, int m,
                                               const PredictorConfig& config, bool shuffle_targets = false);

double predictor_accuracy(const AdjacencyPredictor& predictor, std::span<const ShapeRecord> records);

}  // namespace sgen
