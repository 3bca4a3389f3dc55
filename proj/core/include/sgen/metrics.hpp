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

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgen/shape.hpp"
#include "sgen/tensor.hpp"

namespace sgen {

enum class SetKernel { kChamfer, kEmd };

struct MetricConfig {
  int jsd_resolution = 28;
  double jsd_extent = 3.0;         // histogram box is [-extent, extent]^3
  int emd_exact_max = 256;         // Hungarian up to this size, Sinkhorn above
  double sinkhorn_epsilon = 0.01;
  int sinkhorn_iterations = 500;
  double threshold = 0.5;          // predictor decision threshold (strict)
  bool with_emd = true;            // EMD-kernel MMD/COV/1-NNA
  int workers = 0;                 // 0: worker_count()

  void validate() const;
};

void to_json(nlohmann::json& j, const MetricConfig& c);
void from_json(const nlohmann::json& j, MetricConfig& c);

/// Mean squared nearest-neighbour distance in both directions.
double chamfer(const Points& a, const Points& b);

/// Optimal-assignment EMD: min over bijections of the mean Euclidean distance.
double emd_exact(const Points& a, const Points& b);
/// Log-domain Sinkhorn transport cost with uniform marginals.
double emd_sinkhorn(const Points& a, const Points& b, double epsilon, int iterations);
/// Exact up to config.emd_exact_max points, Sinkhorn above.
double emd(const Points& a, const Points& b, const MetricConfig& config = {});

/// Minimum-cost perfect assignment on a square cost matrix; returns the column
/// assigned to each row.
std::vector<int> hungarian(const MatrixD& cost);

/// D(i, j) = kernel(a[i], b[j]).
MatrixD distance_matrix(std::span<const Points* const> a, std::span<const Points* const> b, SetKernel kernel,
                        const MetricConfig& config = {});

/// From a gen x ref distance matrix: mean over ref of the min distance to gen.
double mmd_from_distances(const MatrixD& gen_ref);
/// Fraction of ref clouds that are the nearest ref of some gen cloud (ties to
/// the lower ref index).
double cov_from_distances(const MatrixD& gen_ref);
/// Leave-one-out 1-NN accuracy over gen followed by ref; ties go to the lower
/// index of the union.
double nna_from_distances(const MatrixD& gen_gen, const MatrixD& ref_ref, const MatrixD& gen_ref);

double mmd(std::span<const Points* const> gen, std::span<const Points* const> ref, SetKernel kernel,
           const MetricConfig& config = {});
double cov(std::span<const Points* const> gen, std::span<const Points* const> ref, SetKernel kernel,
           const MetricConfig& config = {});
double nna_1(std::span<const Points* const> gen, std::span<const Points* const> ref, SetKernel kernel,
             const MetricConfig& config = {});

/// Occupancy histogram of all points over resolution^3 voxels; points outside
/// the box fall into the nearest boundary voxel.
Eigen::VectorXd occupancy_histogram(std::span<const Points* const> clouds, int resolution, double extent);
/// Jensen-Shannon divergence (natural log) of two distributions.
double jsd_distributions(const Eigen::VectorXd& p, const Eigen::VectorXd& q);
double jsd(std::span<const Points* const> gen, std::span<const Points* const> ref, int resolution = 28,
           double extent = 3.0);

/// Fraction of the m^2 ordered pairs (j, k), diagonal included, with
/// v_j == pv_j and e_jk == pe_jk.
double sca(const BinaryVector& existence, const BinaryMatrix& adjacency, const BinaryVector& pred_existence,
           const BinaryMatrix& pred_adjacency);

struct StructureScore {
  double sca = 0.0;
  int count = 0;
};

struct EvalReport {
  double mmd_cd = 0.0;
  double mmd_emd = 0.0;
  double cov_cd = 0.0;
  double cov_emd = 0.0;
  double nna_cd = 0.0;
  double nna_emd = 0.0;
  double jsd = 0.0;
  bool has_emd = false;
  std::map<std::string, StructureScore> sca;  // per structure code
  int gen_count = 0;
  int ref_count = 0;

  double mean_sca() const;
};

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);
/// Metric,value rows followed by structure,sca,count rows.
std::string report_csv(const EvalReport& r);

class AdjacencyPredictor;

/// All set metrics, plus SCA per structure code when a predictor is given.
EvalReport evaluate(std::span<const ShapeRecord> gen, std::span<const ShapeRecord> ref,
                    const AdjacencyPredictor* predictor, const MetricConfig& config = {});

}  // namespace sgen
