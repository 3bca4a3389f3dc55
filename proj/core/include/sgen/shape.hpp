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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sgen/error.hpp"

namespace sgen {

using Points = Eigen::Matrix<float, Eigen::Dynamic, 3, Eigen::RowMajor>;
using BinaryMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using BinaryVector = std::vector<std::uint8_t>;

/// Part indices of the synthetic chair category.
inline constexpr int kBack = 0;
inline constexpr int kSeat = 1;
inline constexpr int kLeg = 2;
inline constexpr int kArmrest = 3;
inline constexpr int kChairParts = 4;

/// Adjacency threshold in normalized coordinates.
inline constexpr double kDefaultContactThreshold = 0.05;

struct PointCloud {
  Points points;

  Eigen::Index size() const { return points.rows(); }
};

/// Per-point one-hot labels S (n x m), part existence V (m), part adjacency E (m x m).
struct StructureGraph {
  BinaryMatrix labels;
  BinaryVector existence;
  BinaryMatrix adjacency;

  int part_count() const { return static_cast<int>(existence.size()); }
};

struct ShapeRecord {
  PointCloud cloud;
  StructureGraph graph;
  std::string structure_code;
  std::string shape_id;
};

enum class Split { kTrain, kTest };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

struct ManifestEntry {
  std::string shape_id;
  std::string structure_code;
  Split split = Split::kTrain;
  std::string blob;  // relative to the manifest directory
};

struct DatasetManifest {
  std::string category = "chair";
  int m = kChairParts;
  std::vector<ManifestEntry> records;
};

/// Index of the hot column in each label row, -1 for rows that are not one-hot.
std::vector<int> label_indices(const BinaryMatrix& labels);
BinaryMatrix one_hot_labels(std::span<const int> indices, int m);
/// Number of points carrying each label.
std::vector<int> part_counts(const BinaryMatrix& labels);

/// Checks every StructureGraph invariant against a cloud of n points. Returns the
/// first violation, or nullopt when the graph is valid.
std::optional<ErrorCode> validate_structuregraph(const StructureGraph& graph, Eigen::Index n);

/// Zero per-axis mean and unit variance over all 3n coordinate residuals (one
/// uniform scale, so the aspect ratio is preserved).
PointCloud normalize_cloud(const PointCloud& cloud);

/// Equal split of n points across existing parts in contiguous index blocks.
/// The lowest-indexed existing parts absorb the remainder.
BinaryMatrix default_segmentation(Eigen::Index n, const BinaryVector& existence);

/// E[j][k] = 1 iff parts j and k are non-empty and some pair of their points lies
/// within `threshold` (Euclidean).
BinaryMatrix adjacency_from_parts(const PointCloud& cloud, const BinaryMatrix& labels,
                                  double threshold = kDefaultContactThreshold);

/// Minimum Euclidean distance between points of two parts; +inf if either is empty.
double min_part_distance(const PointCloud& cloud, std::span<const int> labels, int part_a, int part_b);

/// Cyclomatic complexity M = |edges| - |existing nodes| + 2 * |components|.
int graph_complexity(const StructureGraph& graph);

}  // namespace sgen
