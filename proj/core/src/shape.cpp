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

#include "sgen/shape.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace sgen {

std::string_view split_name(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  throw Error(ErrorCode::kCorruptRecord, "unknown split '" + std::string(name) + "'");
}

std::vector<int> label_indices(const BinaryMatrix& labels) {
  std::vector<int> out(static_cast<size_t>(labels.rows()), -1);
  for (Eigen::Index i = 0; i < labels.rows(); ++i) {
    int hot = -1;
    int ones = 0;
    for (Eigen::Index j = 0; j < labels.cols(); ++j) {
      if (labels(i, j) == 1) {
        hot = static_cast<int>(j);
        ++ones;
      } else if (labels(i, j) != 0) {
        ones = 2;
      }
    }
    out[static_cast<size_t>(i)] = ones == 1 ? hot : -1;
  }
  return out;
}

BinaryMatrix one_hot_labels(std::span<const int> indices, int m) {
  BinaryMatrix labels = BinaryMatrix::Zero(static_cast<Eigen::Index>(indices.size()), m);
  for (size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= m) {
      throw Error(ErrorCode::kNonOnehotRow, "label index out of range at row " + std::to_string(i));
    }
    labels(static_cast<Eigen::Index>(i), indices[i]) = 1;
  }
  return labels;
}

std::vector<int> part_counts(const BinaryMatrix& labels) {
  std::vector<int> counts(static_cast<size_t>(labels.cols()), 0);
  for (int idx : label_indices(labels)) {
    if (idx >= 0) ++counts[static_cast<size_t>(idx)];
  }
  return counts;
}

std::optional<ErrorCode> validate_structuregraph(const StructureGraph& graph, Eigen::Index n) {
  const Eigen::Index m = static_cast<Eigen::Index>(graph.existence.size());
  if (m < 1 || graph.labels.rows() != n || graph.labels.cols() != m || graph.adjacency.rows() != m ||
      graph.adjacency.cols() != m) {
    return ErrorCode::kRowCountMismatch;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    int sum = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (graph.labels(i, j) > 1) return ErrorCode::kNonOnehotRow;
      sum += graph.labels(i, j);
    }
    if (sum != 1) return ErrorCode::kNonOnehotRow;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (graph.labels(i, j) == 1 && graph.existence[static_cast<size_t>(j)] == 0) {
        return ErrorCode::kLabelOnAbsentPart;
      }
    }
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index k = 0; k < m; ++k) {
      if (graph.adjacency(j, k) != graph.adjacency(k, j)) return ErrorCode::kAsymmetricE;
    }
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    if (graph.adjacency(j, j) != 0) return ErrorCode::kSelfLoop;
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index k = 0; k < m; ++k) {
      if (graph.adjacency(j, k) > 1) return ErrorCode::kAsymmetricE;
      if (graph.adjacency(j, k) == 1 &&
          (graph.existence[static_cast<size_t>(j)] != 1 || graph.existence[static_cast<size_t>(k)] != 1)) {
        return ErrorCode::kEdgeOnAbsentPart;
      }
    }
  }
  return std::nullopt;
}

PointCloud normalize_cloud(const PointCloud& cloud) {
  const Eigen::Index n = cloud.size();
  if (n < 2) throw Error(ErrorCode::kDegenerateCloud, "need at least two points");
  const Eigen::Matrix<double, Eigen::Dynamic, 3> x = cloud.points.cast<double>();
  const Eigen::RowVector3d mean = x.colwise().mean();
  const Eigen::Matrix<double, Eigen::Dynamic, 3> centered = x.rowwise() - mean;
  const double variance = centered.squaredNorm() / static_cast<double>(3 * n);
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw Error(ErrorCode::kDegenerateCloud, "all points coincide");
  }
  PointCloud out;
  out.points = (centered / std::sqrt(variance)).cast<float>();
  return out;
}

BinaryMatrix default_segmentation(Eigen::Index n, const BinaryVector& existence) {
  std::vector<int> parts;
  for (size_t j = 0; j < existence.size(); ++j) {
    if (existence[j] == 1) parts.push_back(static_cast<int>(j));
  }
  if (parts.empty()) throw Error(ErrorCode::kNoExistingPart, "existence vector is all zero");
  const Eigen::Index k = static_cast<Eigen::Index>(parts.size());
  const Eigen::Index base = n / k;
  const Eigen::Index extra = n % k;
  BinaryMatrix labels = BinaryMatrix::Zero(n, static_cast<Eigen::Index>(existence.size()));
  Eigen::Index row = 0;
  for (Eigen::Index p = 0; p < k; ++p) {
    const Eigen::Index count = base + (p < extra ? 1 : 0);
    for (Eigen::Index i = 0; i < count; ++i) labels(row++, parts[static_cast<size_t>(p)]) = 1;
  }
  return labels;
}

double min_part_distance(const PointCloud& cloud, std::span<const int> labels, int part_a, int part_b) {
  double best = std::numeric_limits<double>::infinity();
  const auto& p = cloud.points;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (labels[static_cast<size_t>(i)] != part_a) continue;
    for (Eigen::Index k = 0; k < p.rows(); ++k) {
      if (labels[static_cast<size_t>(k)] != part_b) continue;
      const double dx = double(p(i, 0)) - double(p(k, 0));
      const double dy = double(p(i, 1)) - double(p(k, 1));
      const double dz = double(p(i, 2)) - double(p(k, 2));
      best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
  }
  return std::sqrt(best);
}

BinaryMatrix adjacency_from_parts(const PointCloud& cloud, const BinaryMatrix& labels, double threshold) {
  const auto idx = label_indices(labels);
  const int m = static_cast<int>(labels.cols());
  BinaryMatrix adjacency = BinaryMatrix::Zero(m, m);
  for (int j = 0; j < m; ++j) {
    for (int k = j + 1; k < m; ++k) {
      if (min_part_distance(cloud, idx, j, k) <= threshold) {
        adjacency(j, k) = 1;
        adjacency(k, j) = 1;
      }
    }
  }
  return adjacency;
}

int graph_complexity(const StructureGraph& graph) {
  const int m = graph.part_count();
  std::vector<int> parent(static_cast<size_t>(m));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<size_t>(x)] != x) {
      parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
      x = parent[static_cast<size_t>(x)];
    }
    return x;
  };
  int nodes = 0;
  int edges = 0;
  for (int j = 0; j < m; ++j) nodes += graph.existence[static_cast<size_t>(j)] == 1;
  int components = nodes;
  for (int j = 0; j < m; ++j) {
    for (int k = j + 1; k < m; ++k) {
      if (graph.adjacency(j, k) == 0) continue;
      ++edges;
      const int a = find(j);
      const int b = find(k);
      if (a != b) {
        parent[static_cast<size_t>(a)] = b;
        --components;
      }
    }
  }
  return edges - nodes + 2 * components;
}

}  // namespace sgen
