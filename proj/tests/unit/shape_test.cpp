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

#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "sgen/dataset_io.hpp"
#include "sgen/rng.hpp"
#include "sgen/shape.hpp"
#include "test_util.hpp"

namespace sgen {
namespace {

using testing::binary;
using testing::cloud_of;

StructureGraph two_part_graph() {
  StructureGraph g;
  g.labels = binary(3, 2, {1, 0, 0, 1, 1, 0});
  g.existence = {1, 1};
  g.adjacency = binary(2, 2, {0, 1, 1, 0});
  return g;
}

TEST(ValidateStructureGraph, AcceptsValidGraph) {
  EXPECT_FALSE(validate_structuregraph(two_part_graph(), 3).has_value());
}

TEST(ValidateStructureGraph, ReportsEachViolation) {
  auto g = two_part_graph();
  g.adjacency = binary(2, 2, {0, 1, 0, 0});
  EXPECT_EQ(validate_structuregraph(g, 3), ErrorCode::kAsymmetricE);

  g = two_part_graph();
  g.existence = {1, 0};
  g.labels = binary(3, 2, {1, 0, 1, 0, 1, 0});
  EXPECT_EQ(validate_structuregraph(g, 3), ErrorCode::kEdgeOnAbsentPart);

  g = two_part_graph();
  g.labels(0, 1) = 1;
  EXPECT_EQ(validate_structuregraph(g, 3), ErrorCode::kNonOnehotRow);

  g = two_part_graph();
  g.labels(1, 1) = 0;
  EXPECT_EQ(validate_structuregraph(g, 3), ErrorCode::kNonOnehotRow);

  g = two_part_graph();
  g.existence = {1, 0};
  g.adjacency.setZero();
  EXPECT_EQ(validate_structuregraph(g, 3), ErrorCode::kLabelOnAbsentPart);

  g = two_part_graph();
  g.adjacency(0, 0) = 1;
  EXPECT_EQ(validate_structuregraph(g, 3), ErrorCode::kSelfLoop);

  EXPECT_EQ(validate_structuregraph(two_part_graph(), 4), ErrorCode::kRowCountMismatch);
}

TEST(NormalizeCloud, RemovesTranslation) {
  auto c = cloud_of({{0, 1, 2}, {2, 3, 4}, {1, 2, 3}, {1, 2, 3.5f}});
  auto out = normalize_cloud(c);
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(out.points.col(a).cast<double>().mean(), 0.0, 1e-6);
}

TEST(NormalizeCloud, HandComputedVariance) {
  // Residuals are the points themselves (mean 0); variance over 12 coordinates
  // is 4 / 12, so the scale is sqrt(3).
  auto c = cloud_of({{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}});
  auto out = normalize_cloud(c);
  EXPECT_NEAR(out.points(0, 0), std::sqrt(3.0), 1e-6);
  const double var = out.points.cast<double>().array().square().sum() / 12.0;
  EXPECT_NEAR(var, 1.0, 1e-6);
}

TEST(NormalizeCloud, IdempotentOnRandomClouds) {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    PointCloud c;
    c.points = (rng.gaussian<float>(200, 3).array() * 4.0f + 2.0f).matrix();
    auto once = normalize_cloud(c);
    auto twice = normalize_cloud(once);
    EXPECT_LT((once.points - twice.points).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(NormalizeCloud, RejectsDegenerate) {
  auto c = cloud_of({{1, 1, 1}, {1, 1, 1}});
  EXPECT_SGEN_ERROR(normalize_cloud(c), ErrorCode::kDegenerateCloud);
}

TEST(DefaultSegmentation, RemainderGoesToLowestIndex) {
  auto counts = part_counts(default_segmentation(6, {1, 1, 0, 1}));
  EXPECT_EQ(counts, (std::vector<int>{2, 2, 0, 2}));
  counts = part_counts(default_segmentation(5, {1, 1, 0, 0}));
  EXPECT_EQ(counts, (std::vector<int>{3, 2, 0, 0}));
  counts = part_counts(default_segmentation(4, {0, 0, 0, 1}));
  EXPECT_EQ(counts, (std::vector<int>{0, 0, 0, 4}));
  counts = part_counts(default_segmentation(512, {1, 1, 1, 0}));
  EXPECT_EQ(counts, (std::vector<int>{171, 171, 170, 0}));
}

TEST(DefaultSegmentation, BlocksAreContiguousAndValid) {
  const BinaryVector v = {0, 1, 1, 1};
  auto labels = default_segmentation(11, v);
  auto idx = label_indices(labels);
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  StructureGraph g{labels, v, BinaryMatrix::Zero(4, 4)};
  EXPECT_FALSE(validate_structuregraph(g, 11).has_value());
}

TEST(DefaultSegmentation, RejectsEmptyExistence) {
  EXPECT_SGEN_ERROR(default_segmentation(4, {0, 0}), ErrorCode::kNoExistingPart);
}

TEST(AdjacencyFromParts, TouchingCubes) {
  // Corners of two unit cubes sharing the face x = 1.
  PointCloud c;
  std::vector<int> labels;
  c.points.resize(16, 3);
  int row = 0;
  for (int cube = 0; cube < 2; ++cube) {
    for (int corner = 0; corner < 8; ++corner) {
      c.points.row(row++) << static_cast<float>(cube + (corner & 1)), static_cast<float>((corner >> 1) & 1),
          static_cast<float>((corner >> 2) & 1);
      labels.push_back(cube);
    }
  }
  auto e = adjacency_from_parts(c, one_hot_labels(labels, 2), 0.05);
  EXPECT_EQ(e, binary(2, 2, {0, 1, 1, 0}));
}

TEST(AdjacencyFromParts, SeparatedClusters) {
  auto c = cloud_of({{0, 0, 0}, {0, 0.1f, 0}, {1, 0, 0}, {1, 0.1f, 0}});
  std::vector<int> labels = {0, 0, 1, 1};
  EXPECT_EQ(adjacency_from_parts(c, one_hot_labels(labels, 2), 0.5), BinaryMatrix::Zero(2, 2));
  EXPECT_EQ(adjacency_from_parts(c, one_hot_labels(labels, 2), 1.0), binary(2, 2, {0, 1, 1, 0}));
}

TEST(AdjacencyFromParts, SinglePartAndSymmetry) {
  Rng rng(5);
  PointCloud c;
  c.points = rng.gaussian<float>(40, 3);
  std::vector<int> one(40, 0);
  EXPECT_EQ(adjacency_from_parts(c, one_hot_labels(one, 3), 0.05), BinaryMatrix::Zero(3, 3));

  std::vector<int> labels(40);
  for (int i = 0; i < 40; ++i) labels[static_cast<size_t>(i)] = i % 3;
  auto e = adjacency_from_parts(c, one_hot_labels(labels, 3), 0.8);
  EXPECT_EQ(e, e.transpose().eval());
  for (int j = 0; j < 3; ++j) EXPECT_EQ(e(j, j), 0);

  // Reordering points (with their labels) must not change the result.
  std::vector<int> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  PointCloud p;
  p.points.resize(40, 3);
  std::vector<int> pl(40);
  for (int i = 0; i < 40; ++i) {
    p.points.row(i) = c.points.row(perm[static_cast<size_t>(i)]);
    pl[static_cast<size_t>(i)] = labels[static_cast<size_t>(perm[static_cast<size_t>(i)])];
  }
  EXPECT_EQ(adjacency_from_parts(p, one_hot_labels(pl, 3), 0.8), e);
}

TEST(GraphComplexity, StandardFormula) {
  StructureGraph path;
  path.existence = {1, 1, 1, 1};
  path.adjacency = binary(4, 4, {0, 1, 0, 0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 0, 1, 0});
  EXPECT_EQ(graph_complexity(path), 1);

  StructureGraph k4;
  k4.existence = {1, 1, 1, 1};
  k4.adjacency = binary(4, 4, {0, 1, 1, 1, 1, 0, 1, 1, 1, 1, 0, 1, 1, 1, 1, 0});
  EXPECT_EQ(graph_complexity(k4), 4);

  StructureGraph single;
  single.existence = {0, 1, 0};
  single.adjacency = BinaryMatrix::Zero(3, 3);
  EXPECT_EQ(graph_complexity(single), 1);
}

TEST(GraphComplexity, TreesHaveComplexityOne) {
  Rng rng(11);
  for (int k = 1; k <= 8; ++k) {
    StructureGraph g;
    g.existence.assign(static_cast<size_t>(k), 1);
    g.adjacency = BinaryMatrix::Zero(k, k);
    for (int i = 1; i < k; ++i) {
      const int parent = rng.uniform_int(0, i - 1);
      g.adjacency(i, parent) = g.adjacency(parent, i) = 1;
    }
    EXPECT_EQ(graph_complexity(g), 1) << "k=" << k;
  }
}

ShapeRecord small_record(int n, std::uint64_t seed, const std::string& id) {
  Rng rng(seed);
  ShapeRecord r;
  r.cloud.points = rng.gaussian<float>(n, 3);
  r.graph.existence = {1, 1, 0};
  r.graph.labels = default_segmentation(n, r.graph.existence);
  r.graph.adjacency = binary(3, 3, {0, 1, 0, 1, 0, 0, 0, 0, 0});
  r.structure_code = "custom";
  r.shape_id = id;
  return r;
}

void expect_same(const ShapeRecord& a, const ShapeRecord& b) {
  EXPECT_EQ(a.shape_id, b.shape_id);
  EXPECT_EQ(a.structure_code, b.structure_code);
  EXPECT_EQ(a.cloud.points, b.cloud.points);
  EXPECT_EQ(a.graph.labels, b.graph.labels);
  EXPECT_EQ(a.graph.existence, b.graph.existence);
  EXPECT_EQ(a.graph.adjacency, b.graph.adjacency);
}

TEST(DatasetIo, RoundTripIsFieldIdentical) {
  testing::TempDir dir("roundtrip");
  std::vector<ShapeRecord> records = {small_record(10, 1, "a"), small_record(7, 2, "b"), small_record(12, 3, "c")};
  DatasetManifest manifest;
  manifest.m = 3;
  for (const auto& r : records) manifest.records.push_back({r.shape_id, r.structure_code, Split::kTrain, ""});
  manifest.records[2].split = Split::kTest;
  save_dataset(dir.path(), manifest, records);
  auto loaded = load_dataset(dir.path());
  ASSERT_EQ(loaded.records.size(), 3u);
  for (size_t i = 0; i < 3; ++i) expect_same(records[i], loaded.records[i]);
  EXPECT_EQ(loaded.manifest.records[2].split, Split::kTest);
  EXPECT_EQ(loaded.manifest.m, 3);

  auto test_only = load_dataset_or_split(dir.path() / "test");
  ASSERT_EQ(test_only.records.size(), 1u);
  EXPECT_EQ(test_only.records[0].shape_id, "c");
}

TEST(DatasetIo, WrongMagicIsSchemaMismatch) {
  auto bytes = encode_blob(small_record(5, 1, "x"));
  bytes[0] = 'X';
  EXPECT_SGEN_ERROR(decode_blob(bytes), ErrorCode::kSchemaVersionMismatch);
}

TEST(DatasetIo, TamperedLengthIsCorrupt) {
  testing::TempDir dir("tamper");
  std::vector<ShapeRecord> records = {small_record(10, 1, "a")};
  DatasetManifest manifest;
  manifest.m = 3;
  manifest.records.push_back({"a", "custom", Split::kTrain, ""});
  save_dataset(dir.path(), manifest, records);
  const auto blob = dir.path() / load_dataset(dir.path()).manifest.records[0].blob;
  auto bytes = read_file(blob);
  bytes[8] = 11;  // n is the u32 after magic and version
  write_file_atomic(blob, bytes);
  EXPECT_SGEN_ERROR(load_dataset(dir.path()), ErrorCode::kCorruptRecord);
}

TEST(DatasetIo, MissingDirectoryIsIoError) {
  EXPECT_SGEN_ERROR(load_dataset("/nonexistent/sgen/dataset"), ErrorCode::kIoError);
}

TEST(ErrorNames, UpperSnakeCase) {
  EXPECT_EQ(error_name(ErrorCode::kNonOnehotRow), "NON_ONEHOT_ROW");
  EXPECT_EQ(error_name(ErrorCode::kUndertrainedPredictor), "UNDERTRAINED_PREDICTOR");
  Error e(ErrorCode::kSelfLoop, "detail");
  EXPECT_EQ(std::string(e.what()), "SELF_LOOP: detail");
}

}  // namespace
}  // namespace sgen
