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
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sgen/dataset_io.hpp"
#include "sgen/rng.hpp"
#include "sgen/shape.hpp"

namespace sgen {

struct StructureEntry {
  std::string code;
  BinaryVector existence;
  BinaryMatrix adjacency;
};

/// The eight chair structures. Seat-back and seat-leg edges are always present;
/// the code's digits other than 3 list the parts the armrest touches.
const std::vector<StructureEntry>& structure_catalog();
const StructureEntry& structure_by_code(const std::string& code);
std::optional<std::string> code_for_structure(const BinaryVector& existence, const BinaryMatrix& adjacency);

/// Axis-aligned box.
struct PartPrimitive {
  Eigen::Vector3d center;
  Eigen::Vector3d half_extents;
  int part_index = 0;

  Eigen::Vector3d lo() const { return center - half_extents; }
  Eigen::Vector3d hi() const { return center + half_extents; }
  double surface_area() const;
};

double box_distance(const PartPrimitive& a, const PartPrimitive& b);

struct Range {
  double lo;
  double hi;
};

/// Sampling ranges in pre-normalization units (roughly meters).
struct DimensionRanges {
  Range seat_width{0.40, 0.60};
  Range seat_depth{0.38, 0.55};
  Range seat_thickness{0.05, 0.08};
  Range back_height{0.35, 0.55};
  Range back_thickness{0.03, 0.06};
  Range leg_height{0.35, 0.50};
  Range leg_thickness{0.03, 0.05};
  Range armrest_height{0.15, 0.25};
  Range armrest_width{0.04, 0.07};
  Range armrest_thickness{0.03, 0.05};
  Range armrest_offset{0.06, 0.12};
};

struct ArmrestContacts {
  bool back = false;
  bool seat = false;
  bool leg = false;
};

struct ChairSpec {
  std::string structure_code;
  double seat_width = 0.5;
  double seat_depth = 0.45;
  double seat_thickness = 0.06;
  double back_height = 0.45;
  double back_thickness = 0.04;
  double leg_height = 0.42;
  double leg_thickness = 0.04;
  double armrest_height = 0.2;
  double armrest_width = 0.05;
  double armrest_thickness = 0.04;
  double armrest_offset = 0.08;  // gap to the back when the armrest does not touch it

  ArmrestContacts attach_mode() const;
};

inline constexpr double kContactEpsilon = 0.01;
inline constexpr int kMaxGeometryAttempts = 100;

struct GeneratorConfig {
  int n = 512;
  int count_per_code = 25;
  DimensionRanges ranges;
  double surface_noise = 0.001;
  std::uint64_t seed = 1;
  std::vector<std::string> codes;  // empty: whole catalog
  double train_fraction = 0.85;
};

ChairSpec sample_chair_spec(const std::string& code, const DimensionRanges& ranges, Rng& rng);
std::vector<PartPrimitive> build_primitives(const ChairSpec& spec);

/// True when boxes of parts that share an edge touch (< contact epsilon) and all
/// other part pairs are at least 4x contact epsilon apart.
bool contacts_match_structure(const std::vector<PartPrimitive>& boxes, const StructureEntry& structure);

/// Surface-sampled, labeled, normalized chair. Deterministic in (spec, n, seed).
ShapeRecord make_shape(const ChairSpec& spec, int n, std::uint64_t seed, double surface_noise = 0.001);

/// Samples dimensions until the structure is realizable, then calls make_shape.
ShapeRecord generate_shape(const std::string& code, int n, const DimensionRanges& ranges, std::uint64_t seed,
                           double surface_noise = 0.001);

Dataset make_dataset(const GeneratorConfig& config);

GeneratorConfig generator_config_from_json(const std::string& text);

}  // namespace sgen
