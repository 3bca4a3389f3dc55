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

#include <filesystem>
#include <string>
#include <vector>

#include "sgen/shape.hpp"

namespace sgen {

/// ASCII PLY with float x, y, z and uchar part per vertex. Coordinates use the
/// shortest decimal form that reads back to the same float.
std::string ply_string(const PointCloud& cloud, const BinaryMatrix& labels);
void write_ply(const std::filesystem::path& path, const PointCloud& cloud, const BinaryMatrix& labels);

struct PlyData {
  PointCloud cloud;
  std::vector<int> parts;
};

/// Reads files produced by write_ply. Throws CORRUPT_RECORD on anything else.
PlyData read_ply(const std::filesystem::path& path);
PlyData parse_ply(const std::string& text);

}  // namespace sgen
