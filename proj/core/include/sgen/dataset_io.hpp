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
#include <string>
#include <vector>

#include "sgen/shape.hpp"

namespace sgen {

inline constexpr std::uint32_t kBlobVersion = 1;
inline constexpr int kManifestSchemaVersion = 1;
inline constexpr const char* kManifestFile = "manifest.json";

struct Dataset {
  DatasetManifest manifest;
  std::vector<ShapeRecord> records;  // same order as manifest.records
};

/// Geometry blob: "SGPC", u32 version, u32 n, u32 m, n*3 f32 points, n u8 label
/// indices, m u8 existence, m*m u8 adjacency. Little-endian throughout.
std::vector<std::uint8_t> encode_blob(const ShapeRecord& record);
ShapeRecord decode_blob(std::span<const std::uint8_t> bytes);

/// Writes `bytes` to a sibling temporary and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Writes manifest.json plus one blob per record into `dir`. Blob paths in the
/// manifest are filled in when empty.
void save_dataset(const std::filesystem::path& dir, DatasetManifest manifest,
                  std::span<const ShapeRecord> records);
Dataset load_dataset(const std::filesystem::path& dir);

/// Accepts either a dataset directory or "<dataset>/train" / "<dataset>/test",
/// which selects one split of the dataset.
Dataset load_dataset_or_split(const std::filesystem::path& path);

}  // namespace sgen
