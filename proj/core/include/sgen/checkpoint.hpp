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
#include <vector>

#include <nlohmann/json.hpp>

#include "sgen/param_store.hpp"

namespace sgen {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ParamStore<float> params;
  nlohmann::json meta;  // configs, schedule, hyperparameters
};

/// "SGCK", u32 version, u32 header length, JSON header {params:[{name,shape}],
/// step, meta}, then float32 LE arrays in header order.
std::vector<std::uint8_t> encode_checkpoint(const ParamStore<float>& params, const nlohmann::json& meta);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& params, const nlohmann::json& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sgen
