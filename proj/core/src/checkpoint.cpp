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

#include "sgen/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "sgen/dataset_io.hpp"

namespace sgen {
namespace {

constexpr char kMagic[4] = {'S', 'G', 'C', 'K'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParamStore<float>& params, const nlohmann::json& meta) {
  nlohmann::json header;
  header["step"] = params.step;
  header["meta"] = meta;
  header["params"] = nlohmann::json::array();
  for (const auto& name : params.names()) {
    const auto& p = params.at(name);
    header["params"].push_back({{"name", name}, {"shape", {p.value.rows(), p.value.cols()}}});
  }
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& name : params.names()) {
    const auto& v = params.at(name).value;
    for (Eigen::Index i = 0; i < v.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(v.data()[i]));
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kSchemaVersionMismatch, "bad checkpoint magic");
  }
  if (get_u32(bytes, 4) != kCheckpointVersion) throw Error(ErrorCode::kSchemaVersionMismatch, "checkpoint version");
  const size_t len = get_u32(bytes, 8);
  if (12 + len > bytes.size()) throw Error(ErrorCode::kCorruptRecord, "checkpoint header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptRecord, std::string("checkpoint header: ") + e.what());
  }
  Checkpoint ck;
  ck.meta = header.value("meta", nlohmann::json::object());
  ck.params.step = header.value("step", std::int64_t{0});
  size_t at = 12 + len;
  for (const auto& entry : header.at("params")) {
    const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
    const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
    if (at + static_cast<size_t>(rows * cols) * 4 > bytes.size()) {
      throw Error(ErrorCode::kCorruptRecord, "checkpoint data truncated");
    }
    MatrixF v(rows, cols);
    for (Eigen::Index i = 0; i < v.size(); ++i, at += 4) v.data()[i] = std::bit_cast<float>(get_u32(bytes, at));
    ck.params.add(entry.at("name").get<std::string>(), std::move(v));
  }
  if (at != bytes.size()) throw Error(ErrorCode::kCorruptRecord, "trailing bytes in checkpoint");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& params, const nlohmann::json& meta) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file_atomic(path, encode_checkpoint(params, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace sgen
