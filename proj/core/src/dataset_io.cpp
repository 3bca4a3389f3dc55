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

#include "sgen/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace sgen {
namespace {

constexpr char kBlobMagic[4] = {'S', 'G', 'P', 'C'};
constexpr size_t kBlobHeader = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_blob(const ShapeRecord& record) {
  const auto n = static_cast<std::uint32_t>(record.cloud.size());
  const auto m = static_cast<std::uint32_t>(record.graph.part_count());
  std::vector<std::uint8_t> out;
  out.reserve(kBlobHeader + 13 * n + m + m * m);
  out.insert(out.end(), kBlobMagic, kBlobMagic + 4);
  put_u32(out, kBlobVersion);
  put_u32(out, n);
  put_u32(out, m);
  for (Eigen::Index i = 0; i < record.cloud.size(); ++i) {
    for (int c = 0; c < 3; ++c) put_u32(out, std::bit_cast<std::uint32_t>(record.cloud.points(i, c)));
  }
  for (int idx : label_indices(record.graph.labels)) {
    if (idx < 0) throw Error(ErrorCode::kNonOnehotRow, "cannot encode record " + record.shape_id);
    out.push_back(static_cast<std::uint8_t>(idx));
  }
  for (auto v : record.graph.existence) out.push_back(v);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index k = 0; k < m; ++k) out.push_back(record.graph.adjacency(j, k));
  }
  return out;
}

ShapeRecord decode_blob(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kBlobHeader || std::memcmp(bytes.data(), kBlobMagic, 4) != 0) {
    throw Error(ErrorCode::kSchemaVersionMismatch, "bad blob magic");
  }
  if (get_u32(bytes, 4) != kBlobVersion) {
    throw Error(ErrorCode::kSchemaVersionMismatch, "unsupported blob version " + std::to_string(get_u32(bytes, 4)));
  }
  const std::uint64_t n = get_u32(bytes, 8);
  const std::uint64_t m = get_u32(bytes, 12);
  if (m == 0 || bytes.size() != kBlobHeader + 13 * n + m + m * m) {
    throw Error(ErrorCode::kCorruptRecord, "blob length does not match its n/m header");
  }
  ShapeRecord record;
  record.cloud.points.resize(static_cast<Eigen::Index>(n), 3);
  size_t at = kBlobHeader;
  for (std::uint64_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c, at += 4) {
      record.cloud.points(static_cast<Eigen::Index>(i), c) = std::bit_cast<float>(get_u32(bytes, at));
    }
  }
  std::vector<int> idx(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    idx[i] = bytes[at++];
    if (idx[i] >= static_cast<int>(m)) throw Error(ErrorCode::kCorruptRecord, "label index out of range");
  }
  record.graph.labels = one_hot_labels(idx, static_cast<int>(m));
  record.graph.existence.assign(bytes.begin() + static_cast<std::ptrdiff_t>(at),
                                bytes.begin() + static_cast<std::ptrdiff_t>(at + m));
  at += m;
  record.graph.adjacency.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::uint64_t j = 0; j < m; ++j) {
    for (std::uint64_t k = 0; k < m; ++k) {
      record.graph.adjacency(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = bytes[at++];
    }
  }
  if (auto bad = validate_structuregraph(record.graph, record.cloud.size())) {
    throw Error(ErrorCode::kCorruptRecord, "invalid structure graph: " + std::string(error_name(*bad)));
  }
  return record;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot open " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "rename to " + path.string() + " failed: " + ec.message());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void save_dataset(const std::filesystem::path& dir, DatasetManifest manifest, std::span<const ShapeRecord> records) {
  if (manifest.records.size() != records.size()) {
    throw Error(ErrorCode::kInvalidArgument, "manifest and record counts differ");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir / "blobs", ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json entries = nlohmann::json::array();
  for (size_t i = 0; i < records.size(); ++i) {
    auto& entry = manifest.records[i];
    const auto& record = records[i];
    if (record.graph.part_count() != manifest.m) {
      throw Error(ErrorCode::kInvalidArgument, "record " + record.shape_id + " has a different part count");
    }
    if (auto bad = validate_structuregraph(record.graph, record.cloud.size())) {
      throw Error(*bad, "record " + record.shape_id);
    }
    if (entry.blob.empty()) entry.blob = "blobs/" + record.shape_id + ".sgpc";
    write_file_atomic(dir / entry.blob, encode_blob(record));
    entries.push_back({{"shape_id", entry.shape_id},
                       {"structure_code", entry.structure_code},
                       {"split", split_name(entry.split)},
                       {"blob", entry.blob}});
  }
  nlohmann::json doc = {{"schema_version", kManifestSchemaVersion},
                        {"category", manifest.category},
                        {"m", manifest.m},
                        {"records", entries}};
  write_file_atomic(dir / kManifestFile, doc.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto bytes = read_file(dir / kManifestFile);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptRecord, std::string("manifest parse error: ") + e.what());
  }
  if (!doc.contains("schema_version") || doc["schema_version"] != kManifestSchemaVersion) {
    throw Error(ErrorCode::kSchemaVersionMismatch, "manifest schema_version");
  }
  Dataset ds;
  try {
    ds.manifest.category = doc.at("category").get<std::string>();
    ds.manifest.m = doc.at("m").get<int>();
    for (const auto& e : doc.at("records")) {
      ManifestEntry entry;
      entry.shape_id = e.at("shape_id").get<std::string>();
      entry.structure_code = e.at("structure_code").get<std::string>();
      entry.split = parse_split(e.at("split").get<std::string>());
      entry.blob = e.at("blob").get<std::string>();
      ds.manifest.records.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptRecord, std::string("manifest field error: ") + e.what());
  }
  for (const auto& entry : ds.manifest.records) {
    ShapeRecord record = decode_blob(read_file(dir / entry.blob));
    if (record.graph.part_count() != ds.manifest.m) {
      throw Error(ErrorCode::kCorruptRecord, "record " + entry.shape_id + " part count differs from manifest");
    }
    record.shape_id = entry.shape_id;
    record.structure_code = entry.structure_code;
    ds.records.push_back(std::move(record));
  }
  return ds;
}

Dataset load_dataset_or_split(const std::filesystem::path& path) {
  if (std::filesystem::exists(path / kManifestFile)) return load_dataset(path);
  const auto name = path.filename().string();
  const auto parent = path.parent_path();
  if ((name == "train" || name == "test") && std::filesystem::exists(parent / kManifestFile)) {
    Dataset all = load_dataset(parent);
    const Split want = parse_split(name);
    Dataset out;
    out.manifest.category = all.manifest.category;
    out.manifest.m = all.manifest.m;
    for (size_t i = 0; i < all.records.size(); ++i) {
      if (all.manifest.records[i].split != want) continue;
      out.manifest.records.push_back(all.manifest.records[i]);
      out.records.push_back(std::move(all.records[i]));
    }
    return out;
  }
  throw Error(ErrorCode::kIoError, "no dataset manifest at " + path.string());
}

}  // namespace sgen
