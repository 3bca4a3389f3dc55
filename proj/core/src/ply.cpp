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

#include "sgen/ply.hpp"

#include <charconv>
#include <sstream>

#include "sgen/dataset_io.hpp"

namespace sgen {

std::string ply_string(const PointCloud& cloud, const BinaryMatrix& labels) {
  if (labels.rows() != cloud.size()) throw Error(ErrorCode::kRowCountMismatch, "labels and points differ in count");
  const auto parts = label_indices(labels);
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) +
                    "\nproperty float x\nproperty float y\nproperty float z\nproperty uchar part\nend_header\n";
  char buf[32];
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      auto res = std::to_chars(buf, buf + sizeof buf, cloud.points(i, c));
      out.append(buf, res.ptr);
      out.push_back(' ');
    }
    out += std::to_string(parts[static_cast<size_t>(i)]);
    out.push_back('\n');
  }
  return out;
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud, const BinaryMatrix& labels) {
  write_file_atomic(path, ply_string(cloud, labels));
}

PlyData parse_ply(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  long long n = -1;
  bool ended = false;
  if (!std::getline(in, line) || line != "ply") throw Error(ErrorCode::kCorruptRecord, "missing ply magic");
  while (std::getline(in, line)) {
    if (line == "end_header") {
      ended = true;
      break;
    }
    if (line.rfind("format", 0) == 0 && line != "format ascii 1.0") {
      throw Error(ErrorCode::kCorruptRecord, "only ASCII PLY is supported");
    }
    if (line.rfind("element vertex ", 0) == 0) n = std::stoll(line.substr(15));
  }
  if (!ended || n < 0) throw Error(ErrorCode::kCorruptRecord, "incomplete PLY header");
  PlyData d;
  d.cloud.points.resize(n, 3);
  d.parts.resize(static_cast<size_t>(n));
  for (long long i = 0; i < n; ++i) {
    std::string tok[4];
    if (!(in >> tok[0] >> tok[1] >> tok[2] >> tok[3])) throw Error(ErrorCode::kCorruptRecord, "truncated PLY body");
    for (int c = 0; c < 3; ++c) {
      const auto res = std::from_chars(tok[c].data(), tok[c].data() + tok[c].size(), d.cloud.points(i, c));
      if (res.ec != std::errc()) throw Error(ErrorCode::kCorruptRecord, "bad PLY coordinate " + tok[c]);
    }
    d.parts[static_cast<size_t>(i)] = std::stoi(tok[3]);
  }
  return d;
}

PlyData read_ply(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_ply(std::string(bytes.begin(), bytes.end()));
}

}  // namespace sgen
