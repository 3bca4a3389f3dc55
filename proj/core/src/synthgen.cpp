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

#include "sgen/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <nlohmann/json.hpp>

namespace sgen {
namespace {

StructureEntry make_entry(const std::string& code, bool armrest, std::initializer_list<int> armrest_links) {
  StructureEntry e;
  e.code = code;
  e.existence = {1, 1, 1, static_cast<std::uint8_t>(armrest ? 1 : 0)};
  e.adjacency = BinaryMatrix::Zero(kChairParts, kChairParts);
  auto link = [&](int a, int b) {
    e.adjacency(a, b) = 1;
    e.adjacency(b, a) = 1;
  };
  link(kBack, kSeat);
  link(kSeat, kLeg);
  for (int part : armrest_links) link(kArmrest, part);
  return e;
}

ArmrestContacts contacts_for(const StructureEntry& s) {
  ArmrestContacts c;
  if (s.existence[kArmrest] == 0) return c;
  c.back = s.adjacency(kArmrest, kBack) == 1;
  c.seat = s.adjacency(kArmrest, kSeat) == 1;
  c.leg = s.adjacency(kArmrest, kLeg) == 1;
  return c;
}

PartPrimitive box_from_bounds(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, int part) {
  return {(lo + hi) / 2.0, (hi - lo) / 2.0, part};
}

// Uniform point on the surface of a box.
Eigen::Vector3d sample_on_box(const PartPrimitive& b, Rng& rng) {
  const Eigen::Vector3d e = 2.0 * b.half_extents;
  const double areas[3] = {e.y() * e.z(), e.x() * e.z(), e.x() * e.y()};  // faces normal to x, y, z
  const double total = 2.0 * (areas[0] + areas[1] + areas[2]);
  double pick = rng.uniform() * total;
  int axis = 0;
  int side = 0;
  for (int face = 0; face < 6; ++face) {
    const double a = areas[face / 2];
    if (pick < a || face == 5) {
      axis = face / 2;
      side = face % 2;
      break;
    }
    pick -= a;
  }
  Eigen::Vector3d p;
  for (int k = 0; k < 3; ++k) {
    p[k] = k == axis ? (side == 0 ? -1.0 : 1.0) * b.half_extents[k]
                     : rng.uniform(-b.half_extents[k], b.half_extents[k]);
  }
  return b.center + p;
}

// Largest-remainder allocation with every part receiving at least one point.
std::vector<int> allocate(const std::vector<double>& areas, const std::vector<int>& minimum, int n) {
  const double total = std::accumulate(areas.begin(), areas.end(), 0.0);
  std::vector<int> counts(areas.size(), 0);
  std::vector<std::pair<double, size_t>> rema;
  int used = 0;
  for (size_t j = 0; j < areas.size(); ++j) {
    if (areas[j] <= 0.0) continue;
    const double exact = n * areas[j] / total;
    counts[j] = std::max(minimum[j], static_cast<int>(std::floor(exact)));
    used += counts[j];
    rema.emplace_back(exact - std::floor(exact), j);
  }
  std::sort(rema.begin(), rema.end(), [](auto& a, auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  for (size_t i = 0; used < n; i = (i + 1) % rema.size()) {
    ++counts[rema[i].second];
    ++used;
  }
  while (used > n) {
    size_t widest = 0;
    for (size_t j = 0; j < counts.size(); ++j) {
      if (counts[j] - minimum[j] > counts[widest] - minimum[widest]) widest = j;
    }
    if (counts[widest] <= minimum[widest]) break;
    --counts[widest];
    --used;
  }
  return counts;
}

}  // namespace

const std::vector<StructureEntry>& structure_catalog() {
  static const std::vector<StructureEntry> catalog = {
      make_entry("Ch_012", false, {}),
      make_entry("Ch_03", true, {kBack}),
      make_entry("Ch_13", true, {kSeat}),
      make_entry("Ch_23", true, {kLeg}),
      make_entry("Ch_013", true, {kBack, kSeat}),
      make_entry("Ch_023", true, {kBack, kLeg}),
      make_entry("Ch_123", true, {kSeat, kLeg}),
      make_entry("Ch_0123", true, {kBack, kSeat, kLeg}),
  };
  return catalog;
}

const StructureEntry& structure_by_code(const std::string& code) {
  for (const auto& e : structure_catalog()) {
    if (e.code == code) return e;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown structure code '" + code + "'");
}

std::optional<std::string> code_for_structure(const BinaryVector& existence, const BinaryMatrix& adjacency) {
  for (const auto& e : structure_catalog()) {
    if (e.existence == existence && e.adjacency.rows() == adjacency.rows() && e.adjacency.cols() == adjacency.cols() &&
        e.adjacency == adjacency) {
      return e.code;
    }
  }
  return std::nullopt;
}

double PartPrimitive::surface_area() const {
  const Eigen::Vector3d e = 2.0 * half_extents;
  return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.x() * e.z());
}

double box_distance(const PartPrimitive& a, const PartPrimitive& b) {
  const Eigen::Vector3d gap =
      ((a.center - b.center).cwiseAbs() - (a.half_extents + b.half_extents)).cwiseMax(0.0);
  return gap.norm();
}

ArmrestContacts ChairSpec::attach_mode() const { return contacts_for(structure_by_code(structure_code)); }

ChairSpec sample_chair_spec(const std::string& code, const DimensionRanges& r, Rng& rng) {
  structure_by_code(code);
  auto draw = [&](const Range& range) { return rng.uniform(range.lo, range.hi); };
  ChairSpec s;
  s.structure_code = code;
  s.seat_width = draw(r.seat_width);
  s.seat_depth = draw(r.seat_depth);
  s.seat_thickness = draw(r.seat_thickness);
  s.back_height = draw(r.back_height);
  s.back_thickness = draw(r.back_thickness);
  s.leg_height = draw(r.leg_height);
  s.leg_thickness = draw(r.leg_thickness);
  s.armrest_height = draw(r.armrest_height);
  s.armrest_width = draw(r.armrest_width);
  s.armrest_thickness = draw(r.armrest_thickness);
  s.armrest_offset = draw(r.armrest_offset);
  return s;
}

// Coordinates: x across the seat, y up, z towards the front.
std::vector<PartPrimitive> build_primitives(const ChairSpec& s) {
  const auto& structure = structure_by_code(s.structure_code);
  const ArmrestContacts arm = contacts_for(structure);
  const bool has_arm = structure.existence[kArmrest] == 1;
  const double hw = s.seat_width / 2.0;
  const double hd = s.seat_depth / 2.0;
  const double seat_top = s.leg_height + s.seat_thickness;
  const double lt = s.leg_thickness;
  const double inset = 0.01;
  const double bar_y = seat_top + s.armrest_height;

  std::vector<PartPrimitive> boxes;
  boxes.push_back(box_from_bounds({-hw, s.leg_height, -hd}, {hw, seat_top, hd}, kSeat));

  // A back that an outside armrest bar must reach is widened by one leg thickness.
  const double back_hw = (has_arm && arm.back && arm.leg) ? hw + lt : hw;
  const double back_front = -hd + s.back_thickness;
  boxes.push_back(box_from_bounds({-back_hw, seat_top, -hd}, {back_hw, seat_top + s.back_height, back_front}, kBack));

  for (int side : {-1, 1}) {
    const double lx = side * (hw - lt / 2.0 - inset);
    const double rz = -(hd - lt / 2.0 - inset);
    boxes.push_back(box_from_bounds({lx - lt / 2, 0.0, rz - lt / 2}, {lx + lt / 2, s.leg_height, rz + lt / 2}, kLeg));
    const double fz = hd - lt / 2.0 - inset;
    if (has_arm && arm.leg) {
      // Tall front leg flush against the seat side, rising to the armrest bar.
      const double x0 = side > 0 ? hw : -hw - lt;
      boxes.push_back(box_from_bounds({x0, 0.0, fz - lt / 2}, {x0 + lt, bar_y, fz + lt / 2}, kLeg));
    } else {
      boxes.push_back(box_from_bounds({lx - lt / 2, 0.0, fz - lt / 2}, {lx + lt / 2, s.leg_height, fz + lt / 2}, kLeg));
    }
  }

  if (has_arm) {
    const double aw = s.armrest_width;
    const double z_front = hd - inset;
    const double z_rear = arm.back ? back_front : back_front + s.armrest_offset;
    for (int side : {-1, 1}) {
      double inner = hw - aw;
      double outer = hw;
      if (arm.leg) {
        inner = arm.seat ? hw - aw : hw;
        outer = hw + lt;
      }
      const double x_lo = side > 0 ? inner : -outer;
      const double x_hi = side > 0 ? outer : -inner;
      boxes.push_back(box_from_bounds({x_lo, bar_y, z_rear}, {x_hi, bar_y + s.armrest_thickness, z_front}, kArmrest));
      if (arm.seat) {
        const double px_lo = side > 0 ? hw - aw : -hw;
        const double px_hi = side > 0 ? hw : -hw + aw;
        boxes.push_back(box_from_bounds({px_lo, seat_top, z_front - aw}, {px_hi, bar_y, z_front}, kArmrest));
      }
    }
  }
  return boxes;
}

bool contacts_match_structure(const std::vector<PartPrimitive>& boxes, const StructureEntry& structure) {
  const int m = structure.existence.size();
  for (int j = 0; j < m; ++j) {
    for (int k = j + 1; k < m; ++k) {
      double best = std::numeric_limits<double>::infinity();
      bool any = false;
      for (const auto& a : boxes) {
        if (a.part_index != j) continue;
        for (const auto& b : boxes) {
          if (b.part_index != k) continue;
          best = std::min(best, box_distance(a, b));
          any = true;
        }
      }
      if (!any) {
        if (structure.adjacency(j, k) == 1) return false;
        continue;
      }
      if (structure.adjacency(j, k) == 1 ? !(best < kContactEpsilon) : !(best >= 4.0 * kContactEpsilon)) return false;
    }
  }
  return true;
}

ShapeRecord make_shape(const ChairSpec& spec, int n, std::uint64_t seed, double surface_noise) {
  const auto& structure = structure_by_code(spec.structure_code);
  const int m = kChairParts;
  if (n < m) throw Error(ErrorCode::kInvalidArgument, "n must be at least the part count");
  const auto boxes = build_primitives(spec);
  if (!contacts_match_structure(boxes, structure)) {
    throw Error(ErrorCode::kGeometryInfeasible, "dimensions do not realize " + spec.structure_code);
  }

  std::vector<double> areas(m, 0.0);
  for (const auto& b : boxes) areas[b.part_index] += b.surface_area();
  // Every part needs one anchor per incident edge.
  std::vector<int> minimum(m, 0);
  for (int j = 0; j < m; ++j) {
    if (!structure.existence[j]) continue;
    int degree = 0;
    for (int k = 0; k < m; ++k) degree += structure.adjacency(j, k);
    minimum[j] = std::max(1, degree);
  }
  const std::vector<int> counts = allocate(areas, minimum, n);
  if (std::accumulate(counts.begin(), counts.end(), 0) != n) {
    throw Error(ErrorCode::kInvalidArgument, "too few points for the contact anchors of " + spec.structure_code);
  }

  // Contact regions: intersections of touching boxes from adjacent parts.
  struct Contact {
    int a, b;
    Eigen::Vector3d lo, hi;
  };
  std::vector<Contact> contacts;
  for (const auto& a : boxes) {
    for (const auto& b : boxes) {
      if (a.part_index >= b.part_index || structure.adjacency(a.part_index, b.part_index) == 0) continue;
      if (box_distance(a, b) > 0.0) continue;
      contacts.push_back({a.part_index, b.part_index, a.lo().cwiseMax(b.lo()), a.hi().cwiseMin(b.hi())});
    }
  }

  for (int attempt = 0; attempt < kMaxGeometryAttempts; ++attempt) {
    Rng rng = Rng(seed).fork(static_cast<std::uint64_t>(attempt));
    std::vector<Eigen::Vector3d> pts;
    std::vector<int> labels;
    pts.reserve(n);
    labels.reserve(n);
    std::vector<int> remaining = counts;

    // Coincident anchor points on each contact, one per part: a first round
    // over all edges, then a second where points remain.
    for (int rep = 0; rep < 2; ++rep) {
      for (int j = 0; j < m; ++j) {
        for (int k = j + 1; k < m; ++k) {
          if (structure.adjacency(j, k) == 0) continue;
          std::vector<const Contact*> options;
          for (const auto& c : contacts) {
            if (c.a == j && c.b == k) options.push_back(&c);
          }
          if (options.empty() || remaining[j] < 1 || remaining[k] < 1) continue;
          const Contact& c = *options[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(options.size()) - 1))];
          Eigen::Vector3d p;
          for (int axis = 0; axis < 3; ++axis) p[axis] = c.lo[axis] + rng.uniform() * (c.hi[axis] - c.lo[axis]);
          for (int part : {j, k}) {
            pts.push_back(p);
            labels.push_back(part);
            --remaining[part];
          }
        }
      }
    }
    for (int j = 0; j < m; ++j) {
      std::vector<const PartPrimitive*> own;
      std::vector<double> cumulative;
      double acc = 0.0;
      for (const auto& b : boxes) {
        if (b.part_index != j) continue;
        own.push_back(&b);
        acc += b.surface_area();
        cumulative.push_back(acc);
      }
      for (int i = 0; i < remaining[j]; ++i) {
        const double pick = rng.uniform() * acc;
        size_t which = std::lower_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin();
        which = std::min(which, own.size() - 1);
        pts.push_back(sample_on_box(*own[which], rng));
        labels.push_back(j);
      }
    }
    if (surface_noise > 0.0) {
      for (auto& p : pts) {
        for (int axis = 0; axis < 3; ++axis) p[axis] += surface_noise * rng.gaussian();
      }
    }
    std::vector<size_t> order(pts.size());
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    }

    PointCloud raw;
    raw.points.resize(n, 3);
    std::vector<int> shuffled(n);
    for (int i = 0; i < n; ++i) {
      raw.points.row(i) = pts[order[i]].cast<float>().transpose();
      shuffled[i] = labels[order[i]];
    }

    ShapeRecord record;
    record.cloud = normalize_cloud(raw);
    record.graph.labels = one_hot_labels(shuffled, m);
    record.graph.existence = structure.existence;
    record.graph.adjacency = structure.adjacency;
    record.structure_code = spec.structure_code;
    if (adjacency_from_parts(record.cloud, record.graph.labels) == structure.adjacency) return record;
  }
  throw Error(ErrorCode::kGeometryInfeasible, "sampled points never reproduced " + spec.structure_code);
}

ShapeRecord generate_shape(const std::string& code, int n, const DimensionRanges& ranges, std::uint64_t seed,
                           double surface_noise) {
  const auto& structure = structure_by_code(code);
  Rng rng(seed);
  for (int attempt = 0; attempt < kMaxGeometryAttempts; ++attempt) {
    ChairSpec spec = sample_chair_spec(code, ranges, rng);
    if (!contacts_match_structure(build_primitives(spec), structure)) continue;
    try {
      return make_shape(spec, n, rng.next_u64(), surface_noise);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kGeometryInfeasible) throw;
    }
  }
  throw Error(ErrorCode::kGeometryInfeasible, "no feasible dimensions for " + code);
}

Dataset make_dataset(const GeneratorConfig& config) {
  if (config.n < kChairParts) throw Error(ErrorCode::kInvalidArgument, "n must be >= m");
  if (config.count_per_code < 0) throw Error(ErrorCode::kInvalidArgument, "negative count");
  std::vector<std::string> codes = config.codes;
  if (codes.empty()) {
    for (const auto& e : structure_catalog()) codes.push_back(e.code);
  }
  Dataset ds;
  ds.manifest.category = "chair";
  ds.manifest.m = kChairParts;
  for (const auto& code : codes) {
    for (int i = 0; i < config.count_per_code; ++i) {
      char suffix[16];
      std::snprintf(suffix, sizeof(suffix), "-%04d", i);
      const std::string id = code + suffix;
      const std::uint64_t shape_seed = splitmix64(config.seed ^ fnv1a(id.data(), id.size()));
      ShapeRecord record = generate_shape(code, config.n, config.ranges, shape_seed, config.surface_noise);
      record.shape_id = id;
      ds.manifest.records.push_back({id, code, Split::kTrain, ""});
      ds.records.push_back(std::move(record));
    }
  }
  // Rank by hash of shape_id; the first train_fraction of the ranking trains.
  std::vector<size_t> order(ds.records.size());
  std::iota(order.begin(), order.end(), size_t{0});
  auto key = [&](size_t i) {
    const auto& id = ds.records[i].shape_id;
    return fnv1a(id.data(), id.size());
  };
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return key(a) < key(b) || (key(a) == key(b) && a < b); });
  const size_t train = static_cast<size_t>(std::llround(config.train_fraction * static_cast<double>(order.size())));
  for (size_t r = 0; r < order.size(); ++r) {
    ds.manifest.records[order[r]].split = r < train ? Split::kTrain : Split::kTest;
  }
  return ds;
}

GeneratorConfig generator_config_from_json(const std::string& text) {
  GeneratorConfig c;
  const auto j = nlohmann::json::parse(text);
  c.n = j.value("n", c.n);
  c.count_per_code = j.value("count_per_code", c.count_per_code);
  c.surface_noise = j.value("surface_noise", c.surface_noise);
  c.seed = j.value("seed", c.seed);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  if (j.contains("codes")) c.codes = j["codes"].get<std::vector<std::string>>();
  if (j.contains("ranges")) {
    auto& r = c.ranges;
    const auto& jr = j["ranges"];
    auto read = [&](const char* key, Range& range) {
      if (jr.contains(key)) {
        range.lo = jr[key].at(0).get<double>();
        range.hi = jr[key].at(1).get<double>();
      }
    };
    read("seat_width", r.seat_width);
    read("seat_depth", r.seat_depth);
    read("seat_thickness", r.seat_thickness);
    read("back_height", r.back_height);
    read("back_thickness", r.back_thickness);
    read("leg_height", r.leg_height);
    read("leg_thickness", r.leg_thickness);
    read("armrest_height", r.armrest_height);
    read("armrest_width", r.armrest_width);
    read("armrest_thickness", r.armrest_thickness);
    read("armrest_offset", r.armrest_offset);
  }
  if (c.n < kChairParts) throw Error(ErrorCode::kInvalidArgument, "n must be >= m");
  return c;
}

}  // namespace sgen
