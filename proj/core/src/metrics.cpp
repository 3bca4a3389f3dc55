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

#include "sgen/metrics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "sgen/adjacency_predictor.hpp"
#include "sgen/parallel.hpp"

namespace sgen {

void MetricConfig::validate() const {
  if (jsd_resolution < 2) throw Error(ErrorCode::kInvalidArgument, "JSD resolution must be at least 2");
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorCode::kInvalidArgument, "threshold must be in (0,1)");
  if (!(jsd_extent > 0.0) || emd_exact_max < 1) throw Error(ErrorCode::kInvalidArgument, "bad metric parameters");
}

void to_json(nlohmann::json& j, const MetricConfig& c) {
  j = {{"jsd_resolution", c.jsd_resolution}, {"jsd_extent", c.jsd_extent},
       {"emd_exact_max", c.emd_exact_max},   {"sinkhorn_epsilon", c.sinkhorn_epsilon},
       {"sinkhorn_iterations", c.sinkhorn_iterations}, {"threshold", c.threshold},
       {"with_emd", c.with_emd}};
}

void from_json(const nlohmann::json& j, MetricConfig& c) {
  c.jsd_resolution = j.value("jsd_resolution", c.jsd_resolution);
  c.jsd_extent = j.value("jsd_extent", c.jsd_extent);
  c.emd_exact_max = j.value("emd_exact_max", c.emd_exact_max);
  c.sinkhorn_epsilon = j.value("sinkhorn_epsilon", c.sinkhorn_epsilon);
  c.sinkhorn_iterations = j.value("sinkhorn_iterations", c.sinkhorn_iterations);
  c.threshold = j.value("threshold", c.threshold);
  c.with_emd = j.value("with_emd", c.with_emd);
}

namespace {

double directed_chamfer(const Points& a, const Points& b) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Eigen::RowVector3d ai = a.row(i).cast<double>();
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < b.rows(); ++j) best = std::min(best, (ai - b.row(j).cast<double>()).squaredNorm());
    total += best;
  }
  return total / static_cast<double>(a.rows());
}

}  // namespace

double chamfer(const Points& a, const Points& b) {
  if (a.rows() == 0 || b.rows() == 0) throw Error(ErrorCode::kEmptyCloud, "empty point cloud");
  return directed_chamfer(a, b) + directed_chamfer(b, a);
}

MatrixD distance_matrix(std::span<const Points* const> a, std::span<const Points* const> b, SetKernel kernel,
                        const MetricConfig& config) {
  MatrixD d(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  const size_t cols = b.size();
  parallel_for(
      a.size() * cols,
      [&](size_t k) {
        const size_t i = k / cols, j = k % cols;
        d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            kernel == SetKernel::kChamfer ? chamfer(*a[i], *b[j]) : emd(*a[i], *b[j], config);
      },
      config.workers);
  return d;
}

namespace {

void check_sets(Eigen::Index gen, Eigen::Index ref) {
  if (gen == 0 || ref == 0) throw Error(ErrorCode::kEmptySet, "metric needs non-empty sets");
}

}  // namespace

double mmd_from_distances(const MatrixD& gr) {
  check_sets(gr.rows(), gr.cols());
  return gr.colwise().minCoeff().mean();
}

double cov_from_distances(const MatrixD& gr) {
  check_sets(gr.rows(), gr.cols());
  std::vector<char> matched(static_cast<size_t>(gr.cols()), 0);
  for (Eigen::Index i = 0; i < gr.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < gr.cols(); ++j) {
      if (gr(i, j) < gr(i, best)) best = j;
    }
    matched[static_cast<size_t>(best)] = 1;
  }
  double hits = 0;
  for (char c : matched) hits += c;
  return hits / static_cast<double>(gr.cols());
}

double nna_from_distances(const MatrixD& gg, const MatrixD& rr, const MatrixD& gr) {
  const Eigen::Index g = gg.rows(), r = rr.rows();
  if (g + r < 2) throw Error(ErrorCode::kEmptySet, "1-NNA needs at least two samples");
  if (gg.cols() != g || rr.cols() != r || gr.rows() != g || gr.cols() != r) {
    throw Error(ErrorCode::kSizeMismatch, "distance blocks disagree");
  }
  auto dist = [&](Eigen::Index a, Eigen::Index b) {
    if (a < g && b < g) return gg(a, b);
    if (a >= g && b >= g) return rr(a - g, b - g);
    return a < g ? gr(a, b - g) : gr(b, a - g);
  };
  int correct = 0;
  for (Eigen::Index a = 0; a < g + r; ++a) {
    Eigen::Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index b = 0; b < g + r; ++b) {
      if (b == a) continue;
      const double d = dist(a, b);
      if (best < 0 || d < best_d) {
        best = b;
        best_d = d;
      }
    }
    if ((best < g) == (a < g)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(g + r);
}

double mmd(std::span<const Points* const> gen, std::span<const Points* const> ref, SetKernel kernel,
           const MetricConfig& config) {
  check_sets(static_cast<Eigen::Index>(gen.size()), static_cast<Eigen::Index>(ref.size()));
  return mmd_from_distances(distance_matrix(gen, ref, kernel, config));
}

double cov(std::span<const Points* const> gen, std::span<const Points* const> ref, SetKernel kernel,
           const MetricConfig& config) {
  check_sets(static_cast<Eigen::Index>(gen.size()), static_cast<Eigen::Index>(ref.size()));
  return cov_from_distances(distance_matrix(gen, ref, kernel, config));
}

double nna_1(std::span<const Points* const> gen, std::span<const Points* const> ref, SetKernel kernel,
             const MetricConfig& config) {
  if (gen.size() + ref.size() < 2) throw Error(ErrorCode::kEmptySet, "1-NNA needs at least two samples");
  return nna_from_distances(distance_matrix(gen, gen, kernel, config), distance_matrix(ref, ref, kernel, config),
                            distance_matrix(gen, ref, kernel, config));
}

Eigen::VectorXd occupancy_histogram(std::span<const Points* const> clouds, int resolution, double extent) {
  if (resolution < 2) throw Error(ErrorCode::kInvalidArgument, "JSD resolution must be at least 2");
  Eigen::VectorXd h = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(resolution) * resolution * resolution);
  auto cell = [&](float x) {
    const int c = static_cast<int>(std::floor((static_cast<double>(x) + extent) / (2.0 * extent) * resolution));
    return std::clamp(c, 0, resolution - 1);
  };
  for (const Points* p : clouds) {
    for (Eigen::Index i = 0; i < p->rows(); ++i) {
      const Eigen::Index idx =
          (static_cast<Eigen::Index>(cell((*p)(i, 0))) * resolution + cell((*p)(i, 1))) * resolution + cell((*p)(i, 2));
      h(idx) += 1.0;
    }
  }
  return h;
}

double jsd_distributions(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p(i) + q(i));
    const double tp = p(i) > 0 ? 0.5 * p(i) * std::log(p(i) / m) : 0.0;
    const double tq = q(i) > 0 ? 0.5 * q(i) * std::log(q(i) / m) : 0.0;
    total += tp + tq;  // commutative, so swapping the sets is exact
  }
  return std::max(0.0, total);
}

double jsd(std::span<const Points* const> gen, std::span<const Points* const> ref, int resolution, double extent) {
  check_sets(static_cast<Eigen::Index>(gen.size()), static_cast<Eigen::Index>(ref.size()));
  Eigen::VectorXd p = occupancy_histogram(gen, resolution, extent);
  Eigen::VectorXd q = occupancy_histogram(ref, resolution, extent);
  if (p.sum() == 0 || q.sum() == 0) throw Error(ErrorCode::kEmptySet, "no points to histogram");
  return jsd_distributions(p / p.sum(), q / q.sum());
}

double sca(const BinaryVector& v, const BinaryMatrix& e, const BinaryVector& pv, const BinaryMatrix& pe) {
  const Eigen::Index m = static_cast<Eigen::Index>(v.size());
  if (pv.size() != v.size() || e.rows() != m || e.cols() != m || pe.rows() != m || pe.cols() != m) {
    throw Error(ErrorCode::kSizeMismatch, "structures have different part counts");
  }
  int hits = 0;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (v[static_cast<size_t>(j)] != pv[static_cast<size_t>(j)]) continue;
    for (Eigen::Index k = 0; k < m; ++k) hits += e(j, k) == pe(j, k);
  }
  return static_cast<double>(hits) / static_cast<double>(m * m);
}

double EvalReport::mean_sca() const {
  if (sca.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [code, s] : sca) total += s.sca;
  return total / static_cast<double>(sca.size());
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  nlohmann::json s = nlohmann::json::object();
  for (const auto& [code, v] : r.sca) s[code] = {{"sca", v.sca}, {"count", v.count}};
  j = {{"mmd_cd", r.mmd_cd}, {"cov_cd", r.cov_cd},   {"nna_cd", r.nna_cd},       {"jsd", r.jsd},
       {"has_emd", r.has_emd}, {"sca", s},           {"gen_count", r.gen_count}, {"ref_count", r.ref_count}};
  if (r.has_emd) {
    j["mmd_emd"] = r.mmd_emd;
    j["cov_emd"] = r.cov_emd;
    j["nna_emd"] = r.nna_emd;
  }
}

void from_json(const nlohmann::json& j, EvalReport& r) {
  r.mmd_cd = j.at("mmd_cd").get<double>();
  r.cov_cd = j.at("cov_cd").get<double>();
  r.nna_cd = j.at("nna_cd").get<double>();
  r.jsd = j.at("jsd").get<double>();
  r.has_emd = j.value("has_emd", false);
  if (r.has_emd) {
    r.mmd_emd = j.at("mmd_emd").get<double>();
    r.cov_emd = j.at("cov_emd").get<double>();
    r.nna_emd = j.at("nna_emd").get<double>();
  }
  r.sca.clear();
  for (const auto& [code, v] : j.at("sca").items()) {
    r.sca[code] = {v.at("sca").get<double>(), v.at("count").get<int>()};
  }
  r.gen_count = j.at("gen_count").get<int>();
  r.ref_count = j.at("ref_count").get<int>();
}

std::string report_csv(const EvalReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "metric,value\n";
  out << "mmd_cd," << r.mmd_cd << "\ncov_cd," << r.cov_cd << "\nnna_cd," << r.nna_cd << "\n";
  if (r.has_emd) out << "mmd_emd," << r.mmd_emd << "\ncov_emd," << r.cov_emd << "\nnna_emd," << r.nna_emd << "\n";
  out << "jsd," << r.jsd << "\n";
  out << "\nstructure,sca,count\n";
  for (const auto& [code, s] : r.sca) out << code << "," << s.sca << "," << s.count << "\n";
  if (!r.sca.empty()) out << "mean," << r.mean_sca() << "," << r.gen_count << "\n";
  return out.str();
}

EvalReport evaluate(std::span<const ShapeRecord> gen, std::span<const ShapeRecord> ref,
                    const AdjacencyPredictor* predictor, const MetricConfig& config) {
  config.validate();
  check_sets(static_cast<Eigen::Index>(gen.size()), static_cast<Eigen::Index>(ref.size()));
  std::vector<const Points*> g, r;
  for (const auto& s : gen) g.push_back(&s.cloud.points);
  for (const auto& s : ref) r.push_back(&s.cloud.points);
  EvalReport report;
  report.gen_count = static_cast<int>(gen.size());
  report.ref_count = static_cast<int>(ref.size());
  auto fill = [&](SetKernel kernel, double& mmd_v, double& cov_v, double& nna_v) {
    const MatrixD gr = distance_matrix(g, r, kernel, config);
    mmd_v = mmd_from_distances(gr);
    cov_v = cov_from_distances(gr);
    nna_v = nna_from_distances(distance_matrix(g, g, kernel, config), distance_matrix(r, r, kernel, config), gr);
  };
  fill(SetKernel::kChamfer, report.mmd_cd, report.cov_cd, report.nna_cd);
  if (config.with_emd) {
    fill(SetKernel::kEmd, report.mmd_emd, report.cov_emd, report.nna_emd);
    report.has_emd = true;
  }
  report.jsd = jsd(g, r, config.jsd_resolution, config.jsd_extent);
  if (predictor != nullptr) {
    std::vector<double> scores(gen.size());
    parallel_for(
        gen.size(),
        [&](size_t i) {
          const auto& s = gen[i];
          const auto pred = predictor->predict(s.cloud, s.graph.labels, config.threshold);
          scores[i] = sca(s.graph.existence, s.graph.adjacency, pred.existence, pred.adjacency);
        },
        config.workers);
    for (size_t i = 0; i < gen.size(); ++i) {
      auto& entry = report.sca[gen[i].structure_code];
      entry.sca += scores[i];
      entry.count += 1;
    }
    for (auto& [code, s] : report.sca) s.sca /= s.count;
  }
  return report;
}

}  // namespace sgen
