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

#include "sgen/adjacency_predictor.hpp"

#include <cmath>

#include "sgen/checkpoint.hpp"

namespace sgen {

using ad::Var;

void PredictorConfig::validate() const {
  if (hidden < 1 || iterations < 1 || batch_size < 1 || !(lr > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "predictor sizes must be positive");
  }
  if (!(gate > 0.0 && gate <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "gate must be in (0,1]");
}

void to_json(nlohmann::json& j, const PredictorConfig& c) {
  j = {{"hidden", c.hidden}, {"iterations", c.iterations}, {"lr", c.lr},
       {"batch_size", c.batch_size}, {"seed", c.seed}, {"gate", c.gate}};
}

void from_json(const nlohmann::json& j, PredictorConfig& c) {
  c.hidden = j.value("hidden", c.hidden);
  c.iterations = j.value("iterations", c.iterations);
  c.lr = j.value("lr", c.lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.gate = j.value("gate", c.gate);
}

StructurePrediction decide_structure(const Eigen::VectorXd& vl, const MatrixD& el, double threshold) {
  const Eigen::Index m = vl.size();
  // sigmoid(x) > threshold  <=>  x > logit(threshold)
  const double cut = std::log(threshold / (1.0 - threshold));
  StructurePrediction out;
  out.existence.assign(static_cast<size_t>(m), 0);
  for (Eigen::Index j = 0; j < m; ++j) out.existence[static_cast<size_t>(j)] = vl(j) > cut;
  out.adjacency = BinaryMatrix::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index k = 0; k < m; ++k) {
      if (j == k || !out.existence[static_cast<size_t>(j)] || !out.existence[static_cast<size_t>(k)]) continue;
      out.adjacency(j, k) = 0.5 * (el(j, k) + el(k, j)) > cut;
    }
  }
  return out;
}

StructureGraph observed_graph(const BinaryMatrix& labels) {
  StructureGraph g;
  g.labels = labels;
  const auto counts = part_counts(labels);
  for (int c : counts) g.existence.push_back(c > 0);
  g.adjacency = BinaryMatrix::Zero(labels.cols(), labels.cols());
  return g;
}

namespace {

constexpr const char* kHead = "pred/";
constexpr const char* kNorm = "pred/norm/";

}  // namespace

AdjacencyPredictor::AdjacencyPredictor(const SgnConfig& sgn, int m, const ParamStore<float>& encoder, int hidden,
                                       std::uint64_t seed)
    : sgn_(sgn), m_(m), hidden_(hidden) {
  for (const auto& name : encoder.names()) {
    if (name.rfind("sgn/", 0) == 0) params_.add(name, encoder.at(name).value);
  }
  if (params_.names().empty()) throw Error(ErrorCode::kCheckpointMismatch, "no encoder parameters to freeze");
  Rng rng(seed);
  const int f = feature_dim();
  params_.add(std::string(kNorm) + "mean", MatrixF::Zero(1, f));
  params_.add(std::string(kNorm) + "scale", MatrixF::Ones(1, f));
  ad::register_linear(params_, "pred/l0", f, hidden, rng);
  ad::register_linear(params_, "pred/l1", hidden, hidden, rng);
  ad::register_linear(params_, "pred/out", hidden, m + m * m, rng);
}

MatrixF AdjacencyPredictor::features(const PointCloud& cloud, const BinaryMatrix& labels) const {
  const StructureGraph g = observed_graph(labels);
  if (auto err = validate_structuregraph(g, cloud.size())) throw Error(*err, "predictor input");
  if (g.part_count() != m_) throw Error(ErrorCode::kCheckpointMismatch, "label width differs from predictor");
  auto batch = GraphBatch<float>::from(cloud, g);
  ad::Tape<float> tape(false);
  // No-grad tapes only read parameter values.
  auto& store = const_cast<ParamStore<float>&>(params_);
  const MatrixF nodes = tape.value(sgn_node_features(tape, store, sgn_, batch));
  return Eigen::Map<const MatrixF>(nodes.data(), 1, nodes.size());
}

namespace {

Var head(ad::Tape<float>& tape, ParamStore<float>& store, Var x) {
  x = ad::mul_row(tape, ad::add_row(tape, x, ad::scale(tape, tape.param(store, "pred/norm/mean"), -1.0f)),
                  tape.param(store, "pred/norm/scale"));
  x = ad::silu(tape, ad::linear(tape, store, "pred/l0", x));
  x = ad::silu(tape, ad::linear(tape, store, "pred/l1", x));
  return ad::linear(tape, store, "pred/out", x);
}

}  // namespace

MatrixF AdjacencyPredictor::head_logits(const MatrixF& features) const {
  ad::Tape<float> tape(false);
  auto& store = const_cast<ParamStore<float>&>(params_);
  return tape.value(head(tape, store, tape.constant(features)));
}

StructurePrediction AdjacencyPredictor::predict_from_features(const MatrixF& row, double threshold) const {
  const MatrixF logits = head_logits(row);
  Eigen::VectorXd vl(m_);
  MatrixD el(m_, m_);
  for (int j = 0; j < m_; ++j) vl(j) = logits(0, j);
  for (int j = 0; j < m_; ++j) {
    for (int k = 0; k < m_; ++k) el(j, k) = logits(0, m_ + j * m_ + k);
  }
  return decide_structure(vl, el, threshold);
}

StructurePrediction AdjacencyPredictor::predict(const PointCloud& cloud, const BinaryMatrix& labels,
                                                double threshold) const {
  return predict_from_features(features(cloud, labels), threshold);
}

void AdjacencyPredictor::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  nlohmann::json meta = extra;
  meta["kind"] = "sgen-predictor";
  meta["sgn"] = sgn_;
  meta["m"] = m_;
  meta["hidden"] = hidden_;
  save_checkpoint(path, params_, meta);
}

AdjacencyPredictor AdjacencyPredictor::load(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  if (!ck.meta.is_object() || ck.meta.value("kind", "") != "sgen-predictor") {
    throw Error(ErrorCode::kCheckpointMismatch, path.string() + " is not a predictor file");
  }
  AdjacencyPredictor p;
  try {
    p.sgn_ = ck.meta.at("sgn").get<SgnConfig>();
    p.m_ = ck.meta.at("m").get<int>();
    p.hidden_ = ck.meta.at("hidden").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCheckpointMismatch, std::string("predictor header: ") + e.what());
  }
  AdjacencyPredictor expected(p.sgn_, p.m_, ck.params, p.hidden_, 0);
  for (const auto& name : expected.params_.names()) {
    if (!ck.params.contains(name) || ck.params.at(name).value.rows() != expected.params_.at(name).value.rows() ||
        ck.params.at(name).value.cols() != expected.params_.at(name).value.cols()) {
      throw Error(ErrorCode::kCheckpointMismatch, "predictor parameter " + name + " missing or misshapen");
    }
  }
  p.params_ = std::move(ck.params);
  return p;
}

double structure_accuracy(const StructurePrediction& pred, const StructureGraph& truth) {
  const int m = truth.part_count();
  int hits = 0, total = 0;
  for (int j = 0; j < m; ++j) {
    hits += pred.existence[static_cast<size_t>(j)] == truth.existence[static_cast<size_t>(j)];
    ++total;
    for (int k = j + 1; k < m; ++k) {
      hits += pred.adjacency(j, k) == truth.adjacency(j, k);
      ++total;
    }
  }
  return static_cast<double>(hits) / total;
}

double predictor_accuracy(const AdjacencyPredictor& predictor, std::span<const ShapeRecord> records) {
  if (records.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : records) total += structure_accuracy(predictor.predict(r.cloud, r.graph.labels), r.graph);
  return total / static_cast<double>(records.size());
}

PredictorTrainResult train_adjacency_predictor(std::span<const ShapeRecord> train, std::span<const ShapeRecord> heldout,
                                               const SgnConfig& sgn, const ParamStore<float>& encoder, int m,
                                               const PredictorConfig& config, bool shuffle_targets) {
  config.validate();
  if (train.empty()) throw Error(ErrorCode::kDatasetInvalid, "predictor training set is empty");
  PredictorTrainResult result;
  AdjacencyPredictor& pred = result.predictor;
  pred = AdjacencyPredictor(sgn, m, encoder, config.hidden, config.seed);
  Rng rng(config.seed);

  const Eigen::Index n = static_cast<Eigen::Index>(train.size());
  const int f = pred.feature_dim();
  MatrixF feats(n, f);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = train[static_cast<size_t>(i)];
    feats.row(i) = pred.features(r.cloud, r.graph.labels);
  }
  // Targets: V then row-major E; the diagonal carries no weight.
  std::vector<size_t> target_of(static_cast<size_t>(n));
  for (size_t i = 0; i < target_of.size(); ++i) target_of[i] = i;
  if (shuffle_targets) {
    for (size_t i = target_of.size(); i > 1; --i) {
      std::swap(target_of[i - 1], target_of[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    }
  }
  MatrixF targets = MatrixF::Zero(n, m + m * m), weights = MatrixF::Ones(n, m + m * m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& g = train[target_of[static_cast<size_t>(i)]].graph;
    for (int j = 0; j < m; ++j) {
      targets(i, j) = g.existence[static_cast<size_t>(j)];
      for (int k = 0; k < m; ++k) targets(i, m + j * m + k) = g.adjacency(j, k);
      weights(i, m + j * m + j) = 0;
    }
  }
  const Eigen::RowVectorXf mean = feats.colwise().mean();
  const Eigen::RowVectorXf sd =
      ((feats.rowwise() - mean).array().square().colwise().sum() / static_cast<float>(n)).sqrt();
  pred.params().at("pred/norm/mean").value = mean;
  pred.params().at("pred/norm/scale").value = (sd.array() > 1e-6f).select(sd.array().inverse(), 1.0f).matrix();

  AdamState adam;
  adam.lr = config.lr;
  adam.frozen_prefixes = {"sgn/", kNorm};
  const Eigen::Index bs = std::min<Eigen::Index>(n, config.batch_size);
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  size_t cursor = order.size();
  for (int it = 0; it < config.iterations; ++it) {
    std::vector<int> rows;
    while (static_cast<Eigen::Index>(rows.size()) < bs) {
      if (cursor == order.size()) {
        for (size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
        }
        cursor = 0;
      }
      rows.push_back(order[cursor++]);
    }
    MatrixF x(bs, f), y(bs, m + m * m), w(bs, m + m * m);
    for (Eigen::Index i = 0; i < bs; ++i) {
      x.row(i) = feats.row(rows[static_cast<size_t>(i)]);
      y.row(i) = targets.row(rows[static_cast<size_t>(i)]);
      w.row(i) = weights.row(rows[static_cast<size_t>(i)]);
    }
    ad::Tape<float> tape(true);
    Var loss = ad::bce_with_logits(tape, head(tape, pred.params(), tape.constant(std::move(x))), std::move(y),
                                   std::move(w));
    tape.backward(loss);
    adam_step(pred.params(), adam);
  }

  double train_acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    train_acc += structure_accuracy(pred.predict_from_features(feats.row(i)),
                                    train[target_of[static_cast<size_t>(i)]].graph);
  }
  result.train_accuracy = train_acc / static_cast<double>(n);
  result.heldout_accuracy = predictor_accuracy(pred, heldout);
  result.gate_passed = !heldout.empty() && result.heldout_accuracy >= config.gate;
  return result;
}

}  // namespace sgen
