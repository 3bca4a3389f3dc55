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

// sgen: dataset generation, training, sampling, predictor training and
// evaluation from the command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif
#include <nlohmann/json.hpp>

#include "sgen/adjacency_predictor.hpp"
#include "sgen/dataset_io.hpp"
#include "sgen/metrics.hpp"
#include "sgen/model.hpp"
#include "sgen/parallel.hpp"
#include "sgen/ply.hpp"
#include "sgen/synthgen.hpp"
#include "sgen/trainer.hpp"

namespace fs = std::filesystem;
using namespace sgen;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitGate = 4;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonfiniteState:
    case ErrorCode::kNonfiniteLoss:
    case ErrorCode::kNondeterministicLoss:
      return kExitNumeric;
    case ErrorCode::kUndertrainedPredictor:
      return kExitGate;
    default:
      return kExitInvalid;
  }
}

nlohmann::json read_json(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path + ": " + e.what());
  }
}

std::vector<int> parse_ints(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "not an integer list: " + text);
    }
  }
  return out;
}

/// Loads a dataset or a split, mapping load failures to DATASET_INVALID.
Dataset load_data(const fs::path& path) {
  try {
    return load_dataset_or_split(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::kDatasetInvalid, e.what());
  }
}

std::vector<ShapeRecord> split_records(const Dataset& d, Split split) {
  std::vector<ShapeRecord> out;
  for (size_t i = 0; i < d.records.size(); ++i) {
    if (d.manifest.records[i].split == split) out.push_back(d.records[i]);
  }
  return out;
}

// --------------------------------------------------------------------------
// dataset

struct DatasetArgs {
  std::string config, out;
  std::optional<int> n, count_per_code;
  std::optional<std::uint64_t> seed;
};

int run_dataset(const DatasetArgs& a) {
  GeneratorConfig g;
  if (!a.config.empty()) g = generator_config_from_json(read_json(a.config).dump());
  if (a.n) g.n = *a.n;
  if (a.count_per_code) g.count_per_code = *a.count_per_code;
  if (a.seed) g.seed = *a.seed;
  Dataset d = make_dataset(g);
  save_dataset(a.out, d.manifest, d.records);
  std::printf("wrote %zu shapes to %s\n", d.records.size(), a.out.c_str());
  return 0;
}

// --------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config, data, out, preset;
  std::optional<double> lambda, lr, clip_norm;
  std::optional<int> batch_size, iterations, checkpoint_every, log_every, diffusion_points, T;
  std::optional<std::uint64_t> seed;
  bool staged = false;
};

int run_train(const TrainArgs& a) {
  const nlohmann::json j = read_json(a.config);
  TrainConfig c;
  const std::string preset = !a.preset.empty() ? a.preset : j.value("preset", std::string("default"));
  if (preset == "compact") {
    c.model = compact_model_config();
  } else if (preset != "default") {
    throw Error(ErrorCode::kInvalidArgument, "unknown preset " + preset);
  }
  if (j.contains("model")) {
    nlohmann::json merged = c.model;
    merged.merge_patch(j.at("model"));
    c.model = merged.get<ModelConfig>();
  }
  nlohmann::json rest = j;
  rest.erase("model");
  rest.erase("preset");
  nlohmann::json base = c;
  base.merge_patch(rest);
  c = base.get<TrainConfig>();
  if (a.lambda) c.lambda = *a.lambda;
  if (a.lr) c.lr = *a.lr;
  if (a.clip_norm) c.clip_norm = *a.clip_norm;
  if (a.batch_size) c.batch_size = *a.batch_size;
  if (a.iterations) c.iterations = *a.iterations;
  if (a.checkpoint_every) c.checkpoint_every = *a.checkpoint_every;
  if (a.log_every) c.log_every = *a.log_every;
  if (a.diffusion_points) c.diffusion_points = *a.diffusion_points;
  if (a.T) c.model.T = *a.T;
  if (a.seed) c.seed = *a.seed;
  if (a.staged) c.staged = true;

  const Dataset d = load_data(a.data);
  std::vector<ShapeRecord> train = split_records(d, Split::kTrain);
  // A split directory holds only its own records.
  if (train.empty()) train = d.records;
  auto manifest = train_model(c, train, a.out, [](const LossPoint& p) {
    std::printf("step %lld prior %.6f diff %.6f total %.6f\n", static_cast<long long>(p.step), p.prior, p.diffusion,
                p.total);
    std::fflush(stdout);
  });
  std::printf("checkpoint %s (%.1f s)\n", manifest.checkpoint.c_str(), manifest.wall_seconds);
  return 0;
}

// --------------------------------------------------------------------------
// sample

struct SampleArgs {
  std::string ckpt, structure, existence, adjacency, labels, out;
  int count = 1;
  int points = 512;
  std::uint64_t seed = 1;
};

BinaryMatrix read_labels(const std::string& path, int m) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::vector<int> idx;
  int v;
  while (in >> v) {
    if (v < 0 || v >= m) throw Error(ErrorCode::kNonOnehotRow, "label out of range in " + path);
    idx.push_back(v);
  }
  return one_hot_labels(idx, m);
}

int run_sample(const SampleArgs& a) {
  const GenerativeModel model = load_model(a.ckpt);
  const int m = model.config.m;
  std::vector<StructureEntry> structures;
  if (!a.existence.empty() || !a.adjacency.empty()) {
    const auto v = parse_ints(a.existence), e = parse_ints(a.adjacency);
    if (static_cast<int>(v.size()) != m || static_cast<int>(e.size()) != m * m) {
      throw Error(ErrorCode::kCheckpointMismatch, "explicit structure must have m and m*m entries");
    }
    StructureEntry s;
    s.existence.assign(v.begin(), v.end());
    s.adjacency = BinaryMatrix(m, m);
    for (int i = 0; i < m * m; ++i) s.adjacency(i / m, i % m) = static_cast<std::uint8_t>(e[static_cast<size_t>(i)]);
    s.code = code_for_structure(s.existence, s.adjacency).value_or("custom");
    structures.push_back(s);
  } else if (a.structure == "all") {
    structures = structure_catalog();
  } else {
    std::stringstream ss(a.structure);
    std::string code;
    while (std::getline(ss, code, ',')) structures.push_back(structure_by_code(code));
  }
  if (structures.empty()) throw Error(ErrorCode::kInvalidArgument, "no structure given");
  std::optional<BinaryMatrix> labels;
  if (!a.labels.empty()) labels = read_labels(a.labels, m);

  std::vector<SampleRequest> requests;
  std::vector<std::string> ids;
  Rng root(a.seed);
  for (const auto& s : structures) {
    for (int i = 0; i < a.count; ++i) {
      const std::uint64_t k = requests.size();
      requests.push_back({s.existence, s.adjacency, labels, a.points, root.fork(k).next_u64()});
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s_%04d", s.code.c_str(), i);
      ids.push_back(buf);
    }
  }
  std::vector<ShapeRecord> records(requests.size());
  parallel_for(requests.size(), [&](size_t i) {
    records[i] = sample_shape(model, requests[i]);
    records[i].shape_id = ids[i];
  });
  fs::create_directories(a.out);
  DatasetManifest manifest;
  manifest.m = m;
  for (const auto& r : records) {
    write_ply(fs::path(a.out) / (r.shape_id + ".ply"), r.cloud, r.graph.labels);
    manifest.records.push_back({r.shape_id, r.structure_code, Split::kTest, ""});
  }
  save_dataset(a.out, manifest, records);
  std::printf("wrote %zu shapes to %s\n", records.size(), a.out.c_str());
  return 0;
}

// --------------------------------------------------------------------------
// predictor

struct PredictorArgs {
  std::string data, ckpt, out;
  std::optional<int> iterations, hidden;
  std::optional<double> lr, gate;
  std::optional<std::uint64_t> seed;
  bool strict = false;
};

int run_predictor(const PredictorArgs& a) {
  const GenerativeModel model = load_model(a.ckpt);
  const Dataset d = load_data(a.data);
  std::vector<ShapeRecord> train = split_records(d, Split::kTrain), test = split_records(d, Split::kTest);
  if (train.empty()) throw Error(ErrorCode::kDatasetInvalid, "no training shapes for the predictor");
  if (test.empty()) {
    std::fprintf(stderr, "warning: no test split; held-out accuracy uses the training shapes\n");
    test = train;
  }
  PredictorConfig c;
  if (a.iterations) c.iterations = *a.iterations;
  if (a.hidden) c.hidden = *a.hidden;
  if (a.lr) c.lr = *a.lr;
  if (a.gate) c.gate = *a.gate;
  if (a.seed) c.seed = *a.seed;
  auto result = train_adjacency_predictor(train, test, model.config.sgn, model.params, model.config.m, c);
  result.predictor.save(a.out, {{"train_accuracy", result.train_accuracy},
                                {"heldout_accuracy", result.heldout_accuracy},
                                {"gate", c.gate}});
  std::printf("train accuracy %.4f held-out accuracy %.4f (gate %.2f)\n", result.train_accuracy,
              result.heldout_accuracy, c.gate);
  if (!result.gate_passed) {
    const std::string msg = "held-out accuracy below the gate; SCA from this predictor is not meaningful";
    if (a.strict) throw Error(ErrorCode::kUndertrainedPredictor, msg);
    std::fprintf(stderr, "warning: UNDERTRAINED_PREDICTOR: %s\n", msg.c_str());
  }
  return 0;
}

// --------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string gen, ref, predictor, out, config;
  bool sca = false;
  bool no_emd = false;
  std::optional<int> jsd_resolution;
};

int run_eval(const EvalArgs& a) {
  MetricConfig c;
  const nlohmann::json j = read_json(a.config);
  if (!j.empty()) c = j.get<MetricConfig>();
  if (a.no_emd) c.with_emd = false;
  if (a.jsd_resolution) c.jsd_resolution = *a.jsd_resolution;
  if (a.sca && a.predictor.empty()) {
    throw Error(ErrorCode::kPredictorRequired, "--sca needs --predictor");
  }
  const Dataset gen = load_data(a.gen), ref = load_data(a.ref);
  if (gen.records.empty() || ref.records.empty()) throw Error(ErrorCode::kEmptySet, "empty generated or reference set");
  std::optional<AdjacencyPredictor> predictor;
  if (!a.predictor.empty()) predictor = AdjacencyPredictor::load(a.predictor);
  const EvalReport report = evaluate(gen.records, ref.records, predictor ? &*predictor : nullptr, c);
  fs::create_directories(a.out);
  write_file_atomic(fs::path(a.out) / "report.json", nlohmann::json(report).dump(2));
  write_file_atomic(fs::path(a.out) / "report.csv", report_csv(report));
  std::printf("mmd_cd %.6g cov_cd %.4f nna_cd %.4f jsd %.6g", report.mmd_cd, report.cov_cd, report.nna_cd, report.jsd);
  if (report.has_emd) std::printf(" mmd_emd %.6g cov_emd %.4f nna_emd %.4f", report.mmd_emd, report.cov_emd, report.nna_emd);
  std::printf("\n");
  for (const auto& [code, s] : report.sca) std::printf("sca %s %.4f (%d)\n", code.c_str(), s.sca, s.count);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-controlled point cloud generation"};
  app.require_subcommand(1);

  DatasetArgs da;
  auto* ds = app.add_subcommand("dataset", "Generate the synthetic chair dataset");
  ds->add_option("--config", da.config, "Generator JSON config");
  ds->add_option("--out", da.out, "Output directory")->required();
  ds->add_option("--n", da.n, "Points per shape");
  ds->add_option("--count-per-code", da.count_per_code, "Shapes per structure code");
  ds->add_option("--seed", da.seed, "Generator seed");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train encoder, priors and denoiser");
  tr->add_option("--config", ta.config, "Training JSON config");
  tr->add_option("--data", ta.data, "Dataset directory or split")->required();
  tr->add_option("--out", ta.out, "Run directory")->required();
  tr->add_option("--preset", ta.preset, "Module sizes: default or compact");
  tr->add_option("--lambda", ta.lambda, "Prior loss weight");
  tr->add_option("--lr", ta.lr, "Learning rate");
  tr->add_option("--clip-norm", ta.clip_norm, "Gradient norm clip (0 disables)");
  tr->add_option("--batch-size", ta.batch_size, "Shapes per batch");
  tr->add_option("--iterations", ta.iterations, "Optimizer steps");
  tr->add_option("--checkpoint-every", ta.checkpoint_every, "Checkpoint cadence");
  tr->add_option("--log-every", ta.log_every, "Loss logging cadence");
  tr->add_option("--diffusion-points", ta.diffusion_points, "Points per shape in the diffusion loss (0: all)");
  tr->add_option("--T", ta.T, "Diffusion steps");
  tr->add_option("--seed", ta.seed, "Training seed");
  tr->add_flag("--staged", ta.staged, "Train encoder+denoiser, then the priors");

  SampleArgs sa;
  auto* sp = app.add_subcommand("sample", "Generate shapes for a structure");
  sp->add_option("--ckpt", sa.ckpt, "Model checkpoint")->required();
  sp->add_option("--structure", sa.structure, "Catalog code(s), comma separated, or 'all'");
  sp->add_option("--existence", sa.existence, "Explicit V as comma separated 0/1");
  sp->add_option("--adjacency", sa.adjacency, "Explicit E, row-major comma separated 0/1");
  sp->add_option("--labels", sa.labels, "File of per-point part indices (default: equal split)");
  sp->add_option("--count", sa.count, "Shapes per structure");
  sp->add_option("--points", sa.points, "Points per shape");
  sp->add_option("--seed", sa.seed, "Sampling seed");
  sp->add_option("--out", sa.out, "Output directory")->required();

  PredictorArgs pa;
  auto* pr = app.add_subcommand("predictor", "Train the adjacency predictor used by SCA");
  pr->add_option("--data", pa.data, "Dataset directory")->required();
  pr->add_option("--ckpt", pa.ckpt, "Model checkpoint providing the encoder")->required();
  pr->add_option("--out", pa.out, "Predictor file")->required();
  pr->add_option("--iterations", pa.iterations, "Optimizer steps");
  pr->add_option("--hidden", pa.hidden, "Head width");
  pr->add_option("--lr", pa.lr, "Learning rate");
  pr->add_option("--gate", pa.gate, "Required held-out accuracy");
  pr->add_option("--seed", pa.seed, "Seed");
  pr->add_flag("--strict", pa.strict, "Fail when the gate is not met");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Evaluate generated shapes against references");
  ev->add_option("--gen", ea.gen, "Generated set")->required();
  ev->add_option("--ref", ea.ref, "Reference set")->required();
  ev->add_option("--predictor", ea.predictor, "Predictor file for SCA");
  ev->add_option("--out", ea.out, "Report directory")->required();
  ev->add_option("--config", ea.config, "Metric JSON config");
  ev->add_option("--jsd-resolution", ea.jsd_resolution, "JSD voxels per axis");
  ev->add_flag("--sca", ea.sca, "Require SCA");
  ev->add_flag("--no-emd", ea.no_emd, "Skip EMD-kernel metrics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInvalid;
  }

  try {
    if (*ds) return run_dataset(da);
    if (*tr) return run_train(ta);
    if (*sp) return run_sample(sa);
    if (*pr) return run_predictor(pa);
    if (*ev) return run_eval(ea);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  }
  return 0;
}
