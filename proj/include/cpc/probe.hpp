// Copyright 2026 The cpclab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CPC_PROBE_HPP_
#define CPC_PROBE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "cpc/model.hpp"
#include "cpc/synthdata.hpp"
#include "cpc/train.hpp"

namespace cpc {

struct ProbeFitOptions {
  std::size_t max_iters = 2000;
  double grad_tol = 1e-5;  // stop when the full-gradient L2 norm drops below
  double learning_rate = 0.05;
};

// Multinomial logistic regression on frozen features; bias folded into the
// last weight column. Fitting starts from zeros, so it is deterministic.
struct LinearProbe {
  Tensor weights;  // [classes x (dim + 1)]
  std::size_t classes = 0;
  std::size_t dim = 0;
  std::size_t iters_used = 0;
  double final_grad_norm = 0.0;
};

LinearProbe fit_linear_probe(const Tensor& features,
                             const std::vector<std::int32_t>& labels,
                             std::size_t classes, double l2,
                             const ProbeFitOptions& opts = {});

/// Argmax accuracy; ties resolve to the lowest class id.
double evaluate_probe(const LinearProbe& probe, const Tensor& features,
                      const std::vector<std::int32_t>& labels);

// One-hidden-layer variant (the "not all information is linearly
// accessible" check). Non-convex, so it takes a seed.
struct MlpProbe {
  Tensor w1, b1, w2, b2;
  std::size_t classes = 0;
};

MlpProbe fit_mlp_probe(const Tensor& features,
                       const std::vector<std::int32_t>& labels,
                       std::size_t classes, std::size_t hidden,
                       std::uint64_t seed, std::size_t iters = 800,
                       double learning_rate = 1e-3);
double evaluate_probe(const MlpProbe& probe, const Tensor& features,
                      const std::vector<std::int32_t>& labels);

enum class FeatureSource { kContext, kLatent };

/// Frozen per-frame features plus both label tracks, frames in (b, t) order.
struct FrameDataset {
  Tensor features;
  std::vector<std::int32_t> state_labels;
  std::vector<std::int32_t> source_labels;
};

FrameDataset extract_features(const CpcModel& model,
                              const std::vector<LabeledSequence>& sequences,
                              FeatureSource source);

struct ProbeReport {
  std::string feature_source;  // cpc-c | cpc-z | random-init | supervised-ceiling
  std::string target;          // hidden-state | source-id
  std::string probe_arch;      // linear | hidden256
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t feature_dim = 0;
  double l2 = 0.0;
  std::string config_hash;
};

std::string probe_reports_to_json(const std::vector<ProbeReport>& reports);

struct ProbeSuiteOptions {
  std::size_t train_sequences = 48;
  std::size_t val_sequences = 16;
  std::size_t test_sequences = 16;
  std::uint64_t data_seed = 9000;
  std::vector<double> l2_grid = {0.0, 1e-4, 1e-2};  // picked on validation
  std::string trained_tag = "cpc-c";  // random-init for untrained checkpoints
  bool include_random_baseline = true;
  bool include_latent_features = true;
  bool include_supervised = true;
  bool include_hidden_probe = false;
  std::size_t hidden_width = 256;
  SupervisedTrainOptions supervised;
  ProbeFitOptions fit;
  std::string config_hash;
};

/// Full linear-probe protocol: cpc features vs random-init vs the
/// end-to-end supervised ceiling, on both label tracks. Model parameters
/// stay frozen (checked by hash).
std::vector<ProbeReport> run_probe_suite(const CpcModel& trained,
                                         const CpcModel& random_init,
                                         const LatentMarkovSequenceTask& task,
                                         const ProbeSuiteOptions& opts);

}  // namespace cpc

#endif  // CPC_PROBE_HPP_
