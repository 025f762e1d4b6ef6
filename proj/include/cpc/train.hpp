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

#ifndef CPC_TRAIN_HPP_
#define CPC_TRAIN_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "cpc/contrastive.hpp"
#include "cpc/model.hpp"
#include "cpc/synthdata.hpp"

namespace cpc {

struct CpcTrainOptions {
  std::size_t steps = 6000;
  std::size_t batch_sequences = 8;  // sampled as same-source pairs
  double learning_rate = 2e-4;
  std::uint64_t seed = 1;
  std::size_t log_interval = 100;
  std::size_t num_candidates = 16;  // N: 1 positive + N-1 negatives
  NegativeStrategy strategy = NegativeStrategy::kMixedSource;
  Reduction loss_reduction = Reduction::kMean;
  std::size_t eval_sequences = 16;
};

// One logged evaluation. Wall clock is reported in the run summary only;
// the metrics CSV stays a pure function of (config, seed).
struct MetricRow {
  std::uint64_t step = 0;
  std::vector<double> loss_k;
  std::vector<double> acc_k;
  double mi_bound_k1 = 0.0;
  double mine_k1 = 0.0;
  double wall_clock_s = 0.0;
};

struct CpcEvalResult {
  std::vector<double> loss_k;
  std::vector<double> acc_k;
  double mi_bound_k1 = 0.0;
  double mine_k1 = 0.0;
};

struct CpcTrainResult {
  CpcModel model;
  CpcModel initial_model;
  std::vector<MetricRow> metrics;
  double final_loss_slope = 0.0;  // per-step slope over the last logged rows
  double wall_clock_s = 0.0;
};

CpcTrainResult train_cpc(const LatentMarkovSequenceTask& task,
                         const ModelConfig& model_config,
                         const CpcTrainOptions& opts);

/// Held-out metrics on explicit sequences; negative draws come from `rng`.
CpcEvalResult evaluate_cpc(const CpcModel& model,
                           const std::vector<LabeledSequence>& sequences,
                           std::size_t num_candidates,
                           NegativeStrategy strategy, Rng& rng);

/// [T x D] frame-major sequences packed into one [B*D x T] channel-major
/// tensor.
Tensor pack_sequences(const std::vector<const LabeledSequence*>& batch);

// Anchor and candidate indices for one batch, negatives already drawn.
// Splitting planning from graph building keeps the loss a deterministic
// function of the parameters (finite differences need that).
struct CpcLossPlan {
  std::size_t num_candidates = 0;
  std::size_t latent_frames = 0;
  Reduction reduction = Reduction::kMean;
  std::vector<std::vector<std::size_t>> ctx_idx;   // per horizon
  std::vector<std::vector<std::size_t>> cand_idx;  // per horizon, slot 0 positive
};

CpcLossPlan plan_cpc_loss(const ModelConfig& model_config,
                          const std::vector<const LabeledSequence*>& batch,
                          std::size_t num_candidates,
                          NegativeStrategy strategy, Reduction reduction,
                          Rng& neg_rng);

struct CpcLossOutput {
  Tensor total_loss;  // scalar on the tape
  std::vector<double> loss_k;
  std::vector<double> acc_k;
  double mine_k1 = 0.0;
};

CpcLossOutput cpc_loss_from_plan(Tape& tape, const CpcLeaves& leaves,
                                 const ModelConfig& model_config,
                                 const Tensor& packed_x, std::size_t batch,
                                 const CpcLossPlan& plan);

/// CSV column set is a function of K only:
/// step,loss_k1..loss_kK,acc_k1..acc_kK,mi_bound_k1,mine_k1
std::string metrics_csv_header(std::size_t horizons);
std::string metrics_csv_row(const MetricRow& row);
void write_metrics_csv(const std::string& path, std::size_t horizons,
                       const std::vector<MetricRow>& rows);

/// Least-squares slope of mean loss per step over the last `window` rows.
double final_loss_slope(const std::vector<MetricRow>& rows,
                        std::size_t window = 10);

// Latent-frame labels: each latent frame takes the input-frame label at the
// center of its receptive field.
std::vector<std::int32_t> latent_frame_labels(
    const EncoderConfig& enc, const std::vector<std::int32_t>& input_labels);

enum class ProbeTarget { kHiddenState, kSourceId };
std::string probe_target_name(ProbeTarget t);

struct SupervisedTrainOptions {
  std::size_t steps = 2000;
  std::size_t batch_sequences = 8;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
};

struct SupervisedResult {
  SupervisedModel model;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

SupervisedResult train_supervised(const LatentMarkovSequenceTask& task,
                                  const ModelConfig& model_config,
                                  ProbeTarget target,
                                  const std::vector<LabeledSequence>& train,
                                  const std::vector<LabeledSequence>& test,
                                  const SupervisedTrainOptions& opts);

struct PairTrainOptions {
  std::size_t steps = 20000;
  std::size_t group_size = 128;       // N candidates per InfoNCE group
  std::size_t groups_per_batch = 1;   // anchors per step = N * groups
  double learning_rate = 2e-4;
  std::uint64_t seed = 1;
  std::size_t log_interval = 500;
  std::size_t eval_batches = 64;  // batches per logged evaluation
};

struct PairTrainResult {
  PairScorer scorer;
  std::vector<MetricRow> metrics;  // K = 1 column layout
  double final_loss_slope = 0.0;
  double wall_clock_s = 0.0;
};

PairTrainResult train_pair_scorer(const GaussianPairTask& task,
                                  const PairScorerConfig& config,
                                  const PairTrainOptions& opts);
PairTrainResult train_pair_scorer(const DiscreteJointTask& task,
                                  const PairScorerConfig& config,
                                  const PairTrainOptions& opts);

}  // namespace cpc

#endif  // CPC_TRAIN_HPP_
