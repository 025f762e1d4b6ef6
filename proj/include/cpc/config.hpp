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

#ifndef CPC_CONFIG_HPP_
#define CPC_CONFIG_HPP_

#include <cstdint>
#include <string>

#include "cpc/contrastive.hpp"
#include "cpc/model.hpp"
#include "cpc/synthdata.hpp"

namespace cpc {

enum class TaskKind { kMarkov, kGaussian, kDiscrete };
enum class ModelKind { kCpc, kPair };

std::string task_kind_name(TaskKind k);
std::string model_kind_name(ModelKind k);

struct TaskSection {
  TaskKind kind = TaskKind::kMarkov;
  LatentMarkovSequenceTask markov;
  GaussianPairTask gaussian;
  DiscreteJointTask discrete;
};

struct TrainingSection {
  std::size_t steps = 6000;
  std::size_t batch_size = 8;
  double learning_rate = 2e-4;
  std::uint64_t seed = 1;
  std::size_t log_interval = 100;
  std::size_t eval_sequences = 16;
  std::size_t eval_batches = 64;
  std::size_t groups_per_batch = 1;  // pair-task InfoNCE groups per step
};

struct ContrastiveSection {
  std::size_t num_candidates = 16;  // N
  NegativeStrategy strategy = NegativeStrategy::kMixedSource;
  Reduction loss_reduction = Reduction::kMean;
};

// A config plus seed fully determines a run: identical configs produce
// bit-identical metric files.
struct ExperimentConfig {
  TaskSection task;
  ModelKind model_kind = ModelKind::kCpc;
  ModelConfig cpc_model;
  PairScorerConfig pair_model;
  TrainingSection training;
  ContrastiveSection contrastive;
  std::string out_dir = "runs/default";

  void validate() const;  // throws ConfigError listing offending fields
};

ExperimentConfig default_markov_config();
ExperimentConfig default_gaussian_config();
ExperimentConfig default_discrete_config();

/// Strict parse: unknown keys, wrong types, and inconsistent sections are
/// all collected into one ConfigError.
ExperimentConfig parse_config_json(const std::string& text,
                                   const std::string& origin);
ExperimentConfig load_config_file(const std::string& path);

/// Canonical dump with every default made explicit (--print-config).
std::string config_to_json(const ExperimentConfig& config);

/// Task section alone (embedded in dataset dumps).
std::string task_to_json(const TaskSection& task);

/// FNV-1a hash of the canonical dump, hex encoded.
std::string config_hash_hex(const ExperimentConfig& config);

}  // namespace cpc

#endif  // CPC_CONFIG_HPP_
