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

#ifndef CPC_SYNTHDATA_HPP_
#define CPC_SYNTHDATA_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cpc/rng.hpp"
#include "cpc/tensor.hpp"

namespace cpc {

// (x, c) pairs that are per-dimension correlated standard normals.
// True MI is -(d/2) ln(1 - rho^2) nats.
struct GaussianPairTask {
  std::size_t dim = 1;
  double rho = 0.0;

  void validate() const;
};

// Fully tabulated joint p(x, c) over small alphabets; every quantity of
// interest is computable by direct summation.
struct DiscreteJointTask {
  std::size_t x_alphabet = 2;
  std::size_t c_alphabet = 2;
  std::vector<double> joint;  // row-major p[x * c_alphabet + c], all > 0

  void validate() const;
  double p(std::size_t x, std::size_t c) const {
    return joint[x * c_alphabet + c];
  }
  std::vector<double> marginal_x() const;
  std::vector<double> marginal_c() const;
};

// Slow hidden chain ("phoneme" analog) observed through per-source offsets
// ("speaker" analog) plus Gaussian noise. Every frame carries both labels.
struct LatentMarkovSequenceTask {
  std::size_t states = 8;
  std::size_t sources = 10;
  double p_stay = 0.9;
  std::size_t obs_dim = 16;
  double emission_sigma = 1.5;
  double source_offset_scale = 1.0;
  std::size_t seq_len = 256;
  std::uint64_t seed = 1;

  void validate() const;
  /// State embeddings [states x obs_dim], fixed by the task seed.
  Tensor state_embeddings() const;
  /// Source offsets [sources x obs_dim], fixed by the task seed.
  Tensor source_offsets() const;
  /// Row-stochastic transition matrix [states x states].
  Tensor transition_matrix() const;
  /// Uniform for this symmetric chain.
  std::vector<double> stationary_distribution() const;
};

struct PairBatch {
  Tensor x;  // [n x dim]
  Tensor c;  // [n x dim]
};

struct DiscretePairBatch {
  std::vector<std::size_t> x;
  std::vector<std::size_t> c;
};

PairBatch sample_pairs(const GaussianPairTask& task, std::size_t n, Rng& rng);
DiscretePairBatch sample_pairs(const DiscreteJointTask& task, std::size_t n,
                               Rng& rng);

double true_mi(const GaussianPairTask& task);
double true_mi(const DiscreteJointTask& task);

/// Exact p(x|c)/p(x) including normalization constants.
double true_density_ratio(const GaussianPairTask& task,
                          std::span<const double> x,
                          std::span<const double> c);
double true_density_ratio(const DiscreteJointTask& task, std::size_t x,
                          std::size_t c);

struct LabeledSequence {
  Tensor obs;  // [seq_len x obs_dim] frame-major
  std::vector<std::int32_t> states;
  std::int64_t sequence_id = 0;
  std::int64_t source_id = 0;
};

/// One sequence from an explicitly chosen source.
LabeledSequence sample_sequence(const LatentMarkovSequenceTask& task,
                                std::int64_t source_id,
                                std::int64_t sequence_id, Rng& rng);

/// n sequences with sources drawn uniformly.
std::vector<LabeledSequence> sample_sequences(
    const LatentMarkovSequenceTask& task, std::size_t n, Rng& rng,
    std::int64_t first_sequence_id = 0);

// Dataset dump: magic + JSON header (task config, counts, layout) followed
// by the frame-major observation matrix and parallel label arrays.
void write_dataset(const std::string& path, const std::string& task_json,
                   const std::string& split,
                   const std::vector<LabeledSequence>& sequences,
                   std::size_t obs_dim);

struct Dataset {
  std::string task_json;
  std::string split;
  std::size_t obs_dim = 0;
  std::vector<LabeledSequence> sequences;
};

Dataset read_dataset(const std::string& path);

}  // namespace cpc

#endif  // CPC_SYNTHDATA_HPP_
