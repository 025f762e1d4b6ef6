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

#ifndef CPC_MI_EVAL_HPP_
#define CPC_MI_EVAL_HPP_

#include <cstdint>
#include <functional>

#include "cpc/contrastive.hpp"
#include "cpc/model.hpp"
#include "cpc/synthdata.hpp"

namespace cpc {

/// Monte Carlo InfoNCE/MINE evaluation on a Gaussian pair task. Each batch
/// is one group of `n` joint pairs scored all-vs-all (negatives are the
/// other pairs' targets). scorer == nullptr uses the true density ratio.
MiEstimate eval_gaussian_mi(const GaussianPairTask& task,
                            const PairScorer* scorer, std::size_t n,
                            std::size_t batches, std::uint64_t seed);

/// Exact (exhaustive-expectation) InfoNCE/MINE evaluation on a discrete
/// task: the positive and every multiset of N-1 negatives are enumerated, so
/// the returned estimate has zero standard error and `batches == 0`.
/// log_score(x, c) defaults to the log true density ratio.
MiEstimate eval_discrete_mi_exact(
    const DiscreteJointTask& task, std::size_t n,
    const std::function<double(std::size_t, std::size_t)>& log_score = {});

/// Log-score table [x_alphabet x c_alphabet] of a trained scorer applied to
/// one-hot symbol encodings.
std::vector<double> pair_scorer_table(const PairScorer& scorer,
                                      const DiscreteJointTask& task);

/// Number of (N-1)-multisets over an alphabet; exhaustive evaluation refuses
/// to run above a safety cap.
double multiset_count(std::size_t negatives, std::size_t alphabet);

}  // namespace cpc

#endif  // CPC_MI_EVAL_HPP_
