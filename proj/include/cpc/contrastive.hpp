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

#ifndef CPC_CONTRASTIVE_HPP_
#define CPC_CONTRASTIVE_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cpc/rng.hpp"
#include "cpc/tape.hpp"
#include "cpc/tensor.hpp"

namespace cpc {

/// -(log_scores[positive] - logsumexp(log_scores)): the categorical
/// cross-entropy of picking the positive among N candidates. Non-negative;
/// zero when N == 1.
double infonce_loss(std::span<const double> log_scores,
                    std::size_t positive_index);

/// Differentiable form over a score vector on a tape.
Tensor infonce_loss(Tape& tape, const Tensor& log_scores,
                    std::size_t positive_index);

/// log(N) - mean_loss, in nats.
double mi_lower_bound(double mean_loss, std::size_t n);

/// ratio_i / sum_j ratio_j: the posterior probability that candidate i is
/// the one drawn from the conditional rather than the proposal. All ratios
/// must be positive.
std::vector<double> optimal_posterior(std::span<const double> density_ratios);

/// mean(F_pos) - mean over contexts of log((1/(N-1)) sum_neg e^F).
/// negative_scores holds one vector per context, all the same length.
double mine_estimate(std::span<const double> positive_scores,
                     const std::vector<std::vector<double>>& negative_scores);

/// 1 if the positive logit strictly exceeds every other, else 0. Ties count
/// as failure. Requires N >= 2.
double prediction_accuracy(std::span<const double> log_scores,
                           std::size_t positive_index);

enum class NegativeStrategy {
  kMixedSource,
  kSameSource,
  kMixedSourceExcludingCurrent,
  kSameSourceExcludingCurrent,
  kCurrentSequenceOnly,
};

/// All five strategies in their canonical (ablation-row) order.
const std::vector<NegativeStrategy>& all_strategies();
std::string strategy_name(NegativeStrategy s);
NegativeStrategy parse_strategy(const std::string& name);

/// Provenance of the frames negatives are drawn from. `row(i)` addresses a
/// latent frame in whatever matrix the pool was built alongside.
class FramePool {
 public:
  FramePool() = default;

  /// `frames_per_sequence` latent frames per sequence, rows appended in
  /// sequence order.
  void add_sequence(std::int64_t sequence_id, std::int64_t source_id,
                    std::size_t frames);

  std::size_t size() const { return seq_.size(); }
  std::int64_t sequence_id(std::size_t row) const { return seq_[row]; }
  std::int64_t source_id(std::size_t row) const { return src_[row]; }

  /// True if `row` may serve as a negative for an anchor with the given
  /// provenance under the strategy.
  bool eligible(NegativeStrategy s, std::size_t row,
                std::int64_t current_sequence,
                std::int64_t current_source) const;

  /// All rows satisfying the strategy predicate, in row order.
  std::vector<std::size_t> eligible_rows(NegativeStrategy s,
                                         std::int64_t current_sequence,
                                         std::int64_t current_source) const;

 private:
  std::vector<std::int64_t> seq_;
  std::vector<std::int64_t> src_;
};

/// `count` frame rows drawn i.i.d. uniform (with replacement) from the
/// strategy's eligible set. Throws InfeasibleStrategyError when that set is
/// empty.
std::vector<std::size_t> draw_negatives(const FramePool& pool,
                                        NegativeStrategy strategy,
                                        std::int64_t current_sequence,
                                        std::int64_t current_source,
                                        std::size_t count, Rng& rng);

/// Same draw from a precomputed eligible set (the per-step fast path).
std::vector<std::size_t> draw_from_eligible(
    std::span<const std::size_t> eligible, std::size_t count, Rng& rng);

/// One scored candidate set: the positive's log-score at `positive_index`
/// within `log_scores`, negatives elsewhere, with anchor provenance.
struct ContrastiveBatch {
  std::vector<double> log_scores;
  std::size_t positive_index = 0;
  std::size_t horizon = 1;
  std::int64_t sequence_id = -1;
  std::int64_t source_id = -1;
};

/// Summary of an MI evaluation run.
struct MiEstimate {
  double loss_mean = 0.0;
  double loss_se = 0.0;
  std::size_t n = 0;  // candidates per set (1 positive + N-1 negatives)
  double lower_bound = 0.0;  // log(N) - loss_mean, by construction
  double mine = 0.0;
  double mine_se = 0.0;
  std::size_t batches = 0;  // 0 means exact (exhaustive expectation)
  bool has_true_mi = false;
  double true_mi = 0.0;

  std::string to_json() const;
};

/// Builds an estimate from per-batch loss and MINE values.
MiEstimate summarize_mi(const std::vector<double>& batch_losses,
                        const std::vector<double>& batch_mines, std::size_t n);

}  // namespace cpc

#endif  // CPC_CONTRASTIVE_HPP_
