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

#include "cpc/contrastive.hpp"

#include <cmath>

#include <json.hpp>

#include "cpc/kernels.hpp"

namespace cpc {

namespace {

double logsumexp_raw(std::span<const double> v) {
  const double m = kernels::reduce_max(v.data(), v.size());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

double infonce_loss(std::span<const double> log_scores,
                    std::size_t positive_index) {
  if (log_scores.empty()) throw ValueError("infonce_loss of empty score list");
  if (positive_index >= log_scores.size()) {
    throw ValueError("infonce_loss positive index " +
                     std::to_string(positive_index) + " out of range for N=" +
                     std::to_string(log_scores.size()));
  }
  return logsumexp_raw(log_scores) - log_scores[positive_index];
}

Tensor infonce_loss(Tape& tape, const Tensor& log_scores,
                    std::size_t positive_index) {
  if (log_scores.size() == 0) {
    throw ValueError("infonce_loss of empty score list");
  }
  if (positive_index >= log_scores.size()) {
    throw ValueError("infonce_loss positive index out of range");
  }
  Tensor row = log_scores.reshaped({1, log_scores.size()});
  return tape.cross_entropy_rows(row, {positive_index}, Reduction::kMean);
}

double mi_lower_bound(double mean_loss, std::size_t n) {
  if (n < 1) throw ValueError("mi_lower_bound requires N >= 1");
  return std::log(static_cast<double>(n)) - mean_loss;
}

std::vector<double> optimal_posterior(std::span<const double> density_ratios) {
  if (density_ratios.empty()) {
    throw ValueError("optimal_posterior of empty ratio list");
  }
  double total = 0.0;
  for (double r : density_ratios) {
    if (!(r > 0.0)) {
      throw ValueError("optimal_posterior requires positive ratios, got " +
                       std::to_string(r));
    }
    total += r;
  }
  std::vector<double> post(density_ratios.size());
  for (std::size_t i = 0; i < post.size(); ++i) {
    post[i] = density_ratios[i] / total;
  }
  return post;
}

double mine_estimate(std::span<const double> positive_scores,
                     const std::vector<std::vector<double>>& negative_scores) {
  if (positive_scores.empty() ||
      positive_scores.size() != negative_scores.size()) {
    throw ValueError("mine_estimate needs one negative set per context");
  }
  double pos_mean = 0.0;
  double neg_term = 0.0;
  for (std::size_t i = 0; i < positive_scores.size(); ++i) {
    const auto& negs = negative_scores[i];
    if (negs.empty()) {
      throw ValueError("mine_estimate requires at least one negative");
    }
    pos_mean += positive_scores[i];
    // log((1/M) sum e^F) = logsumexp(F) - log M
    neg_term += logsumexp_raw(negs) -
                std::log(static_cast<double>(negs.size()));
  }
  const double inv = 1.0 / static_cast<double>(positive_scores.size());
  return pos_mean * inv - neg_term * inv;
}

double prediction_accuracy(std::span<const double> log_scores,
                           std::size_t positive_index) {
  if (log_scores.size() < 2) {
    throw ValueError("prediction_accuracy requires N >= 2");
  }
  if (positive_index >= log_scores.size()) {
    throw ValueError("prediction_accuracy positive index out of range");
  }
  const double pos = log_scores[positive_index];
  for (std::size_t i = 0; i < log_scores.size(); ++i) {
    if (i == positive_index) continue;
    if (log_scores[i] >= pos) return 0.0;  // ties fail
  }
  return 1.0;
}

const std::vector<NegativeStrategy>& all_strategies() {
  static const std::vector<NegativeStrategy> order = {
      NegativeStrategy::kMixedSource,
      NegativeStrategy::kSameSource,
      NegativeStrategy::kMixedSourceExcludingCurrent,
      NegativeStrategy::kSameSourceExcludingCurrent,
      NegativeStrategy::kCurrentSequenceOnly,
  };
  return order;
}

std::string strategy_name(NegativeStrategy s) {
  switch (s) {
    case NegativeStrategy::kMixedSource:
      return "mixed-source";
    case NegativeStrategy::kSameSource:
      return "same-source";
    case NegativeStrategy::kMixedSourceExcludingCurrent:
      return "mixed-source-excluding-current";
    case NegativeStrategy::kSameSourceExcludingCurrent:
      return "same-source-excluding-current";
    case NegativeStrategy::kCurrentSequenceOnly:
      return "current-sequence-only";
  }
  throw ValueError("unknown strategy");
}

NegativeStrategy parse_strategy(const std::string& name) {
  for (NegativeStrategy s : all_strategies()) {
    if (strategy_name(s) == name) return s;
  }
  throw ValueError("unknown negative-sampling strategy: " + name);
}

void FramePool::add_sequence(std::int64_t sequence_id, std::int64_t source_id,
                             std::size_t frames) {
  seq_.insert(seq_.end(), frames, sequence_id);
  src_.insert(src_.end(), frames, source_id);
}

bool FramePool::eligible(NegativeStrategy s, std::size_t row,
                         std::int64_t current_sequence,
                         std::int64_t current_source) const {
  switch (s) {
    case NegativeStrategy::kMixedSource:
      return true;
    case NegativeStrategy::kSameSource:
      return src_[row] == current_source;
    case NegativeStrategy::kMixedSourceExcludingCurrent:
      return seq_[row] != current_sequence;
    case NegativeStrategy::kSameSourceExcludingCurrent:
      return src_[row] == current_source && seq_[row] != current_sequence;
    case NegativeStrategy::kCurrentSequenceOnly:
      return seq_[row] == current_sequence;
  }
  return false;
}

std::vector<std::size_t> FramePool::eligible_rows(
    NegativeStrategy s, std::int64_t current_sequence,
    std::int64_t current_source) const {
  std::vector<std::size_t> rows;
  rows.reserve(seq_.size());
  for (std::size_t i = 0; i < seq_.size(); ++i) {
    if (eligible(s, i, current_sequence, current_source)) rows.push_back(i);
  }
  return rows;
}

std::vector<std::size_t> draw_from_eligible(
    std::span<const std::size_t> eligible, std::size_t count, Rng& rng) {
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = eligible[rng.uniform_int(eligible.size())];
  }
  return out;
}

std::vector<std::size_t> draw_negatives(const FramePool& pool,
                                        NegativeStrategy strategy,
                                        std::int64_t current_sequence,
                                        std::int64_t current_source,
                                        std::size_t count, Rng& rng) {
  const std::vector<std::size_t> rows =
      pool.eligible_rows(strategy, current_sequence, current_source);
  if (rows.empty()) {
    throw InfeasibleStrategyError(
        "strategy " + strategy_name(strategy) +
        " has no eligible frames for sequence " +
        std::to_string(current_sequence) + " (source " +
        std::to_string(current_source) + ")");
  }
  return draw_from_eligible(rows, count, rng);
}

MiEstimate summarize_mi(const std::vector<double>& batch_losses,
                        const std::vector<double>& batch_mines,
                        std::size_t n) {
  if (batch_losses.empty() || batch_losses.size() != batch_mines.size()) {
    throw ValueError("summarize_mi needs matching, non-empty batch vectors");
  }
  auto mean_se = [](const std::vector<double>& xs) {
    const double mean = kernels::reduce_sum(xs.data(), xs.size()) /
                        static_cast<double>(xs.size());
    if (xs.size() < 2) return std::pair<double, double>(mean, 0.0);
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double var = ss / static_cast<double>(xs.size() - 1);
    return std::pair<double, double>(
        mean, std::sqrt(var / static_cast<double>(xs.size())));
  };
  MiEstimate est;
  auto [lm, ls] = mean_se(batch_losses);
  auto [mm, ms] = mean_se(batch_mines);
  est.loss_mean = lm;
  est.loss_se = ls;
  est.n = n;
  est.lower_bound = mi_lower_bound(lm, n);
  est.mine = mm;
  est.mine_se = ms;
  est.batches = batch_losses.size();
  return est;
}

std::string MiEstimate::to_json() const {
  nlohmann::json j = {
      {"schema_version", 1},
      {"loss_mean", loss_mean},
      {"loss_se", loss_se},
      {"n", n},
      {"mi_lower_bound", lower_bound},
      {"mine", mine},
      {"mine_se", mine_se},
      {"batches", batches},
      {"exact", batches == 0},
  };
  if (has_true_mi) j["true_mi"] = true_mi;
  return j.dump(2);
}

}  // namespace cpc
