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

#include "cpc/mi_eval.hpp"

#include <cmath>

namespace cpc {

namespace {

// scores[i*n + j] = F(x_j, c_i); positives on the diagonal.
void batch_loss_and_mine(const std::vector<double>& scores, std::size_t n,
                         double* loss, double* mine) {
  double loss_sum = 0.0;
  std::vector<double> pos(n);
  std::vector<std::vector<double>> negs(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> row(scores.data() + i * n, n);
    loss_sum += infonce_loss(row, i);
    pos[i] = row[i];
    negs[i].reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) negs[i].push_back(row[j]);
    }
  }
  *loss = loss_sum / static_cast<double>(n);
  *mine = mine_estimate(pos, negs);
}

std::vector<double> model_scores_gaussian(const PairScorer& scorer,
                                          const Tensor& x, const Tensor& c) {
  Tape tape;
  PairLeaves leaves = bind(tape, scorer);
  Tensor phi = embed_pair_x(tape, leaves, x);
  Tensor psi = embed_pair_c(tape, leaves, c);
  Tensor pred = tape.matmul_nt(psi, leaves.bilinear);
  return tape.matmul_nt(pred, phi).values;
}

}  // namespace

MiEstimate eval_gaussian_mi(const GaussianPairTask& task,
                            const PairScorer* scorer, std::size_t n,
                            std::size_t batches, std::uint64_t seed) {
  task.validate();
  if (n < 2) throw ValueError("eval_gaussian_mi needs N >= 2");
  if (batches < 1) throw ValueError("eval_gaussian_mi needs >= 1 batch");
  if (scorer != nullptr &&
      (scorer->config.x_dim != task.dim || scorer->config.c_dim != task.dim)) {
    throw ShapeError("scorer dims do not match the gaussian task");
  }
  Rng rng(Rng::split(seed, 40));
  std::vector<double> losses(batches), mines(batches);
  std::vector<double> scores(n * n);
  for (std::size_t b = 0; b < batches; ++b) {
    PairBatch pairs = sample_pairs(task, n, rng);
    if (scorer != nullptr) {
      scores = model_scores_gaussian(*scorer, pairs.x, pairs.c);
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        std::span<const double> ci(pairs.c.values.data() + i * task.dim,
                                   task.dim);
        for (std::size_t j = 0; j < n; ++j) {
          std::span<const double> xj(pairs.x.values.data() + j * task.dim,
                                     task.dim);
          scores[i * n + j] = std::log(true_density_ratio(task, xj, ci));
        }
      }
    }
    batch_loss_and_mine(scores, n, &losses[b], &mines[b]);
  }
  MiEstimate est = summarize_mi(losses, mines, n);
  est.has_true_mi = true;
  est.true_mi = true_mi(task);
  return est;
}

double multiset_count(std::size_t negatives, std::size_t alphabet) {
  // C(negatives + alphabet - 1, alphabet - 1)
  double count = 1.0;
  for (std::size_t i = 1; i < alphabet; ++i) {
    count *= static_cast<double>(negatives + i) / static_cast<double>(i);
  }
  return count;
}

std::vector<double> pair_scorer_table(const PairScorer& scorer,
                                      const DiscreteJointTask& task) {
  task.validate();
  if (scorer.config.x_dim != task.x_alphabet ||
      scorer.config.c_dim != task.c_alphabet) {
    throw ShapeError("scorer dims do not match the discrete alphabets");
  }
  Tensor x = Tensor({task.x_alphabet, task.x_alphabet});
  for (std::size_t i = 0; i < task.x_alphabet; ++i) {
    x.values[i * task.x_alphabet + i] = 1.0;
  }
  Tensor c = Tensor({task.c_alphabet, task.c_alphabet});
  for (std::size_t i = 0; i < task.c_alphabet; ++i) {
    c.values[i * task.c_alphabet + i] = 1.0;
  }
  Tape tape;
  PairLeaves leaves = bind(tape, scorer);
  Tensor phi = embed_pair_x(tape, leaves, x);    // [ax x e]
  Tensor psi = embed_pair_c(tape, leaves, c);    // [ac x e]
  Tensor pred = tape.matmul_nt(psi, leaves.bilinear);
  Tensor s = tape.matmul_nt(pred, phi);  // [ac x ax]: rows are contexts
  std::vector<double> table(task.x_alphabet * task.c_alphabet);
  for (std::size_t xi = 0; xi < task.x_alphabet; ++xi) {
    for (std::size_t ci = 0; ci < task.c_alphabet; ++ci) {
      table[xi * task.c_alphabet + ci] = s(ci, xi);
    }
  }
  return table;
}

MiEstimate eval_discrete_mi_exact(
    const DiscreteJointTask& task, std::size_t n,
    const std::function<double(std::size_t, std::size_t)>& log_score) {
  task.validate();
  if (n < 2) throw ValueError("eval_discrete_mi_exact needs N >= 2");
  const std::size_t ax = task.x_alphabet;
  if (multiset_count(n - 1, ax) > 2e6) {
    throw ValueError(
        "exhaustive evaluation infeasible: too many negative multisets");
  }
  auto score = [&](std::size_t x, std::size_t c) {
    return log_score ? log_score(x, c)
                     : std::log(true_density_ratio(task, x, c));
  };
  const std::vector<double> px = task.marginal_x();
  const std::vector<double> pc = task.marginal_c();

  double expected_loss = 0.0;
  double mine_neg_term = 0.0;  // E_c,negs log((1/(N-1)) sum e^F)
  double mine_pos_term = 0.0;  // E_joint F

  for (std::size_t xi = 0; xi < ax; ++xi) {
    for (std::size_t ci = 0; ci < task.c_alphabet; ++ci) {
      mine_pos_term += task.p(xi, ci) * score(xi, ci);
    }
  }

  // Enumerate multisets of N-1 negatives by composition, with multinomial
  // weights; the loss for a candidate set depends on counts only.
  std::vector<std::size_t> counts(ax, 0);
  std::vector<double> exp_scores(ax);
  const std::size_t m = n - 1;

  auto process_multiset = [&](double log_weight) {
    // weight = multinomial(m; counts) * prod px^count
    for (std::size_t c = 0; c < task.c_alphabet; ++c) {
      for (std::size_t a = 0; a < ax; ++a) {
        exp_scores[a] = std::exp(score(a, c));
      }
      double neg_sum = 0.0;
      for (std::size_t a = 0; a < ax; ++a) {
        neg_sum += static_cast<double>(counts[a]) * exp_scores[a];
      }
      const double w_ms = std::exp(log_weight);
      mine_neg_term +=
          pc[c] * w_ms *
          std::log(neg_sum / static_cast<double>(m));
      for (std::size_t xp = 0; xp < ax; ++xp) {
        const double w = task.p(xp, c) * w_ms;
        expected_loss +=
            w * (std::log(exp_scores[xp] + neg_sum) - score(xp, c));
      }
    }
  };

  // recursive composition walk with running log-weight
  std::vector<double> log_px(ax);
  for (std::size_t a = 0; a < ax; ++a) log_px[a] = std::log(px[a]);
  std::vector<double> log_fact(m + 1, 0.0);
  for (std::size_t i = 1; i <= m; ++i) {
    log_fact[i] = log_fact[i - 1] + std::log(static_cast<double>(i));
  }
  auto walk = [&](auto&& self, std::size_t symbol, std::size_t left) -> void {
    if (symbol + 1 == ax) {
      counts[symbol] = left;
      double lw = log_fact[m];
      for (std::size_t a = 0; a < ax; ++a) {
        lw -= log_fact[counts[a]];
        lw += static_cast<double>(counts[a]) * log_px[a];
      }
      process_multiset(lw);
      return;
    }
    for (std::size_t take = 0; take <= left; ++take) {
      counts[symbol] = take;
      self(self, symbol + 1, left - take);
    }
  };
  walk(walk, 0, m);

  MiEstimate est;
  est.loss_mean = expected_loss;
  est.loss_se = 0.0;
  est.n = n;
  est.lower_bound = mi_lower_bound(expected_loss, n);
  est.mine = mine_pos_term - mine_neg_term;
  est.mine_se = 0.0;
  est.batches = 0;  // exact
  est.has_true_mi = true;
  est.true_mi = true_mi(task);
  return est;
}

}  // namespace cpc
