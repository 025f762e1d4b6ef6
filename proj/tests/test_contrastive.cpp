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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cpc/contrastive.hpp"
#include "cpc/gradcheck.hpp"
#include "cpc/mi_eval.hpp"
#include "cpc/synthdata.hpp"

using namespace cpc;

TEST_CASE("infonce_loss values") {
  // only the positive: perfect by definition
  CHECK(infonce_loss(std::vector<double>{3.7}, 0) == doctest::Approx(0.0));

  // four equal scores: uniform prediction costs ln 4
  std::vector<double> equal = {1.0, 1.0, 1.0, 1.0};
  CHECK(infonce_loss(equal, 2) ==
        doctest::Approx(1.3862943611198906).epsilon(1e-14));

  // frozen from an independent high-precision evaluation of the formula
  std::vector<double> strong = {5.0, 0.0, 0.0, 0.0};
  CHECK(infonce_loss(strong, 0) ==
        doctest::Approx(0.020012253359626975).epsilon(1e-12));

  CHECK(infonce_loss(strong, 0) >= 0.0);
  CHECK_THROWS_AS(infonce_loss(std::vector<double>{}, 0), ValueError);
  CHECK_THROWS_AS(infonce_loss(strong, 4), ValueError);
}

TEST_CASE("infonce_loss is shift invariant") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(12);
    std::vector<double> scores(n);
    for (double& s : scores) s = 3.0 * rng.normal();
    const std::size_t pos = rng.uniform_int(n);
    const double base = infonce_loss(scores, pos);
    const double c = 10.0 * rng.normal();
    for (double& s : scores) s += c;
    CHECK(std::fabs(infonce_loss(scores, pos) - base) < 1e-11);
  }
}

TEST_CASE("taped infonce agrees with the raw form and finite differences") {
  Rng rng(32);
  Tensor scores = random_normal({6}, rng, 2.0);
  Tape tape;
  Tensor leaf = tape.leaf(scores);
  Tensor loss = infonce_loss(tape, leaf, 2);
  CHECK(loss.values[0] ==
        doctest::Approx(infonce_loss(scores.values, 2)).epsilon(1e-14));

  auto r = check_gradients("infonce", {scores},
                           [](Tape& t, const std::vector<Tensor>& p) {
                             return infonce_loss(t, p[0], 2);
                           });
  INFO(r.max_rel_err);
  CHECK(r.pass);
}

TEST_CASE("batched cross entropy equals the mean of per-row infonce") {
  Rng rng(33);
  const std::size_t rows = 7, n = 5;
  Tensor scores = random_normal({rows, n}, rng, 2.0);
  std::vector<std::size_t> pos(rows);
  for (auto& p : pos) p = rng.uniform_int(n);
  Tape tape;
  Tensor batched =
      tape.cross_entropy_rows(tape.leaf(scores), pos, Reduction::kMean);
  double expect = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> row(scores.values.begin() + r * n,
                            scores.values.begin() + (r + 1) * n);
    expect += infonce_loss(row, pos[r]);
  }
  expect /= rows;
  CHECK(batched.values[0] == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("mi_lower_bound") {
  CHECK(mi_lower_bound(0.0, 1) == doctest::Approx(0.0));
  CHECK(mi_lower_bound(std::log(4.0), 4) == doctest::Approx(0.0));
  CHECK_THROWS_AS(mi_lower_bound(0.5, 0), ValueError);

  // construction identity: bound is exactly log(N) - loss
  Rng rng(34);
  for (int trial = 0; trial < 100; ++trial) {
    const double loss = std::fabs(rng.normal());
    const std::size_t n = 1 + rng.uniform_int(256);
    CHECK(mi_lower_bound(loss, n) ==
          std::log(static_cast<double>(n)) - loss);
    CHECK(mi_lower_bound(loss, n) <= std::log(static_cast<double>(n)));
  }
}

TEST_CASE("optimal_posterior arithmetic and invariances") {
  std::vector<double> post = optimal_posterior(std::vector<double>{2.0, 1.0, 1.0});
  CHECK(post[0] == doctest::Approx(0.5));
  CHECK(post[1] == doctest::Approx(0.25));
  CHECK(post[2] == doctest::Approx(0.25));

  std::vector<double> unif = optimal_posterior(std::vector<double>{3.3, 3.3, 3.3, 3.3});
  for (double p : unif) CHECK(p == doctest::Approx(0.25));

  CHECK_THROWS_AS(optimal_posterior(std::vector<double>{1.0, 0.0}), ValueError);
  CHECK_THROWS_AS(optimal_posterior(std::vector<double>{}), ValueError);

  Rng rng(35);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(16);
    std::vector<double> ratios(n);
    for (double& r : ratios) r = std::exp(2.0 * rng.normal());
    std::vector<double> base = optimal_posterior(ratios);

    double sum = 0.0;
    for (double p : base) sum += p;
    CHECK(std::fabs(sum - 1.0) < 1e-12);

    // scale invariance ("up to a multiplicative constant")
    const double c = std::exp(3.0 * rng.normal());
    std::vector<double> scaled = ratios;
    for (double& r : scaled) r *= c;
    std::vector<double> post2 = optimal_posterior(scaled);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::fabs(post2[i] - base[i]) < 1e-12);
    }

    // identity with softmax of log ratios
    std::vector<double> logs(n);
    for (std::size_t i = 0; i < n; ++i) logs[i] = std::log(ratios[i]);
    const double m = *std::max_element(logs.begin(), logs.end());
    double z = 0.0;
    for (double l : logs) z += std::exp(l - m);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::fabs(base[i] - std::exp(logs[i] - m) / z) < 1e-12);
    }
  }
}

TEST_CASE("mine_estimate values and the InfoNCE inequality") {
  // all scores zero
  CHECK(mine_estimate(std::vector<double>{0.0, 0.0},
                      {{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}}) ==
        doctest::Approx(0.0));
  // constant positive margin c over zero negatives
  CHECK(mine_estimate(std::vector<double>{1.7, 1.7, 1.7},
                      {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}}) ==
        doctest::Approx(1.7));
  CHECK_THROWS_AS(mine_estimate(std::vector<double>{1.0}, {{}}), ValueError);

  // -L_N <= mine - log(N-1) deterministically on every batch
  Rng rng(36);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(12);
    const std::size_t contexts = 1 + rng.uniform_int(6);
    double loss = 0.0;
    std::vector<double> pos(contexts);
    std::vector<std::vector<double>> negs(contexts);
    for (std::size_t i = 0; i < contexts; ++i) {
      std::vector<double> scores(n);
      for (double& s : scores) s = 3.0 * rng.normal();
      const std::size_t pi = rng.uniform_int(n);
      loss += infonce_loss(scores, pi);
      pos[i] = scores[pi];
      for (std::size_t j = 0; j < n; ++j) {
        if (j != pi) negs[i].push_back(scores[j]);
      }
    }
    loss /= static_cast<double>(contexts);
    const double mine = mine_estimate(pos, negs);
    CHECK(-loss <= mine - std::log(static_cast<double>(n - 1)) + 1e-12);
  }
}

TEST_CASE("prediction_accuracy") {
  CHECK(prediction_accuracy(std::vector<double>{2.0, 1.0, 0.0}, 0) == 1.0);
  CHECK(prediction_accuracy(std::vector<double>{0.0, 1.0}, 0) == 0.0);
  // ties count as failure
  CHECK(prediction_accuracy(std::vector<double>{1.0, 1.0}, 0) == 0.0);
  CHECK_THROWS_AS(prediction_accuracy(std::vector<double>{1.0}, 0), ValueError);

  // chance level: i.i.d. scores, N=8 -> accuracy 1/8 within 3 sigma
  Rng rng(37);
  const int draws = 10000;
  int hits = 0;
  for (int i = 0; i < draws; ++i) {
    std::vector<double> scores(8);
    for (double& s : scores) s = rng.normal();
    hits += prediction_accuracy(scores, rng.uniform_int(8)) > 0.5 ? 1 : 0;
  }
  const double p = 1.0 / 8.0;
  const double sigma = std::sqrt(p * (1 - p) / draws);
  CHECK(std::fabs(hits / static_cast<double>(draws) - p) < 3.0 * sigma);
}

namespace {

FramePool make_pool() {
  // 3 sources x 2 sequences x 50 frames
  FramePool pool;
  std::int64_t seq = 0;
  for (std::int64_t src = 0; src < 3; ++src) {
    pool.add_sequence(seq++, src, 50);
    pool.add_sequence(seq++, src, 50);
  }
  return pool;
}

}  // namespace

TEST_CASE("negative strategies honor their provenance predicates") {
  FramePool pool = make_pool();
  Rng rng(38);
  const std::int64_t cur_seq = 2, cur_src = 1;  // first sequence of source 1

  for (NegativeStrategy s : all_strategies()) {
    std::vector<std::size_t> rows =
        draw_negatives(pool, s, cur_seq, cur_src, 500, rng);
    CHECK(rows.size() == 500);
    for (std::size_t r : rows) {
      CHECK(pool.eligible(s, r, cur_seq, cur_src));
      switch (s) {
        case NegativeStrategy::kCurrentSequenceOnly:
          CHECK(pool.sequence_id(r) == cur_seq);
          break;
        case NegativeStrategy::kMixedSourceExcludingCurrent:
          CHECK(pool.sequence_id(r) != cur_seq);
          break;
        case NegativeStrategy::kSameSource:
          CHECK(pool.source_id(r) == cur_src);
          break;
        case NegativeStrategy::kSameSourceExcludingCurrent:
          CHECK(pool.source_id(r) == cur_src);
          CHECK(pool.sequence_id(r) != cur_seq);
          break;
        case NegativeStrategy::kMixedSource:
          break;
      }
    }
  }
}

TEST_CASE("negative draws are uniform over the eligible set") {
  // 100-frame eligible set (two 50-frame sequences of source 0)
  FramePool pool = make_pool();
  Rng rng(39);
  const std::size_t draws = 10000;
  std::vector<std::size_t> rows = draw_negatives(
      pool, NegativeStrategy::kSameSource, /*seq=*/-1, /*src=*/0, draws, rng);
  std::vector<std::size_t> counts(100, 0);
  for (std::size_t r : rows) {
    REQUIRE(r < 100);
    ++counts[r];
  }
  const double expected = draws / 100.0;
  const double sigma = std::sqrt(draws * (1.0 / 100.0) * (99.0 / 100.0));
  double chi2 = 0.0;
  for (std::size_t c : counts) {
    CHECK(std::fabs(static_cast<double>(c) - expected) < 3.0 * sigma);
    const double d = static_cast<double>(c) - expected;
    chi2 += d * d / expected;
  }
  // chi-square: mean dof, variance 2*dof; bound at 3 sigma
  const double dof = 99.0;
  CHECK(chi2 < dof + 3.0 * std::sqrt(2.0 * dof));
}

TEST_CASE("infeasible strategy raises a strategy error") {
  FramePool pool;
  pool.add_sequence(/*seq=*/0, /*src=*/0, 10);  // lone sequence of its source
  pool.add_sequence(/*seq=*/1, /*src=*/1, 10);
  Rng rng(40);
  CHECK_THROWS_AS(
      draw_negatives(pool, NegativeStrategy::kSameSourceExcludingCurrent, 0, 0,
                     4, rng),
      InfeasibleStrategyError);
  // same strategy is fine when the source has a second sequence
  pool.add_sequence(/*seq=*/2, /*src=*/0, 10);
  std::vector<std::size_t> rows = draw_negatives(
      pool, NegativeStrategy::kSameSourceExcludingCurrent, 0, 0, 4, rng);
  for (std::size_t r : rows) CHECK(pool.sequence_id(r) == 2);
}

namespace {

// Exhaustive expected InfoNCE loss on a discrete task with N = 3 candidates,
// enumerating every (c, positive, negative pair) tuple.
double exhaustive_loss3(const DiscreteJointTask& task,
                        const std::vector<std::vector<double>>& score) {
  const std::vector<double> px = task.marginal_x();
  const std::vector<double> pc = task.marginal_c();
  double total = 0.0;
  for (std::size_t c = 0; c < task.c_alphabet; ++c) {
    for (std::size_t xp = 0; xp < task.x_alphabet; ++xp) {
      const double w_pos = task.p(xp, c);  // p(c) p(xp | c)
      for (std::size_t x2 = 0; x2 < task.x_alphabet; ++x2) {
        for (std::size_t x3 = 0; x3 < task.x_alphabet; ++x3) {
          const double w = w_pos * px[x2] * px[x3];
          const std::vector<double> s = {std::log(score[xp][c]),
                                         std::log(score[x2][c]),
                                         std::log(score[x3][c])};
          total += w * infonce_loss(s, 0);
        }
      }
    }
  }
  return total;
}

double exhaustive_accuracy3(const DiscreteJointTask& task,
                            const std::vector<std::vector<double>>& score) {
  const std::vector<double> px = task.marginal_x();
  double total = 0.0;
  for (std::size_t c = 0; c < task.c_alphabet; ++c) {
    for (std::size_t xp = 0; xp < task.x_alphabet; ++xp) {
      for (std::size_t x2 = 0; x2 < task.x_alphabet; ++x2) {
        for (std::size_t x3 = 0; x3 < task.x_alphabet; ++x3) {
          const double w = task.p(xp, c) * px[x2] * px[x3];
          const std::vector<double> s = {std::log(score[xp][c]),
                                         std::log(score[x2][c]),
                                         std::log(score[x3][c])};
          total += w * prediction_accuracy(s, 0);
        }
      }
    }
  }
  return total;
}

DiscreteJointTask diagonal_task4() {
  DiscreteJointTask task;
  task.x_alphabet = 4;
  task.c_alphabet = 4;
  task.joint.assign(16, 1.0 / 44.0);
  for (std::size_t i = 0; i < 4; ++i) task.joint[i * 4 + i] = 8.0 / 44.0;
  return task;
}

}  // namespace

TEST_CASE("true density ratio is the optimal scorer (exhaustive)") {
  const DiscreteJointTask task = diagonal_task4();
  std::vector<std::vector<double>> truth(4, std::vector<double>(4));
  std::vector<std::vector<double>> permuted(4, std::vector<double>(4));
  std::vector<std::vector<double>> constant(4, std::vector<double>(4, 1.0));
  const std::size_t perm[4] = {1, 2, 3, 0};
  for (std::size_t x = 0; x < 4; ++x) {
    for (std::size_t c = 0; c < 4; ++c) {
      truth[x][c] = true_density_ratio(task, x, c);
      permuted[x][c] = true_density_ratio(task, perm[x], c);
    }
  }
  const double l_true = exhaustive_loss3(task, truth);
  const double l_perm = exhaustive_loss3(task, permuted);
  const double l_const = exhaustive_loss3(task, constant);

  // frozen cross-check of the enumeration itself (independent evaluation)
  CHECK(l_true == doctest::Approx(0.7991192273757644).epsilon(1e-9));
  CHECK(l_perm == doctest::Approx(1.551090227642553).epsilon(1e-9));
  CHECK(l_const == doctest::Approx(std::log(3.0)).epsilon(1e-9));

  CHECK(l_true < l_perm);
  CHECK(l_true < l_const);

  // accuracy of the true-ratio scorer dominates the constant scorer
  CHECK(exhaustive_accuracy3(task, truth) >=
        exhaustive_accuracy3(task, constant));
}

TEST_CASE("oracle-scored gaussian bound sits just below the true MI") {
  // with N = 128 >> e^MI the bound is nearly tight at the optimum
  GaussianPairTask task{1, 0.8};
  MiEstimate est = eval_gaussian_mi(task, nullptr, 128, 150, 97);
  CHECK(est.true_mi == doctest::Approx(0.5108256237659907));
  CHECK(est.lower_bound <= est.true_mi + 3.0 * est.loss_se);
  CHECK(est.lower_bound > 0.9 * est.true_mi);
}

TEST_CASE("bound saturates at log N when the true MI is far above it") {
  // MI = 6 nats >> log 8; even the exact density-ratio scorer cannot
  // certify more than log N, and it gets within 10% of that cap
  const double rho = std::sqrt(1.0 - std::exp(-12.0));
  GaussianPairTask task{1, rho};
  CHECK(true_mi(task) == doctest::Approx(6.0).epsilon(1e-9));
  MiEstimate est = eval_gaussian_mi(task, nullptr, 8, 400, 98);
  const double log_n = std::log(8.0);
  CHECK(est.lower_bound <= log_n + 3.0 * est.loss_se);
  CHECK(est.lower_bound >= 0.9 * log_n);
}

TEST_CASE("multiset counting and exhaustive feasibility guard") {
  CHECK(multiset_count(3, 2) == doctest::Approx(4.0));
  CHECK(multiset_count(15, 4) == doctest::Approx(816.0));
  DiscreteJointTask task = diagonal_task4();
  // N too large for exhaustive enumeration over a big alphabet is refused
  DiscreteJointTask wide;
  wide.x_alphabet = 16;
  wide.c_alphabet = 2;
  wide.joint.assign(32, 1.0 / 32.0);
  CHECK_THROWS_AS(eval_discrete_mi_exact(wide, 16), ValueError);
  // in range it runs and bounds the true MI
  MiEstimate est = eval_discrete_mi_exact(task, 4);
  CHECK(est.lower_bound <= est.true_mi);
  CHECK(-est.loss_mean <= est.mine - std::log(3.0) + 1e-12);
}

TEST_CASE("summarize_mi builds the bound by construction") {
  std::vector<double> losses = {1.0, 1.2, 0.9, 1.1};
  std::vector<double> mines = {0.3, 0.5, 0.2, 0.4};
  MiEstimate est = summarize_mi(losses, mines, 16);
  CHECK(est.lower_bound == std::log(16.0) - est.loss_mean);
  CHECK(est.loss_mean == doctest::Approx(1.05));
  CHECK(est.n == 16);
  CHECK(est.batches == 4);
  CHECK(est.loss_se > 0.0);
  const std::string json = est.to_json();
  CHECK(json.find("mi_lower_bound") != std::string::npos);
}
