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

#include <cmath>
#include <cstdio>
#include <vector>

#include "cpc/synthdata.hpp"

using namespace cpc;

TEST_CASE("gaussian pairs have the configured correlation") {
  const std::size_t n = 100000;
  for (double rho : {0.0, 0.8}) {
    GaussianPairTask task{1, rho};
    Rng rng(51);
    PairBatch batch = sample_pairs(task, n, rng);
    double sx = 0, sc = 0, sxx = 0, scc = 0, sxc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = batch.x.values[i], c = batch.c.values[i];
      sx += x;
      sc += c;
      sxx += x * x;
      scc += c * c;
      sxc += x * c;
    }
    const double mx = sx / n, mc = sc / n;
    const double corr = (sxc / n - mx * mc) /
                        std::sqrt((sxx / n - mx * mx) * (scc / n - mc * mc));
    CHECK(std::fabs(corr - rho) < 0.01);
  }
}

TEST_CASE("discrete sampling matches the table") {
  DiscreteJointTask task{2, 2, {0.4, 0.1, 0.1, 0.4}};
  Rng rng(52);
  const std::size_t n = 100000;
  DiscretePairBatch batch = sample_pairs(task, n, rng);
  std::vector<std::size_t> counts(4, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ++counts[batch.x[i] * 2 + batch.c[i]];
  }
  for (std::size_t cell = 0; cell < 4; ++cell) {
    const double p = task.joint[cell];
    const double sigma = std::sqrt(n * p * (1 - p));
    CHECK(std::fabs(static_cast<double>(counts[cell]) - n * p) < 3.0 * sigma);
  }
}

TEST_CASE("true_mi closed forms") {
  CHECK(true_mi(GaussianPairTask{1, 0.0}) == doctest::Approx(0.0));
  // analytic value, cross-checked below by quadrature
  CHECK(true_mi(GaussianPairTask{1, 0.8}) ==
        doctest::Approx(0.5108256237659907).epsilon(1e-12));
  CHECK(true_mi(GaussianPairTask{5, 0.8}) ==
        doctest::Approx(5 * 0.5108256237659907).epsilon(1e-12));

  // frozen from a brute-force summation oracle
  DiscreteJointTask task{2, 2, {0.4, 0.1, 0.1, 0.4}};
  CHECK(true_mi(task) == doctest::Approx(0.19274475702175753).epsilon(1e-12));

  // independent product table carries zero information
  DiscreteJointTask indep{2, 2, {0.25, 0.25, 0.25, 0.25}};
  CHECK(true_mi(indep) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("discrete MI bounds and non-negativity on random tables") {
  Rng rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t ax = 2 + rng.uniform_int(4);
    const std::size_t ac = 2 + rng.uniform_int(4);
    DiscreteJointTask task;
    task.x_alphabet = ax;
    task.c_alphabet = ac;
    task.joint.resize(ax * ac);
    double total = 0.0;
    for (double& p : task.joint) {
      p = 0.05 + rng.uniform();
      total += p;
    }
    for (double& p : task.joint) p /= total;
    const double mi = true_mi(task);
    CHECK(mi >= -1e-12);
    CHECK(mi <= std::min(std::log(static_cast<double>(ax)),
                         std::log(static_cast<double>(ac))) +
                    1e-12);
  }
}

TEST_CASE("gaussian MI agrees with 2-D quadrature") {
  // I = E log p(x|c)/p(x), integrated on a trapezoid grid over [-8, 8]^2
  const double rho = 0.8;
  const double s2 = 1.0 - rho * rho;
  const double lim = 8.0;
  const std::size_t n = 1601;
  const double h = 2 * lim / (n - 1);
  double mi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = -lim + i * h;
    const double wc = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double x = -lim + j * h;
      const double wx = (j == 0 || j == n - 1) ? 0.5 : 1.0;
      const double pc = std::exp(-c * c / 2) / std::sqrt(2 * M_PI);
      const double pxc = std::exp(-(x - rho * c) * (x - rho * c) / (2 * s2)) /
                         std::sqrt(2 * M_PI * s2);
      const double px = std::exp(-x * x / 2) / std::sqrt(2 * M_PI);
      mi += wc * wx * pc * pxc * std::log(pxc / px);
    }
  }
  mi *= h * h;
  CHECK(std::fabs(mi - true_mi(GaussianPairTask{1, rho})) < 1e-6);
}

TEST_CASE("density ratios") {
  // independence in either family means ratio 1 everywhere
  GaussianPairTask indep{3, 0.0};
  std::vector<double> x = {0.3, -1.0, 2.0};
  std::vector<double> c = {1.0, 0.5, -0.2};
  CHECK(true_density_ratio(indep, x, c) == doctest::Approx(1.0));

  DiscreteJointTask prod{2, 2, {0.25, 0.25, 0.25, 0.25}};
  for (std::size_t xi = 0; xi < 2; ++xi)
    for (std::size_t ci = 0; ci < 2; ++ci)
      CHECK(true_density_ratio(prod, xi, ci) == doctest::Approx(1.0));

  // discrete ratio is table arithmetic
  DiscreteJointTask task{2, 2, {0.4, 0.1, 0.1, 0.4}};
  CHECK(true_density_ratio(task, 0, 0) ==
        doctest::Approx(0.4 / (0.5 * 0.5)).epsilon(1e-14));
  CHECK(true_density_ratio(task, 0, 1) ==
        doctest::Approx(0.1 / (0.5 * 0.5)).epsilon(1e-14));

  // gaussian ratio integrates to 1 against the marginal (quadrature oracle)
  GaussianPairTask g{1, 0.8};
  for (double cv : {-1.5, 0.0, 0.7, 2.0}) {
    const double lim = 10.0;
    const std::size_t n = 4001;
    const double h = 2 * lim / (n - 1);
    double integral = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double xv = -lim + j * h;
      const double w = (j == 0 || j == n - 1) ? 0.5 : 1.0;
      const double px = std::exp(-xv * xv / 2) / std::sqrt(2 * M_PI);
      const std::vector<double> xs = {xv};
      const std::vector<double> cs = {cv};
      integral += w * px * true_density_ratio(g, xs, cs);
    }
    integral *= h;
    CHECK(std::fabs(integral - 1.0) < 1e-6);
  }
}

TEST_CASE("markov sequences: noiseless observations identify the state") {
  LatentMarkovSequenceTask task;
  task.states = 4;
  task.sources = 1;
  task.emission_sigma = 0.0;
  task.obs_dim = 8;
  task.seq_len = 64;
  task.seed = 7;
  Rng rng(54);
  LabeledSequence seq = sample_sequence(task, 0, 0, rng);
  const Tensor emb = task.state_embeddings();
  const Tensor off = task.source_offsets();
  for (std::size_t t = 0; t < task.seq_len; ++t) {
    const std::int32_t s = seq.states[t];
    for (std::size_t d = 0; d < task.obs_dim; ++d) {
      CHECK(seq.obs(t, d) ==
            doctest::Approx(emb(s, d) + off(0, d)).epsilon(1e-14));
    }
  }
}

TEST_CASE("markov dwell time matches the geometric mean") {
  LatentMarkovSequenceTask task;
  task.states = 8;
  task.p_stay = 0.95;
  task.seq_len = 200000;
  task.obs_dim = 1;
  task.emission_sigma = 1.0;
  task.seed = 8;
  Rng rng(55);
  LabeledSequence seq = sample_sequence(task, 0, 0, rng);
  std::size_t runs = 0, frames = seq.states.size();
  for (std::size_t t = 1; t < frames; ++t) {
    if (seq.states[t] != seq.states[t - 1]) ++runs;
  }
  const double mean_dwell = static_cast<double>(frames) / (runs + 1);
  CHECK(mean_dwell == doctest::Approx(20.0).epsilon(0.10));
}

TEST_CASE("markov occupancy converges to the stationary distribution") {
  LatentMarkovSequenceTask task;
  task.states = 5;
  task.p_stay = 0.9;
  task.seq_len = 100000;
  task.obs_dim = 1;
  task.seed = 9;

  // power-iteration oracle on the transition matrix
  const Tensor trans = task.transition_matrix();
  std::vector<double> pi(task.states, 1.0 / task.states);
  for (int iter = 0; iter < 500; ++iter) {
    std::vector<double> next(task.states, 0.0);
    for (std::size_t i = 0; i < task.states; ++i) {
      for (std::size_t j = 0; j < task.states; ++j) {
        next[j] += pi[i] * trans(i, j);
      }
    }
    pi = next;
  }
  for (std::size_t s = 0; s < task.states; ++s) {
    CHECK(pi[s] == doctest::Approx(task.stationary_distribution()[s])
                       .epsilon(1e-10));
  }

  Rng rng(56);
  LabeledSequence seq = sample_sequence(task, 0, 0, rng);
  std::vector<std::size_t> counts(task.states, 0);
  for (std::int32_t s : seq.states) ++counts[s];
  for (std::size_t s = 0; s < task.states; ++s) {
    const double expect = task.seq_len * pi[s];
    // occupancy counts are positively autocorrelated (dwell ~ 10), which
    // inflates the variance over i.i.d. by roughly (1+p)/(1-p)
    const double sigma =
        std::sqrt(task.seq_len * pi[s] * (1 - pi[s]) * 19.0);
    CHECK(std::fabs(static_cast<double>(counts[s]) - expect) < 3.0 * sigma);
  }
}

TEST_CASE("generators are reproducible") {
  LatentMarkovSequenceTask task;
  task.seed = 33;
  Rng r1(77), r2(77);
  std::vector<LabeledSequence> a = sample_sequences(task, 3, r1);
  std::vector<LabeledSequence> b = sample_sequences(task, 3, r2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].obs.values == b[i].obs.values);
    CHECK(a[i].states == b[i].states);
    CHECK(a[i].source_id == b[i].source_id);
  }

  GaussianPairTask g{2, 0.5};
  Rng r3(78), r4(78);
  CHECK(sample_pairs(g, 100, r3).x.values == sample_pairs(g, 100, r4).x.values);
}

TEST_CASE("dataset dump round-trips") {
  LatentMarkovSequenceTask task;
  task.seq_len = 32;
  task.obs_dim = 4;
  task.seed = 5;
  Rng rng(57);
  std::vector<LabeledSequence> seqs = sample_sequences(task, 4, rng);
  const std::string path = "test_dataset_roundtrip.bin";
  write_dataset(path, R"({"kind":"markov"})", "train", seqs, task.obs_dim);
  Dataset ds = read_dataset(path);
  CHECK(ds.split == "train");
  CHECK(ds.obs_dim == task.obs_dim);
  REQUIRE(ds.sequences.size() == seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    CHECK(ds.sequences[i].obs.values == seqs[i].obs.values);
    CHECK(ds.sequences[i].states == seqs[i].states);
    CHECK(ds.sequences[i].source_id == seqs[i].source_id);
    CHECK(ds.sequences[i].sequence_id == seqs[i].sequence_id);
  }
  std::remove(path.c_str());

  CHECK_THROWS_AS(read_dataset("no_such_file.bin"), IoError);
}

TEST_CASE("config validation errors") {
  CHECK_THROWS_AS(GaussianPairTask({1, 1.0}).validate(), ConfigError);
  CHECK_THROWS_AS((DiscreteJointTask{2, 2, {0.5, 0.5, 0.0, 0.0}}).validate(),
                  ConfigError);
  CHECK_THROWS_AS((DiscreteJointTask{2, 2, {0.9, 0.2, 0.1, 0.4}}).validate(),
                  ConfigError);
  LatentMarkovSequenceTask bad;
  bad.p_stay = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
