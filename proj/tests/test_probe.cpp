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

#include "cpc/probe.hpp"

using namespace cpc;

namespace {

// Two blobs at +/-center with a sample-free band around the optimal
// boundary, so both of two near-optimal classifiers make identical calls.
struct Blobs {
  Tensor features;
  std::vector<std::int32_t> labels;
};

Blobs make_blobs(std::size_t n, double center, double band, Rng& rng) {
  Blobs out;
  out.features = Tensor({n, 2});
  out.labels.resize(n);
  std::size_t i = 0;
  while (i < n) {
    const int cls = i % 2;
    const double cx = cls == 0 ? -center : center;
    const double x = cx + rng.normal();
    const double y = rng.normal();
    if (std::fabs(x) < band) continue;  // keep the margin sample-free
    out.features(i, 0) = x;
    out.features(i, 1) = y;
    out.labels[i] = cls;
    ++i;
  }
  return out;
}

}  // namespace

TEST_CASE("one-hot features separate perfectly") {
  const std::size_t n = 40, classes = 4;
  Tensor feats({n, classes});
  std::vector<std::int32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<std::int32_t>(i % classes);
    feats(i, labels[i]) = 1.0;
  }
  LinearProbe probe = fit_linear_probe(feats, labels, classes, 0.0);
  CHECK(evaluate_probe(probe, feats, labels) == doctest::Approx(1.0));
}

TEST_CASE("constant features fall back to the class prior") {
  const std::size_t n = 100;
  Tensor feats({n, 3});  // all zeros
  std::vector<std::int32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = i < 60 ? 2 : (i < 80 ? 0 : 1);  // majority class 2 at 60%
  }
  LinearProbe probe = fit_linear_probe(feats, labels, 3, 0.0);
  CHECK(evaluate_probe(probe, feats, labels) == doctest::Approx(0.6));
}

TEST_CASE("separable blobs reach high test accuracy") {
  Rng rng(81);
  Blobs train = make_blobs(300, 2.0, 0.3, rng);
  Blobs test = make_blobs(300, 2.0, 0.3, rng);
  LinearProbe probe = fit_linear_probe(train.features, train.labels, 2, 0.0);
  CHECK(evaluate_probe(probe, test.features, test.labels) > 0.95);
}

TEST_CASE("probe input validation") {
  Tensor feats({4, 2});
  std::vector<std::int32_t> labels = {0, 1, 0, 1};
  // missing class
  CHECK_THROWS_WITH_AS(fit_linear_probe(feats, labels, 3, 0.0),
                       doctest::Contains("missing class"), ValueError);
  // fewer rows than classes
  Tensor two({2, 2});
  std::vector<std::int32_t> lab2 = {0, 1};
  CHECK_THROWS_AS(fit_linear_probe(two, lab2, 3, 0.0), ValueError);
  // negative l2
  CHECK_THROWS_AS(fit_linear_probe(feats, labels, 2, -1.0), ValueError);
  // dim mismatch at evaluation
  LinearProbe probe = fit_linear_probe(feats, labels, 2, 0.0);
  CHECK_THROWS_AS(evaluate_probe(probe, Tensor({4, 3}), labels), ShapeError);
}

TEST_CASE("zero weights predict the lowest class id") {
  LinearProbe probe;
  probe.classes = 3;
  probe.dim = 2;
  probe.weights = zeros({3, 3});
  Rng rng(82);
  Tensor feats = random_normal({90, 2}, rng);
  std::vector<std::int32_t> labels(90);
  for (std::size_t i = 0; i < 90; ++i) {
    labels[i] = static_cast<std::int32_t>(i % 3);
  }
  // all logits tie, so every prediction is class 0 -> accuracy 1/3
  CHECK(evaluate_probe(probe, feats, labels) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("random labels score near chance") {
  Rng rng(83);
  const std::size_t n = 4000, classes = 8;
  Tensor feats = random_normal({n, 4}, rng);
  std::vector<std::int32_t> labels(n);
  for (auto& l : labels) {
    l = static_cast<std::int32_t>(rng.uniform_int(classes));
  }
  LinearProbe probe = fit_linear_probe(feats, labels, classes, 1e-2);
  const double acc = evaluate_probe(probe, feats, labels);
  // train accuracy on random labels stays near 1/8 (binomial 3 sigma on n
  // draws, inflated slightly because the fit optimizes these same labels)
  const double p = 1.0 / classes;
  CHECK(std::fabs(acc - p) < 5.0 * std::sqrt(p * (1 - p) / n) + 0.01);
}

TEST_CASE("accuracy is invariant under invertible feature maps at l2=0") {
  Rng rng(84);
  Blobs train = make_blobs(500, 1.2, 0.25, rng);
  Blobs test = make_blobs(500, 1.2, 0.25, rng);

  auto apply = [](const Tensor& f, const double m[4]) {
    Tensor out = f;
    for (std::size_t i = 0; i < f.rows(); ++i) {
      out(i, 0) = m[0] * f(i, 0) + m[1] * f(i, 1);
      out(i, 1) = m[2] * f(i, 0) + m[3] * f(i, 1);
    }
    return out;
  };
  // well-conditioned invertible map
  const double m[4] = {2.0, 0.5, -0.3, 1.5};

  LinearProbe base = fit_linear_probe(train.features, train.labels, 2, 0.0);
  LinearProbe mapped =
      fit_linear_probe(apply(train.features, m), train.labels, 2, 0.0);
  const double acc_base = evaluate_probe(base, test.features, test.labels);
  const double acc_mapped =
      evaluate_probe(mapped, apply(test.features, m), test.labels);
  CHECK(std::fabs(acc_base - acc_mapped) <= 1e-3);
}

TEST_CASE("hidden-layer probe learns a nonlinear boundary") {
  // XOR-style data defeats the linear probe but not the MLP probe
  Rng rng(85);
  const std::size_t n = 600;
  Tensor feats({n, 2});
  std::vector<std::int32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal(), y = rng.normal();
    feats(i, 0) = x;
    feats(i, 1) = y;
    labels[i] = (x > 0) == (y > 0) ? 1 : 0;
  }
  LinearProbe lin = fit_linear_probe(feats, labels, 2, 0.0);
  MlpProbe mlp = fit_mlp_probe(feats, labels, 2, 32, 7, 1500, 3e-3);
  CHECK(evaluate_probe(lin, feats, labels) < 0.7);
  CHECK(evaluate_probe(mlp, feats, labels) > 0.9);
}

TEST_CASE("extract_features aligns frames with labels and stays frozen") {
  LatentMarkovSequenceTask task;
  task.states = 3;
  task.sources = 2;
  task.obs_dim = 4;
  task.seq_len = 32;
  task.emission_sigma = 0.5;
  task.seed = 21;

  ModelConfig mc;
  mc.encoder.strides = {2};
  mc.encoder.widths = {4};
  mc.encoder.channels = {6};
  mc.input_channels = 4;
  mc.latent_dim = 6;
  mc.context_dim = 5;
  mc.horizons = 2;
  CpcModel model = CpcModel::init(mc, 3);
  const std::uint64_t hash_before = parameter_hash(model.named_parameters());

  Rng rng(86);
  std::vector<LabeledSequence> seqs = sample_sequences(task, 3, rng);
  FrameDataset ctx = extract_features(model, seqs, FeatureSource::kContext);
  FrameDataset lat = extract_features(model, seqs, FeatureSource::kLatent);

  const std::size_t t_lat = latent_length(mc.encoder, task.seq_len);
  CHECK(ctx.features.rows() == 3 * t_lat);
  CHECK(ctx.features.cols() == mc.context_dim);
  CHECK(lat.features.cols() == mc.latent_dim);
  CHECK(ctx.state_labels.size() == 3 * t_lat);
  for (std::size_t s = 0; s < 3; ++s) {
    const std::vector<std::int32_t> expect =
        latent_frame_labels(mc.encoder, seqs[s].states);
    for (std::size_t t = 0; t < t_lat; ++t) {
      CHECK(ctx.state_labels[s * t_lat + t] == expect[t]);
      CHECK(ctx.source_labels[s * t_lat + t] ==
            static_cast<std::int32_t>(seqs[s].source_id));
    }
  }
  CHECK(parameter_hash(model.named_parameters()) == hash_before);
}

TEST_CASE("probe suite emits the full report grid on a tiny task") {
  LatentMarkovSequenceTask task;
  task.states = 3;
  task.sources = 2;
  task.obs_dim = 4;
  task.seq_len = 48;
  task.emission_sigma = 0.3;
  task.p_stay = 0.85;
  task.seed = 22;

  ModelConfig mc;
  mc.encoder.strides = {2};
  mc.encoder.widths = {4};
  mc.encoder.channels = {6};
  mc.input_channels = 4;
  mc.latent_dim = 6;
  mc.context_dim = 6;
  mc.horizons = 2;
  CpcModel model = CpcModel::init(mc, 4);
  CpcModel random_init = CpcModel::init(mc, 4);

  ProbeSuiteOptions opts;
  opts.train_sequences = 8;
  opts.val_sequences = 4;
  opts.test_sequences = 4;
  opts.data_seed = 11;
  opts.l2_grid = {0.0, 1e-2};
  opts.supervised.steps = 60;
  opts.supervised.batch_sequences = 4;
  opts.fit.max_iters = 300;
  opts.config_hash = "deadbeef";

  std::vector<ProbeReport> reports =
      run_probe_suite(model, random_init, task, opts);

  // 3 feature sources x 2 targets + 2 supervised rows
  CHECK(reports.size() == 8);
  std::size_t supervised_rows = 0;
  for (const ProbeReport& r : reports) {
    CHECK(r.train_accuracy >= 0.0);
    CHECK(r.train_accuracy <= 1.0);
    CHECK(r.test_accuracy >= 0.0);
    CHECK(r.test_accuracy <= 1.0);
    CHECK(r.config_hash == "deadbeef");
    if (r.feature_source == "supervised-ceiling") ++supervised_rows;
  }
  CHECK(supervised_rows == 2);

  const std::string json = probe_reports_to_json(reports);
  CHECK(json.find("cpc-c") != std::string::npos);
  CHECK(json.find("hidden-state") != std::string::npos);
  CHECK(json.find("source-id") != std::string::npos);
}
