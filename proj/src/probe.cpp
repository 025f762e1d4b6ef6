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

#include "cpc/probe.hpp"

#include <cmath>

#include <json.hpp>

#include "cpc/adam.hpp"
#include "cpc/kernels.hpp"

namespace cpc {

namespace ker = cpc::kernels;

namespace {

void check_probe_inputs(const Tensor& features,
                        const std::vector<std::int32_t>& labels,
                        std::size_t classes) {
  if (features.rank() != 2) {
    throw ShapeError("probe features must be [n x d], got " +
                     shape_to_string(features.shape));
  }
  if (labels.size() != features.rows()) {
    throw ShapeError("probe labels must match feature rows");
  }
  for (std::int32_t l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      throw ValueError("probe label " + std::to_string(l) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

Tensor with_bias_column(const Tensor& features) {
  const std::size_t n = features.rows(), d = features.cols();
  Tensor out({n, d + 1});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(features.values.begin() + i * d,
              features.values.begin() + (i + 1) * d,
              out.values.begin() + i * (d + 1));
    out.values[i * (d + 1) + d] = 1.0;
  }
  return out;
}

std::size_t argmax_lowest(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

}  // namespace

LinearProbe fit_linear_probe(const Tensor& features,
                             const std::vector<std::int32_t>& labels,
                             std::size_t classes, double l2,
                             const ProbeFitOptions& opts) {
  check_probe_inputs(features, labels, classes);
  if (l2 < 0.0) throw ValueError("probe l2 must be non-negative");
  const std::size_t n = features.rows();
  if (n < classes) {
    throw ValueError("probe needs at least as many rows as classes");
  }
  std::vector<bool> seen(classes, false);
  for (std::int32_t l : labels) seen[l] = true;
  for (std::size_t c = 0; c < classes; ++c) {
    if (!seen[c]) {
      throw ValueError("probe training data is missing class " +
                       std::to_string(c));
    }
  }

  const Tensor xb = with_bias_column(features);
  const std::size_t dim = features.cols();
  const std::size_t cols = dim + 1;

  LinearProbe probe;
  probe.classes = classes;
  probe.dim = dim;
  probe.weights = zeros({classes, cols});

  std::vector<Tensor*> params = {&probe.weights};
  AdamConfig cfg;
  cfg.learning_rate = opts.learning_rate;
  AdamState adam(params, cfg);

  std::vector<double> logits(n * classes);
  Tensor grad({classes, cols});
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t iter = 0; iter < opts.max_iters; ++iter) {
    ker::matmul_nt(xb.values.data(), probe.weights.values.data(),
                   logits.data(), n, cols, classes);
    // logits -> softmax residual in place
    for (std::size_t i = 0; i < n; ++i) {
      double* row = logits.data() + i * classes;
      const double m = ker::reduce_max(row, classes);
      double z = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        row[c] = std::exp(row[c] - m);
        z += row[c];
      }
      for (std::size_t c = 0; c < classes; ++c) row[c] /= z;
      row[labels[i]] -= 1.0;
    }
    // grad = (P - Y)^T X / n (+ l2 on non-bias columns)
    ker::matmul_tn(logits.data(), xb.values.data(), grad.values.data(),
                   classes, n, cols, /*acc=*/false);
    ker::scale(inv_n, grad.values.data(), grad.values.data(), grad.size());
    if (l2 > 0.0) {
      for (std::size_t c = 0; c < classes; ++c) {
        ker::axpy(l2, probe.weights.values.data() + c * cols,
                  grad.values.data() + c * cols, dim);  // bias excluded
      }
    }
    const double gnorm =
        std::sqrt(ker::dot(grad.values.data(), grad.values.data(),
                           grad.size()));
    probe.final_grad_norm = gnorm;
    probe.iters_used = iter + 1;
    if (gnorm < opts.grad_tol) break;
    adam.step(params, {grad});
  }
  return probe;
}

double evaluate_probe(const LinearProbe& probe, const Tensor& features,
                      const std::vector<std::int32_t>& labels) {
  check_probe_inputs(features, labels, probe.classes);
  if (features.cols() != probe.dim) {
    throw ShapeError("probe expects feature dim " + std::to_string(probe.dim) +
                     ", got " + std::to_string(features.cols()));
  }
  const Tensor xb = with_bias_column(features);
  const std::size_t n = features.rows();
  std::vector<double> logits(n * probe.classes);
  ker::matmul_nt(xb.values.data(), probe.weights.values.data(), logits.data(),
                 n, probe.dim + 1, probe.classes);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (argmax_lowest(logits.data() + i * probe.classes, probe.classes) ==
        static_cast<std::size_t>(labels[i])) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

MlpProbe fit_mlp_probe(const Tensor& features,
                       const std::vector<std::int32_t>& labels,
                       std::size_t classes, std::size_t hidden,
                       std::uint64_t seed, std::size_t iters,
                       double learning_rate) {
  check_probe_inputs(features, labels, classes);
  const std::size_t d = features.cols();
  Rng rng(Rng::split(seed, 60));
  MlpProbe probe;
  probe.classes = classes;
  probe.w1 = uniform_init({hidden, d}, 1.0 / std::sqrt((double)d), rng);
  probe.b1 = zeros({hidden});
  probe.w2 =
      uniform_init({classes, hidden}, 1.0 / std::sqrt((double)hidden), rng);
  probe.b2 = zeros({classes});
  std::vector<Tensor*> params = {&probe.w1, &probe.b1, &probe.w2, &probe.b2};
  AdamConfig cfg;
  cfg.learning_rate = learning_rate;
  AdamState adam(params, cfg);

  const std::size_t n = features.rows();
  const std::size_t batch = std::min<std::size_t>(n, 512);
  for (std::size_t iter = 0; iter < iters; ++iter) {
    std::vector<std::size_t> rows(batch);
    std::vector<std::size_t> lab(batch);
    Tensor xb({batch, d});
    for (std::size_t i = 0; i < batch; ++i) {
      rows[i] = rng.uniform_int(n);
      lab[i] = static_cast<std::size_t>(labels[rows[i]]);
      std::copy(features.values.begin() + rows[i] * d,
                features.values.begin() + (rows[i] + 1) * d,
                xb.values.begin() + i * d);
    }
    Tape tape;
    Tensor w1 = tape.leaf(probe.w1), b1 = tape.leaf(probe.b1);
    Tensor w2 = tape.leaf(probe.w2), b2 = tape.leaf(probe.b2);
    Tensor h = tape.relu(tape.add_bias(tape.matmul_nt(xb, w1), b1));
    Tensor logits = tape.add_bias(tape.matmul_nt(h, w2), b2);
    Tensor loss = tape.cross_entropy_rows(logits, lab, Reduction::kMean);
    GradientMap grads = tape.backward(loss);
    adam.step(params, {grads.grad(w1), grads.grad(b1), grads.grad(w2),
                       grads.grad(b2)});
  }
  return probe;
}

double evaluate_probe(const MlpProbe& probe, const Tensor& features,
                      const std::vector<std::int32_t>& labels) {
  check_probe_inputs(features, labels, probe.classes);
  const std::size_t n = features.rows();
  const std::size_t hidden = probe.w1.rows();
  std::vector<double> h(n * hidden);
  ker::matmul_nt(features.values.data(), probe.w1.values.data(), h.data(), n,
                 features.cols(), hidden);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < hidden; ++j) {
      double v = h[i * hidden + j] + probe.b1.values[j];
      h[i * hidden + j] = v > 0.0 ? v : 0.0;
    }
  }
  std::vector<double> logits(n * probe.classes);
  ker::matmul_nt(h.data(), probe.w2.values.data(), logits.data(), n, hidden,
                 probe.classes);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double* row = logits.data() + i * probe.classes;
    for (std::size_t c = 0; c < probe.classes; ++c) {
      row[c] += probe.b2.values[c];
    }
    if (argmax_lowest(row, probe.classes) ==
        static_cast<std::size_t>(labels[i])) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

FrameDataset extract_features(const CpcModel& model,
                              const std::vector<LabeledSequence>& sequences,
                              FeatureSource source) {
  if (sequences.empty()) throw ValueError("extract_features of no sequences");
  const ModelConfig& mc = model.config;
  const std::size_t frames = sequences[0].obs.rows();
  const std::size_t t_lat = latent_length(mc.encoder, frames);
  const std::size_t dim =
      source == FeatureSource::kContext ? mc.context_dim : mc.latent_dim;

  FrameDataset out;
  out.features = Tensor({sequences.size() * t_lat, dim});
  out.state_labels.reserve(sequences.size() * t_lat);
  out.source_labels.reserve(sequences.size() * t_lat);

  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const LabeledSequence& seq = sequences[s];
    // single-sequence forward on an internal tape
    Tensor x({mc.input_channels, frames});
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t d = 0; d < mc.input_channels; ++d) {
        x.values[d * frames + t] = seq.obs(t, d);
      }
    }
    Tensor z = encode(model, x);
    Tensor feat =
        source == FeatureSource::kContext ? contextualize(model, z) : z;
    std::copy(feat.values.begin(), feat.values.end(),
              out.features.values.begin() + s * t_lat * dim);
    const std::vector<std::int32_t> states =
        latent_frame_labels(mc.encoder, seq.states);
    out.state_labels.insert(out.state_labels.end(), states.begin(),
                            states.end());
    out.source_labels.insert(out.source_labels.end(), t_lat,
                             static_cast<std::int32_t>(seq.source_id));
  }
  return out;
}

std::string probe_reports_to_json(const std::vector<ProbeReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ProbeReport& r : reports) {
    arr.push_back({{"feature_source", r.feature_source},
                   {"target", r.target},
                   {"probe_arch", r.probe_arch},
                   {"train_accuracy", r.train_accuracy},
                   {"test_accuracy", r.test_accuracy},
                   {"feature_dim", r.feature_dim},
                   {"l2", r.l2},
                   {"config_hash", r.config_hash}});
  }
  nlohmann::json j = {{"schema_version", 1}, {"reports", arr}};
  return j.dump(2);
}

namespace {

struct SplitData {
  std::vector<LabeledSequence> train, val, test;
};

SplitData make_probe_splits(const LatentMarkovSequenceTask& task,
                            const ProbeSuiteOptions& opts) {
  Rng rng(Rng::split(opts.data_seed, 70));
  SplitData data;
  std::int64_t next_id = std::int64_t(1) << 41;
  data.train = sample_sequences(task, opts.train_sequences, rng, next_id);
  next_id += static_cast<std::int64_t>(opts.train_sequences);
  data.val = sample_sequences(task, opts.val_sequences, rng, next_id);
  next_id += static_cast<std::int64_t>(opts.val_sequences);
  data.test = sample_sequences(task, opts.test_sequences, rng, next_id);
  return data;
}

const std::vector<std::int32_t>& pick_labels(const FrameDataset& d,
                                             ProbeTarget target) {
  return target == ProbeTarget::kHiddenState ? d.state_labels
                                             : d.source_labels;
}

}  // namespace

std::vector<ProbeReport> run_probe_suite(const CpcModel& trained,
                                         const CpcModel& random_init,
                                         const LatentMarkovSequenceTask& task,
                                         const ProbeSuiteOptions& opts) {
  task.validate();
  if (opts.l2_grid.empty()) throw ConfigError("probe l2 grid is empty");
  const SplitData data = make_probe_splits(task, opts);
  const std::uint64_t trained_hash = parameter_hash(trained.named_parameters());
  const std::uint64_t random_hash =
      parameter_hash(random_init.named_parameters());

  struct Source {
    std::string tag;
    const CpcModel* model;
    FeatureSource features;
  };
  std::vector<Source> sources = {
      {opts.trained_tag, &trained, FeatureSource::kContext},
  };
  if (opts.include_random_baseline) {
    sources.push_back({"random-init", &random_init, FeatureSource::kContext});
  }
  if (opts.include_latent_features && opts.trained_tag == "cpc-c") {
    sources.push_back({"cpc-z", &trained, FeatureSource::kLatent});
  }

  std::vector<ProbeReport> reports;
  for (const Source& src : sources) {
    const FrameDataset train_d =
        extract_features(*src.model, data.train, src.features);
    const FrameDataset val_d =
        extract_features(*src.model, data.val, src.features);
    const FrameDataset test_d =
        extract_features(*src.model, data.test, src.features);
    for (ProbeTarget target :
         {ProbeTarget::kHiddenState, ProbeTarget::kSourceId}) {
      const std::size_t classes = target == ProbeTarget::kHiddenState
                                      ? task.states
                                      : task.sources;
      double best_val = -1.0, best_l2 = opts.l2_grid.front();
      LinearProbe best_probe;
      for (double l2 : opts.l2_grid) {
        LinearProbe probe =
            fit_linear_probe(train_d.features, pick_labels(train_d, target),
                             classes, l2, opts.fit);
        const double val_acc =
            evaluate_probe(probe, val_d.features, pick_labels(val_d, target));
        if (val_acc > best_val) {
          best_val = val_acc;
          best_l2 = l2;
          best_probe = std::move(probe);
        }
      }
      ProbeReport report;
      report.feature_source = src.tag;
      report.target = probe_target_name(target);
      report.probe_arch = "linear";
      report.train_accuracy = evaluate_probe(best_probe, train_d.features,
                                             pick_labels(train_d, target));
      report.test_accuracy = evaluate_probe(best_probe, test_d.features,
                                            pick_labels(test_d, target));
      report.feature_dim = train_d.features.cols();
      report.l2 = best_l2;
      report.config_hash = opts.config_hash;
      reports.push_back(std::move(report));

      if (opts.include_hidden_probe) {
        MlpProbe mlp = fit_mlp_probe(train_d.features,
                                     pick_labels(train_d, target), classes,
                                     opts.hidden_width, opts.data_seed);
        ProbeReport hr;
        hr.feature_source = src.tag;
        hr.target = probe_target_name(target);
        hr.probe_arch = "hidden" + std::to_string(opts.hidden_width);
        hr.train_accuracy =
            evaluate_probe(mlp, train_d.features, pick_labels(train_d, target));
        hr.test_accuracy =
            evaluate_probe(mlp, test_d.features, pick_labels(test_d, target));
        hr.feature_dim = train_d.features.cols();
        hr.l2 = 0.0;
        hr.config_hash = opts.config_hash;
        reports.push_back(std::move(hr));
      }
    }
  }

  if (opts.include_supervised) {
    for (ProbeTarget target :
         {ProbeTarget::kHiddenState, ProbeTarget::kSourceId}) {
      SupervisedResult sup = train_supervised(
          task, trained.config, target, data.train, data.test,
          opts.supervised);
      ProbeReport report;
      report.feature_source = "supervised-ceiling";
      report.target = probe_target_name(target);
      report.probe_arch = "linear";
      report.train_accuracy = sup.train_accuracy;
      report.test_accuracy = sup.test_accuracy;
      report.feature_dim = trained.config.context_dim;
      report.l2 = 0.0;
      report.config_hash = opts.config_hash;
      reports.push_back(std::move(report));
    }
  }

  // frozen-feature contract
  if (parameter_hash(trained.named_parameters()) != trained_hash ||
      parameter_hash(random_init.named_parameters()) != random_hash) {
    throw Error("probe suite mutated frozen model parameters");
  }
  return reports;
}

}  // namespace cpc
