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

#include "cpc/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cpc/adam.hpp"
#include "cpc/kernels.hpp"

namespace cpc {

namespace {

// Sequence-id block reserved for evaluation data so training provenance
// never collides with it.
constexpr std::int64_t kEvalSequenceBase = std::int64_t(1) << 40;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double strict_argmax_accuracy_rows(const std::vector<double>& scores,
                                   std::size_t rows, std::size_t n) {
  std::size_t hits = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = scores.data() + r * n;
    bool win = true;
    for (std::size_t j = 1; j < n; ++j) {
      if (row[j] >= row[0]) {
        win = false;
        break;
      }
    }
    if (win) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(rows);
}

}  // namespace

Tensor pack_sequences(const std::vector<const LabeledSequence*>& batch) {
  if (batch.empty()) throw ValueError("pack_sequences of an empty batch");
  const std::size_t b_count = batch.size();
  const std::size_t frames = batch[0]->obs.rows();
  const std::size_t dims = batch[0]->obs.cols();
  Tensor x({b_count * dims, frames});
  for (std::size_t b = 0; b < b_count; ++b) {
    const Tensor& obs = batch[b]->obs;
    if (obs.rows() != frames || obs.cols() != dims) {
      throw ShapeError("batch sequences must share [T x D] shape");
    }
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t d = 0; d < dims; ++d) {
        x.values[(b * dims + d) * frames + t] = obs(t, d);
      }
    }
  }
  return x;
}

CpcLossPlan plan_cpc_loss(const ModelConfig& mc,
                          const std::vector<const LabeledSequence*>& batch,
                          std::size_t num_candidates,
                          NegativeStrategy strategy, Reduction reduction,
                          Rng& neg_rng) {
  const std::size_t b_count = batch.size();
  const std::size_t n = num_candidates;
  if (n < 2) throw ConfigError("num_candidates (N) must be >= 2");
  const std::size_t frames = batch[0]->obs.rows();
  const std::size_t t_lat = latent_length(mc.encoder, frames);
  const std::size_t horizons = mc.horizons;
  if (t_lat <= horizons) {
    throw ConfigError("latent length " + std::to_string(t_lat) +
                      " leaves no anchors for K=" + std::to_string(horizons) +
                      " horizons");
  }

  FramePool pool;
  for (const LabeledSequence* seq : batch) {
    pool.add_sequence(seq->sequence_id, seq->source_id, t_lat);
  }
  std::vector<std::vector<std::size_t>> eligible(b_count);
  for (std::size_t b = 0; b < b_count; ++b) {
    eligible[b] = pool.eligible_rows(strategy, batch[b]->sequence_id,
                                     batch[b]->source_id);
    if (eligible[b].empty()) {
      throw InfeasibleStrategyError(
          "strategy " + strategy_name(strategy) +
          " has no eligible frames for sequence " +
          std::to_string(batch[b]->sequence_id) + " (source " +
          std::to_string(batch[b]->source_id) + ")");
    }
  }

  CpcLossPlan plan;
  plan.num_candidates = n;
  plan.latent_frames = t_lat;
  plan.reduction = reduction;
  plan.ctx_idx.resize(horizons);
  plan.cand_idx.resize(horizons);
  for (std::size_t k = 1; k <= horizons; ++k) {
    const std::size_t per_seq = t_lat - k;
    const std::size_t anchors = b_count * per_seq;
    auto& ctx = plan.ctx_idx[k - 1];
    auto& cand = plan.cand_idx[k - 1];
    ctx.resize(anchors);
    cand.resize(anchors * n);
    std::size_t a = 0;
    for (std::size_t b = 0; b < b_count; ++b) {
      for (std::size_t t = 0; t < per_seq; ++t, ++a) {
        ctx[a] = b * t_lat + t;
        cand[a * n] = b * t_lat + t + k;  // positive in slot 0
        const std::vector<std::size_t> negs =
            draw_from_eligible(eligible[b], n - 1, neg_rng);
        for (std::size_t j = 0; j < n - 1; ++j) {
          cand[a * n + 1 + j] = negs[j];
        }
      }
    }
  }
  return plan;
}

CpcLossOutput cpc_loss_from_plan(Tape& tape, const CpcLeaves& leaves,
                                 const ModelConfig& mc, const Tensor& packed_x,
                                 std::size_t batch, const CpcLossPlan& plan) {
  const std::size_t n = plan.num_candidates;
  const std::size_t horizons = mc.horizons;
  if (plan.ctx_idx.size() != horizons) {
    throw ShapeError("loss plan does not match the model's horizon count");
  }
  Tensor z = encode_batch(tape, leaves, mc, packed_x, batch);
  Tensor c = contextualize_batch(tape, leaves, mc, z, batch,
                                 plan.latent_frames);

  CpcLossOutput out;
  std::vector<Tensor> horizon_losses;
  horizon_losses.reserve(horizons);
  for (std::size_t k = 1; k <= horizons; ++k) {
    const std::size_t anchors = plan.ctx_idx[k - 1].size();
    Tensor ctx = tape.gather_rows(c, plan.ctx_idx[k - 1]);
    Tensor pred = tape.matmul_nt(ctx, leaves.heads[k - 1]);
    Tensor cand = tape.gather_rows(z, plan.cand_idx[k - 1]);
    Tensor scores = tape.row_block_dot(pred, cand, n);
    const std::vector<std::size_t> positives(anchors, 0);
    horizon_losses.push_back(
        tape.cross_entropy_rows(scores, positives, plan.reduction));

    // per-horizon metrics from the same scores
    double mean_loss = 0.0;
    for (std::size_t r = 0; r < anchors; ++r) {
      std::span<const double> row(scores.values.data() + r * n, n);
      mean_loss += infonce_loss(row, 0);
    }
    out.loss_k.push_back(mean_loss / static_cast<double>(anchors));
    out.acc_k.push_back(
        strict_argmax_accuracy_rows(scores.values, anchors, n));
    if (k == 1) {
      std::vector<double> pos(anchors);
      std::vector<std::vector<double>> negs(anchors);
      for (std::size_t r = 0; r < anchors; ++r) {
        pos[r] = scores.values[r * n];
        negs[r].assign(scores.values.begin() + r * n + 1,
                       scores.values.begin() + (r + 1) * n);
      }
      out.mine_k1 = mine_estimate(pos, negs);
    }
  }

  Tensor total = horizon_losses[0];
  for (std::size_t k = 1; k < horizons; ++k) {
    total = tape.add(total, horizon_losses[k]);
  }
  if (plan.reduction == Reduction::kMean) {
    total = tape.scale(1.0 / static_cast<double>(horizons), total);
  }
  out.total_loss = total;
  return out;
}

namespace {

CpcLossOutput cpc_scores_and_loss(Tape& tape, const CpcLeaves& leaves,
                                  const ModelConfig& mc,
                                  const std::vector<const LabeledSequence*>& batch,
                                  std::size_t num_candidates,
                                  NegativeStrategy strategy,
                                  Reduction reduction, Rng& neg_rng) {
  const CpcLossPlan plan = plan_cpc_loss(mc, batch, num_candidates, strategy,
                                         reduction, neg_rng);
  const Tensor x = pack_sequences(batch);
  return cpc_loss_from_plan(tape, leaves, mc, x, batch.size(), plan);
}

// Half the batch sources are drawn, each contributing two distinct
// sequences, so every strategy (including same-source-excluding-current)
// stays feasible.
std::vector<LabeledSequence> sample_paired_batch(
    const LatentMarkovSequenceTask& task, std::size_t b_count,
    std::int64_t first_id, Rng& rng) {
  if (b_count < 2 || b_count % 2 != 0) {
    throw ConfigError("batch_sequences must be even and >= 2");
  }
  std::vector<LabeledSequence> batch;
  batch.reserve(b_count);
  for (std::size_t p = 0; p < b_count / 2; ++p) {
    const std::int64_t source =
        static_cast<std::int64_t>(rng.uniform_int(task.sources));
    batch.push_back(sample_sequence(task, source, first_id + 2 * p, rng));
    batch.push_back(sample_sequence(task, source, first_id + 2 * p + 1, rng));
  }
  return batch;
}

std::vector<const LabeledSequence*> as_pointers(
    const std::vector<LabeledSequence>& seqs) {
  std::vector<const LabeledSequence*> out;
  out.reserve(seqs.size());
  for (const LabeledSequence& s : seqs) out.push_back(&s);
  return out;
}

}  // namespace

CpcEvalResult evaluate_cpc(const CpcModel& model,
                           const std::vector<LabeledSequence>& sequences,
                           std::size_t num_candidates,
                           NegativeStrategy strategy, Rng& rng) {
  Tape tape;
  CpcLeaves leaves = bind(tape, model);
  CpcLossOutput out =
      cpc_scores_and_loss(tape, leaves, model.config, as_pointers(sequences),
                          num_candidates, strategy, Reduction::kMean, rng);
  CpcEvalResult res;
  res.loss_k = out.loss_k;
  res.acc_k = out.acc_k;
  res.mi_bound_k1 = mi_lower_bound(out.loss_k[0], num_candidates);
  res.mine_k1 = out.mine_k1;
  return res;
}

CpcTrainResult train_cpc(const LatentMarkovSequenceTask& task,
                         const ModelConfig& model_config,
                         const CpcTrainOptions& opts) {
  task.validate();
  model_config.validate();
  const double t_start = now_seconds();

  CpcTrainResult result;
  result.model = CpcModel::init(model_config, Rng::split(opts.seed, 10));
  result.initial_model = result.model;

  std::vector<Tensor*> params;
  for (auto& [name, t] : result.model.named_parameters()) params.push_back(t);
  AdamConfig adam_cfg;
  adam_cfg.learning_rate = opts.learning_rate;
  AdamState adam(params, adam_cfg);

  Rng data_rng(Rng::split(opts.seed, 11));
  Rng neg_rng(Rng::split(opts.seed, 12));
  Rng eval_data_rng(Rng::split(opts.seed, 13));
  const std::vector<LabeledSequence> eval_seqs = sample_paired_batch(
      task, opts.eval_sequences, kEvalSequenceBase, eval_data_rng);

  auto log_row = [&](std::uint64_t step) {
    Rng eval_rng(Rng::split(opts.seed, 1000 + step));
    CpcEvalResult ev = evaluate_cpc(result.model, eval_seqs,
                                    opts.num_candidates, opts.strategy,
                                    eval_rng);
    MetricRow row;
    row.step = step;
    row.loss_k = ev.loss_k;
    row.acc_k = ev.acc_k;
    row.mi_bound_k1 = ev.mi_bound_k1;
    row.mine_k1 = ev.mine_k1;
    row.wall_clock_s = now_seconds() - t_start;
    result.metrics.push_back(std::move(row));
  };

  for (std::uint64_t step = 1; step <= opts.steps; ++step) {
    const std::vector<LabeledSequence> batch = sample_paired_batch(
        task, opts.batch_sequences,
        static_cast<std::int64_t>((step - 1) * opts.batch_sequences),
        data_rng);
    Tape tape;
    CpcLeaves leaves = bind(tape, result.model);
    CpcLossOutput out = cpc_scores_and_loss(
        tape, leaves, model_config, as_pointers(batch), opts.num_candidates,
        opts.strategy, opts.loss_reduction, neg_rng);
    GradientMap grads = tape.backward(out.total_loss);

    std::vector<Tensor> grad_list;
    grad_list.reserve(params.size());
    auto named = result.model.named_parameters();
    std::size_t pi = 0;
    auto leaf_grads = [&](const Tensor& leaf) {
      grad_list.push_back(grads.grad(leaf));
      ++pi;
    };
    for (std::size_t i = 0; i < leaves.conv_kernels.size(); ++i) {
      leaf_grads(leaves.conv_kernels[i]);
      leaf_grads(leaves.conv_biases[i]);
    }
    leaf_grads(leaves.gru.input_proj);
    leaf_grads(leaves.gru.hidden_proj);
    leaf_grads(leaves.gru.candidate_proj);
    leaf_grads(leaves.gru.bias);
    for (const Tensor& head : leaves.heads) leaf_grads(head);
    if (pi != named.size()) {
      throw Error("internal: leaf order does not match named parameters");
    }
    adam.step(params, grad_list);
    result.model.trained_steps = step;

    if (opts.log_interval > 0 &&
        (step % opts.log_interval == 0 || step == opts.steps)) {
      log_row(step);
    }
  }
  if (opts.steps == 0 && opts.log_interval > 0) {
    // nothing trained; still record the initial state once? keep CSV
    // header-only per the cmd_train contract.
  }
  result.final_loss_slope = final_loss_slope(result.metrics);
  result.wall_clock_s = now_seconds() - t_start;
  return result;
}

std::string metrics_csv_header(std::size_t horizons) {
  std::string h = "step";
  for (std::size_t k = 1; k <= horizons; ++k) {
    h += ",loss_k" + std::to_string(k);
  }
  for (std::size_t k = 1; k <= horizons; ++k) {
    h += ",acc_k" + std::to_string(k);
  }
  h += ",mi_bound_k1,mine_k1";
  return h;
}

std::string metrics_csv_row(const MetricRow& row) {
  std::string line = std::to_string(row.step);
  for (double v : row.loss_k) line += "," + format_double(v);
  for (double v : row.acc_k) line += "," + format_double(v);
  line += "," + format_double(row.mi_bound_k1);
  line += "," + format_double(row.mine_k1);
  return line;
}

void write_metrics_csv(const std::string& path, std::size_t horizons,
                       const std::vector<MetricRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << metrics_csv_header(horizons) << "\n";
  for (const MetricRow& row : rows) {
    if (row.loss_k.size() != horizons || row.acc_k.size() != horizons) {
      throw ShapeError("metric row does not match the horizon count");
    }
    out << metrics_csv_row(row) << "\n";
  }
  if (!out) throw IoError("failed writing metrics: " + path);
}

double final_loss_slope(const std::vector<MetricRow>& rows,
                        std::size_t window) {
  if (rows.size() < 2) return 0.0;
  const std::size_t n = std::min(window, rows.size());
  const std::size_t start = rows.size() - n;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = start; i < rows.size(); ++i) {
    const double x = static_cast<double>(rows[i].step);
    const double y =
        kernels::reduce_sum(rows[i].loss_k.data(), rows[i].loss_k.size()) /
        static_cast<double>(rows[i].loss_k.size());
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double dn = static_cast<double>(n);
  const double denom = dn * sxx - sx * sx;
  return denom == 0.0 ? 0.0 : (dn * sxy - sx * sy) / denom;
}

std::vector<std::int32_t> latent_frame_labels(
    const EncoderConfig& enc, const std::vector<std::int32_t>& input_labels) {
  const std::size_t t_lat = latent_length(enc, input_labels.size());
  const std::size_t stride = total_stride(enc);
  const std::size_t center = (receptive_field(enc) - 1) / 2;
  std::vector<std::int32_t> out(t_lat);
  for (std::size_t t = 0; t < t_lat; ++t) {
    out[t] = input_labels[t * stride + center];
  }
  return out;
}

std::string probe_target_name(ProbeTarget t) {
  return t == ProbeTarget::kHiddenState ? "hidden-state" : "source-id";
}

namespace {

std::vector<std::int32_t> sequence_target_labels(
    const EncoderConfig& enc, const LabeledSequence& seq, ProbeTarget target) {
  if (target == ProbeTarget::kHiddenState) {
    return latent_frame_labels(enc, seq.states);
  }
  const std::size_t t_lat = latent_length(enc, seq.obs.rows());
  return std::vector<std::int32_t>(t_lat,
                                   static_cast<std::int32_t>(seq.source_id));
}

CpcLeaves bind_supervised(Tape& tape, const SupervisedModel& m) {
  CpcLeaves leaves;
  for (std::size_t i = 0; i < m.conv_kernels.size(); ++i) {
    leaves.conv_kernels.push_back(tape.leaf(m.conv_kernels[i]));
    leaves.conv_biases.push_back(tape.leaf(m.conv_biases[i]));
  }
  leaves.gru.input_proj = tape.leaf(m.gru.input_proj);
  leaves.gru.hidden_proj = tape.leaf(m.gru.hidden_proj);
  leaves.gru.candidate_proj = tape.leaf(m.gru.candidate_proj);
  leaves.gru.bias = tape.leaf(m.gru.bias);
  return leaves;
}

double supervised_accuracy(const SupervisedModel& model,
                           const std::vector<LabeledSequence>& seqs,
                           ProbeTarget target) {
  Tape tape;
  CpcLeaves leaves = bind_supervised(tape, model);
  Tensor head_w = tape.leaf(model.head_w);
  Tensor head_b = tape.leaf(model.head_b);
  const std::size_t frames = seqs[0].obs.rows();
  const std::size_t t_lat = latent_length(model.config.encoder, frames);
  Tensor x = pack_sequences(as_pointers(seqs));
  Tensor z = encode_batch(tape, leaves, model.config, x, seqs.size());
  Tensor c = contextualize_batch(tape, leaves, model.config, z, seqs.size(),
                                 t_lat);
  Tensor logits = tape.add_bias(tape.matmul_nt(c, head_w), head_b);
  std::size_t hits = 0, total = 0;
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const std::vector<std::int32_t> labels =
        sequence_target_labels(model.config.encoder, seqs[b], target);
    for (std::size_t t = 0; t < t_lat; ++t) {
      const double* row = logits.values.data() + (b * t_lat + t) * model.classes;
      std::size_t best = 0;
      for (std::size_t j = 1; j < model.classes; ++j) {
        if (row[j] > row[best]) best = j;  // ties keep the lowest class id
      }
      hits += best == static_cast<std::size_t>(labels[t]) ? 1 : 0;
      ++total;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

SupervisedResult train_supervised(const LatentMarkovSequenceTask& task,
                                  const ModelConfig& model_config,
                                  ProbeTarget target,
                                  const std::vector<LabeledSequence>& train,
                                  const std::vector<LabeledSequence>& test,
                                  const SupervisedTrainOptions& opts) {
  task.validate();
  model_config.validate();
  if (train.empty() || test.empty()) {
    throw ValueError("supervised training needs train and test sequences");
  }
  const std::size_t classes =
      target == ProbeTarget::kHiddenState ? task.states : task.sources;
  SupervisedResult result;
  result.model =
      SupervisedModel::init(model_config, classes, Rng::split(opts.seed, 20));
  std::vector<Tensor*> params;
  for (auto& [name, t] : result.model.named_parameters()) params.push_back(t);
  AdamConfig adam_cfg;
  adam_cfg.learning_rate = opts.learning_rate;
  AdamState adam(params, adam_cfg);
  Rng rng(Rng::split(opts.seed, 21));

  const std::size_t frames = train[0].obs.rows();
  const std::size_t t_lat = latent_length(model_config.encoder, frames);

  for (std::size_t step = 1; step <= opts.steps; ++step) {
    std::vector<const LabeledSequence*> batch(opts.batch_sequences);
    for (auto& p : batch) p = &train[rng.uniform_int(train.size())];

    Tape tape;
    CpcLeaves leaves = bind_supervised(tape, result.model);
    Tensor head_w = tape.leaf(result.model.head_w);
    Tensor head_b = tape.leaf(result.model.head_b);
    Tensor x = pack_sequences(batch);
    Tensor z = encode_batch(tape, leaves, model_config, x, batch.size());
    Tensor c =
        contextualize_batch(tape, leaves, model_config, z, batch.size(), t_lat);
    Tensor logits = tape.add_bias(tape.matmul_nt(c, head_w), head_b);
    std::vector<std::size_t> labels;
    labels.reserve(batch.size() * t_lat);
    for (const LabeledSequence* seq : batch) {
      for (std::int32_t l :
           sequence_target_labels(model_config.encoder, *seq, target)) {
        labels.push_back(static_cast<std::size_t>(l));
      }
    }
    Tensor loss = tape.cross_entropy_rows(logits, labels, Reduction::kMean);
    GradientMap grads = tape.backward(loss);

    std::vector<Tensor> grad_list;
    for (std::size_t i = 0; i < leaves.conv_kernels.size(); ++i) {
      grad_list.push_back(grads.grad(leaves.conv_kernels[i]));
      grad_list.push_back(grads.grad(leaves.conv_biases[i]));
    }
    grad_list.push_back(grads.grad(leaves.gru.input_proj));
    grad_list.push_back(grads.grad(leaves.gru.hidden_proj));
    grad_list.push_back(grads.grad(leaves.gru.candidate_proj));
    grad_list.push_back(grads.grad(leaves.gru.bias));
    grad_list.push_back(grads.grad(head_w));
    grad_list.push_back(grads.grad(head_b));
    adam.step(params, grad_list);
    result.model.trained_steps = step;
  }
  result.train_accuracy = supervised_accuracy(result.model, train, target);
  result.test_accuracy = supervised_accuracy(result.model, test, target);
  return result;
}

namespace {

struct PairGroup {
  Tensor x;  // [n x x_dim]
  Tensor c;  // [n x c_dim]
};

// All-vs-all InfoNCE over one group; positives on the diagonal.
struct PairEval {
  double loss = 0.0;
  double accuracy = 0.0;
  double mine = 0.0;
};

PairEval score_pair_group(Tape& tape, const PairLeaves& leaves,
                          const PairGroup& group, Tensor* loss_out) {
  const std::size_t n = group.x.rows();
  Tensor phi = embed_pair_x(tape, leaves, group.x);
  Tensor psi = embed_pair_c(tape, leaves, group.c);
  Tensor pred = tape.matmul_nt(psi, leaves.bilinear);
  Tensor scores = tape.matmul_nt(pred, phi);  // [n x n], rows are contexts
  std::vector<std::size_t> positives(n);
  for (std::size_t i = 0; i < n; ++i) positives[i] = i;
  Tensor loss = tape.cross_entropy_rows(scores, positives, Reduction::kMean);
  if (loss_out != nullptr) *loss_out = loss;

  PairEval ev;
  ev.loss = loss.values[0];
  std::size_t hits = 0;
  std::vector<double> pos(n);
  std::vector<std::vector<double>> negs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = scores.values.data() + i * n;
    bool win = true;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && row[j] >= row[i]) {
        win = false;
        break;
      }
    }
    hits += win ? 1 : 0;
    pos[i] = row[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) negs[i].push_back(row[j]);
    }
  }
  ev.accuracy = static_cast<double>(hits) / static_cast<double>(n);
  ev.mine = mine_estimate(pos, negs);
  return ev;
}

template <typename SampleGroupFn>
PairTrainResult train_pair_core(const PairScorerConfig& config,
                                const PairTrainOptions& opts,
                                SampleGroupFn sample_group) {
  if (opts.group_size < 2) throw ConfigError("pair group_size must be >= 2");
  if (opts.groups_per_batch < 1) {
    throw ConfigError("groups_per_batch must be >= 1");
  }
  const double t_start = now_seconds();
  PairTrainResult result;
  result.scorer = PairScorer::init(config, Rng::split(opts.seed, 30));

  std::vector<Tensor*> params;
  for (auto& [name, t] : result.scorer.named_parameters()) {
    params.push_back(t);
  }
  AdamConfig adam_cfg;
  adam_cfg.learning_rate = opts.learning_rate;
  AdamState adam(params, adam_cfg);
  Rng data_rng(Rng::split(opts.seed, 31));

  auto eval_rows = [&](std::uint64_t step) {
    Rng eval_rng(Rng::split(opts.seed, 2000 + step));
    double loss_sum = 0.0, acc_sum = 0.0, mine_sum = 0.0;
    for (std::size_t b = 0; b < opts.eval_batches; ++b) {
      Tape tape;
      PairLeaves leaves = bind(tape, result.scorer);
      const PairGroup group = sample_group(opts.group_size, eval_rng);
      PairEval ev = score_pair_group(tape, leaves, group, nullptr);
      loss_sum += ev.loss;
      acc_sum += ev.accuracy;
      mine_sum += ev.mine;
    }
    const double inv = 1.0 / static_cast<double>(opts.eval_batches);
    MetricRow row;
    row.step = step;
    row.loss_k = {loss_sum * inv};
    row.acc_k = {acc_sum * inv};
    row.mi_bound_k1 = mi_lower_bound(loss_sum * inv, opts.group_size);
    row.mine_k1 = mine_sum * inv;
    row.wall_clock_s = now_seconds() - t_start;
    result.metrics.push_back(std::move(row));
  };

  for (std::uint64_t step = 1; step <= opts.steps; ++step) {
    Tape tape;
    PairLeaves leaves = bind(tape, result.scorer);
    Tensor total;
    for (std::size_t g = 0; g < opts.groups_per_batch; ++g) {
      const PairGroup group = sample_group(opts.group_size, data_rng);
      Tensor loss;
      score_pair_group(tape, leaves, group, &loss);
      total = g == 0 ? loss : tape.add(total, loss);
    }
    if (opts.groups_per_batch > 1) {
      total = tape.scale(1.0 / static_cast<double>(opts.groups_per_batch),
                         total);
    }
    GradientMap grads = tape.backward(total);
    std::vector<Tensor> grad_list = {
        grads.grad(leaves.x_w1), grads.grad(leaves.x_b1),
        grads.grad(leaves.x_w2), grads.grad(leaves.x_b2),
        grads.grad(leaves.c_w1), grads.grad(leaves.c_b1),
        grads.grad(leaves.c_w2), grads.grad(leaves.c_b2),
        grads.grad(leaves.bilinear)};
    adam.step(params, grad_list);
    result.scorer.trained_steps = step;
    if (opts.log_interval > 0 &&
        (step % opts.log_interval == 0 || step == opts.steps)) {
      eval_rows(step);
    }
  }
  result.final_loss_slope = final_loss_slope(result.metrics);
  result.wall_clock_s = now_seconds() - t_start;
  return result;
}

}  // namespace

PairTrainResult train_pair_scorer(const GaussianPairTask& task,
                                  const PairScorerConfig& config,
                                  const PairTrainOptions& opts) {
  task.validate();
  if (config.x_dim != task.dim || config.c_dim != task.dim) {
    throw ConfigError("pair scorer dims must match the gaussian task dim");
  }
  return train_pair_core(config, opts, [&task](std::size_t n, Rng& rng) {
    PairBatch pairs = sample_pairs(task, n, rng);
    PairGroup group;
    group.x = std::move(pairs.x);
    group.c = std::move(pairs.c);
    return group;
  });
}

PairTrainResult train_pair_scorer(const DiscreteJointTask& task,
                                  const PairScorerConfig& config,
                                  const PairTrainOptions& opts) {
  task.validate();
  if (config.x_dim != task.x_alphabet || config.c_dim != task.c_alphabet) {
    throw ConfigError("pair scorer dims must match the discrete alphabets");
  }
  return train_pair_core(config, opts, [&task](std::size_t n, Rng& rng) {
    DiscretePairBatch pairs = sample_pairs(task, n, rng);
    PairGroup group;
    group.x = Tensor({n, task.x_alphabet});
    group.c = Tensor({n, task.c_alphabet});
    for (std::size_t i = 0; i < n; ++i) {
      group.x.values[i * task.x_alphabet + pairs.x[i]] = 1.0;
      group.c.values[i * task.c_alphabet + pairs.c[i]] = 1.0;
    }
    return group;
  });
}

}  // namespace cpc
