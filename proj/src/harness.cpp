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

#include "cpc/harness.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "cpc/kernels.hpp"
#include "cpc/train.hpp"

namespace cpc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  if (!text.empty() && text.back() != '\n') out << "\n";
  if (!out) throw IoError("failed writing: " + path);
}

json summary_common(const ExperimentConfig& config, double wall_clock_s) {
  return {{"schema_version", 1},
          {"config_hash", config_hash_hex(config)},
          {"kernel_backend", kernels::active().name},
          {"wall_clock_s", wall_clock_s},
          {"config", json::parse(config_to_json(config))}};
}

json metrics_timing(const std::vector<MetricRow>& rows) {
  json arr = json::array();
  for (const MetricRow& row : rows) {
    arr.push_back({{"step", row.step}, {"wall_clock_s", row.wall_clock_s}});
  }
  return arr;
}

}  // namespace

CpcTrainOptions cpc_train_options(const ExperimentConfig& config) {
  CpcTrainOptions opts;
  opts.steps = config.training.steps;
  opts.batch_sequences = config.training.batch_size;
  opts.learning_rate = config.training.learning_rate;
  opts.seed = config.training.seed;
  opts.log_interval = config.training.log_interval;
  opts.num_candidates = config.contrastive.num_candidates;
  opts.strategy = config.contrastive.strategy;
  opts.loss_reduction = config.contrastive.loss_reduction;
  opts.eval_sequences = config.training.eval_sequences;
  return opts;
}

PairTrainOptions pair_train_options(const ExperimentConfig& config) {
  PairTrainOptions opts;
  opts.steps = config.training.steps;
  opts.group_size = config.contrastive.num_candidates;
  opts.groups_per_batch = config.training.groups_per_batch;
  opts.learning_rate = config.training.learning_rate;
  opts.seed = config.training.seed;
  opts.log_interval = config.training.log_interval;
  opts.eval_batches = config.training.eval_batches;
  return opts;
}

TrainArtifacts run_train_command(const ExperimentConfig& config,
                                 const std::string& out_dir) {
  config.validate();
  ensure_dir(out_dir);
  TrainArtifacts art;
  art.metrics_csv_path = out_dir + "/metrics.csv";
  art.checkpoint_path = out_dir + "/checkpoint.json";
  art.summary_path = out_dir + "/run_summary.json";

  if (config.model_kind == ModelKind::kCpc) {
    CpcTrainResult result =
        train_cpc(config.task.markov, config.cpc_model,
                  cpc_train_options(config));
    art.random_init_path = out_dir + "/random_init.json";
    save_checkpoint(art.checkpoint_path, result.model);
    save_checkpoint(art.random_init_path, result.initial_model);
    write_metrics_csv(art.metrics_csv_path, config.cpc_model.horizons,
                      result.metrics);
    json summary = summary_common(config, result.wall_clock_s);
    summary["command"] = "train";
    summary["steps"] = result.model.trained_steps;
    summary["final_loss_slope"] = result.final_loss_slope;
    summary["timing"] = metrics_timing(result.metrics);
    write_text(art.summary_path, summary.dump(2));
    art.metrics = std::move(result.metrics);
    art.wall_clock_s = result.wall_clock_s;
  } else {
    PairTrainResult result;
    if (config.task.kind == TaskKind::kGaussian) {
      result = train_pair_scorer(config.task.gaussian, config.pair_model,
                                 pair_train_options(config));
    } else {
      result = train_pair_scorer(config.task.discrete, config.pair_model,
                                 pair_train_options(config));
    }
    save_checkpoint(art.checkpoint_path, result.scorer);
    write_metrics_csv(art.metrics_csv_path, 1, result.metrics);
    json summary = summary_common(config, result.wall_clock_s);
    summary["command"] = "train";
    summary["steps"] = result.scorer.trained_steps;
    summary["final_loss_slope"] = result.final_loss_slope;
    summary["timing"] = metrics_timing(result.metrics);
    write_text(art.summary_path, summary.dump(2));
    art.metrics = std::move(result.metrics);
    art.wall_clock_s = result.wall_clock_s;
  }
  return art;
}

MiEstimate run_eval_mi_command(const ExperimentConfig& config,
                               const std::string& checkpoint_path,
                               bool use_oracle, std::size_t batches,
                               const std::string& out_dir) {
  config.validate();
  if (config.task.kind == TaskKind::kMarkov) {
    throw ConfigError(
        "eval-mi requires a task with oracle MI (gaussian or discrete)");
  }
  if (!use_oracle && checkpoint_path.empty()) {
    throw ConfigError("eval-mi needs --checkpoint or --oracle");
  }

  PairScorer scorer;
  const bool have_scorer = !use_oracle;
  if (have_scorer) scorer = load_pair_checkpoint(checkpoint_path);

  MiEstimate est;
  if (config.task.kind == TaskKind::kGaussian) {
    est = eval_gaussian_mi(config.task.gaussian,
                           have_scorer ? &scorer : nullptr,
                           config.contrastive.num_candidates, batches,
                           config.training.seed);
  } else {
    const DiscreteJointTask& task = config.task.discrete;
    if (have_scorer) {
      const std::vector<double> table = pair_scorer_table(scorer, task);
      est = eval_discrete_mi_exact(
          task, config.contrastive.num_candidates,
          [&table, &task](std::size_t x, std::size_t c) {
            return table[x * task.c_alphabet + c];
          });
    } else {
      est = eval_discrete_mi_exact(task, config.contrastive.num_candidates);
    }
  }
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    json j = json::parse(est.to_json());
    j["scorer"] = use_oracle ? "oracle" : "model";
    j["task"] = json::parse(task_to_json(config.task));
    write_text(out_dir + "/mi_report.json", j.dump(2));
  }
  return est;
}

std::string ablate_csv(const std::vector<AblateRow>& rows) {
  std::string out = "axis,setting,status,probe_accuracy,final_acc_k1\n";
  for (const AblateRow& r : rows) {
    char buf[64];
    out += r.axis + "," + r.setting + "," + r.status;
    if (r.status == "ok") {
      std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", r.probe_accuracy,
                    r.final_acc_k1);
      out += buf;
    } else {
      out += ",,";
    }
    out += "\n";
  }
  return out;
}

namespace {

std::size_t ablate_workers(std::size_t settings) {
  std::size_t workers = 1;
  if (const char* env = std::getenv("CPC_LAB_THREADS")) {
    const long v = std::atol(env);
    if (v > 0) workers = static_cast<std::size_t>(v);
  }
  return std::min(workers, settings);
}

AblateRow run_one_ablation(const ExperimentConfig& base,
                           const std::string& axis,
                           const std::string& setting) {
  ExperimentConfig config = base;
  if (axis == "steps") {
    config.cpc_model.horizons = static_cast<std::size_t>(
        std::strtoul(setting.c_str(), nullptr, 10));
  } else {
    config.contrastive.strategy = parse_strategy(setting);
  }
  AblateRow row;
  row.axis = axis;
  row.setting = setting;
  try {
    CpcTrainResult result = train_cpc(config.task.markov, config.cpc_model,
                                      cpc_train_options(config));
    ProbeSuiteOptions popts;
    popts.data_seed = Rng::split(base.training.seed, 9999);
    popts.include_latent_features = false;
    popts.include_supervised = false;
    popts.include_random_baseline = false;
    popts.config_hash = config_hash_hex(config);
    const std::vector<ProbeReport> reports = run_probe_suite(
        result.model, result.initial_model, config.task.markov, popts);
    row.status = "ok";
    for (const ProbeReport& r : reports) {
      if (r.feature_source == "cpc-c" && r.target == "hidden-state" &&
          r.probe_arch == "linear") {
        row.probe_accuracy = r.test_accuracy;
      }
    }
    row.final_acc_k1 =
        result.metrics.empty() ? 0.0 : result.metrics.back().acc_k[0];
  } catch (const InfeasibleStrategyError&) {
    row.status = "infeasible";
  }
  return row;
}

}  // namespace

std::vector<AblateRow> run_ablate_command(const ExperimentConfig& config,
                                          const std::string& axis,
                                          const std::string& out_dir) {
  config.validate();
  if (config.model_kind != ModelKind::kCpc) {
    throw ConfigError("ablate requires a markov/cpc config");
  }
  std::vector<std::string> settings;
  if (axis == "steps") {
    settings = {"1", "2", "4", "8"};
  } else if (axis == "negatives") {
    for (NegativeStrategy s : all_strategies()) {
      settings.push_back(strategy_name(s));
    }
  } else {
    throw ConfigError("ablate axis must be 'steps' or 'negatives'");
  }

  kernels::active();  // settle backend selection before spawning workers
  std::vector<AblateRow> rows(settings.size());
  const std::size_t workers = ablate_workers(settings.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < settings.size(); ++i) {
      rows[i] = run_one_ablation(config, axis, settings[i]);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= rows.size()) return;
          rows[i] = run_one_ablation(config, axis, settings[i]);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_text(out_dir + "/ablation.csv", ablate_csv(rows));
  }
  return rows;
}

std::vector<ProbeReport> run_probe_command(const ExperimentConfig& config,
                                           const std::string& checkpoint_path,
                                           bool include_hidden_probe,
                                           const std::string& out_dir) {
  config.validate();
  if (config.task.kind != TaskKind::kMarkov) {
    throw ConfigError("probe requires a markov task config");
  }
  const CpcModel trained = load_cpc_checkpoint(checkpoint_path);
  const CpcModel random_init =
      CpcModel::init(trained.config, trained.init_seed);

  ProbeSuiteOptions opts;
  opts.data_seed = Rng::split(config.training.seed, 9999);
  opts.include_hidden_probe = include_hidden_probe;
  opts.config_hash = config_hash_hex(config);
  opts.supervised.seed = config.training.seed;
  if (trained.trained_steps == 0) {
    // tagging contract: an untrained checkpoint reports as random-init
    opts.trained_tag = "random-init";
    opts.include_random_baseline = false;
    opts.include_latent_features = false;
  }
  std::vector<ProbeReport> reports =
      run_probe_suite(trained, random_init, config.task.markov, opts);
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_text(out_dir + "/probe_reports.json",
               probe_reports_to_json(reports));
  }
  return reports;
}

std::vector<std::string> run_gen_data_command(const ExperimentConfig& config,
                                              const GenDataCounts& counts,
                                              const std::string& out_dir) {
  config.validate();
  ensure_dir(out_dir);
  const std::string task_json = task_to_json(config.task);
  const struct {
    const char* split;
    std::size_t count;
    std::uint64_t stream;
  } splits[] = {{"train", counts.train, 80},
                {"val", counts.val, 81},
                {"test", counts.test, 82}};
  std::vector<std::string> paths;
  for (const auto& sp : splits) {
    if (sp.count == 0) continue;
    Rng rng(Rng::split(config.training.seed, sp.stream));
    std::vector<LabeledSequence> seqs;
    std::size_t obs_dim = 0;
    if (config.task.kind == TaskKind::kMarkov) {
      seqs = sample_sequences(config.task.markov, sp.count, rng,
                              static_cast<std::int64_t>(sp.stream) << 32);
      obs_dim = config.task.markov.obs_dim;
    } else if (config.task.kind == TaskKind::kGaussian) {
      // pairs dumped as single-frame sequences: obs = [x | c]
      const GaussianPairTask& task = config.task.gaussian;
      PairBatch pairs = sample_pairs(task, sp.count, rng);
      obs_dim = 2 * task.dim;
      for (std::size_t i = 0; i < sp.count; ++i) {
        LabeledSequence s;
        s.obs = Tensor({1, obs_dim});
        for (std::size_t d = 0; d < task.dim; ++d) {
          s.obs.values[d] = pairs.x(i, d);
          s.obs.values[task.dim + d] = pairs.c(i, d);
        }
        s.states = {0};
        s.sequence_id = static_cast<std::int64_t>(i);
        s.source_id = 0;
        seqs.push_back(std::move(s));
      }
    } else {
      const DiscreteJointTask& task = config.task.discrete;
      DiscretePairBatch pairs = sample_pairs(task, sp.count, rng);
      obs_dim = task.x_alphabet + task.c_alphabet;
      for (std::size_t i = 0; i < sp.count; ++i) {
        LabeledSequence s;
        s.obs = Tensor({1, obs_dim});
        s.obs.values[pairs.x[i]] = 1.0;
        s.obs.values[task.x_alphabet + pairs.c[i]] = 1.0;
        s.states = {static_cast<std::int32_t>(pairs.x[i])};
        s.sequence_id = static_cast<std::int64_t>(i);
        s.source_id = static_cast<std::int64_t>(pairs.c[i]);
        seqs.push_back(std::move(s));
      }
    }
    const std::string path =
        out_dir + "/" + sp.split + ".cpcdata";
    write_dataset(path, task_json, sp.split, seqs, obs_dim);
    paths.push_back(path);
  }
  return paths;
}

namespace {

// Tiny but non-trivial fixtures for the op-level checks.
struct GradcheckFixtures {
  Rng rng{424242};

  Tensor offzero(std::vector<std::size_t> shape) {
    Tensor t(std::move(shape));
    for (double& v : t.values) {
      const double mag = 0.1 + std::fabs(rng.normal());
      v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
  }
};

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite() {
  std::vector<GradCheckResult> results;
  GradcheckFixtures fx;

  auto sq_sum = [](Tape& t, const Tensor& x) { return t.sum(t.mul(x, x)); };

  results.push_back(check_gradients(
      "add", {fx.offzero({3, 4}), fx.offzero({3, 4})},
      [](Tape& t, const std::vector<Tensor>& p) {
        return t.mean(t.add(p[0], p[1]));
      }));
  results.push_back(check_gradients(
      "sub", {fx.offzero({3, 4}), fx.offzero({3, 4})},
      [](Tape& t, const std::vector<Tensor>& p) {
        return t.mean(t.sub(p[0], p[1]));
      }));
  results.push_back(check_gradients(
      "mul", {fx.offzero({3, 4}), fx.offzero({3, 4})},
      [](Tape& t, const std::vector<Tensor>& p) {
        return t.mean(t.mul(p[0], p[1]));
      }));
  results.push_back(check_gradients(
      "scale", {fx.offzero({3, 4})},
      [](Tape& t, const std::vector<Tensor>& p) {
        return t.sum(t.scale(-0.7, p[0]));
      }));
  results.push_back(check_gradients(
      "add_bias", {fx.offzero({4, 3}), fx.offzero({3})},
      [&sq_sum](Tape& t, const std::vector<Tensor>& p) {
        return sq_sum(t, t.add_bias(p[0], p[1]));
      }));
  results.push_back(check_gradients(
      "relu", {fx.offzero({4, 4})},
      [](Tape& t, const std::vector<Tensor>& p) {
        return t.sum(t.relu(p[0]));
      }));
  results.push_back(check_gradients(
      "sigmoid", {fx.offzero({4, 4})},
      [](Tape& t, const std::vector<Tensor>& p) {
        return t.mean(t.sigmoid(p[0]));
      }));
  results.push_back(check_gradients(
      "tanh", {fx.offzero({4, 4})},
      [](Tape& t, const std::vector<Tensor>& p) {
        return t.mean(t.tanh(p[0]));
      }));
  results.push_back(check_gradients(
      "matmul", {fx.offzero({3, 5}), fx.offzero({5, 2})},
      [&sq_sum](Tape& t, const std::vector<Tensor>& p) {
        return sq_sum(t, t.matmul(p[0], p[1]));
      }));
  results.push_back(check_gradients(
      "matmul_nt", {fx.offzero({3, 5}), fx.offzero({4, 5})},
      [&sq_sum](Tape& t, const std::vector<Tensor>& p) {
        return sq_sum(t, t.matmul_nt(p[0], p[1]));
      }));
  results.push_back(check_gradients(
      "conv1d", {fx.offzero({2, 12}), fx.offzero({3, 2, 3})},
      [&sq_sum](Tape& t, const std::vector<Tensor>& p) {
        return sq_sum(t, t.conv1d(p[0], p[1], 2));
      }));
  results.push_back(check_gradients(
      "gather_rows", {fx.offzero({5, 3})},
      [&sq_sum](Tape& t, const std::vector<Tensor>& p) {
        return sq_sum(t, t.gather_rows(p[0], {4, 0, 0, 2}));
      }));
  results.push_back(check_gradients(
      "concat_rows", {fx.offzero({2, 3}), fx.offzero({3, 3})},
      [&sq_sum](Tape& t, const std::vector<Tensor>& p) {
        return sq_sum(t, t.concat_rows({p[0], p[1]}));
      }));
  results.push_back(check_gradients(
      "slice_cols", {fx.offzero({4, 5})},
      [&sq_sum](Tape& t, const std::vector<Tensor>& p) {
        return sq_sum(t, t.slice_cols(p[0], 1, 4));
      }));
  results.push_back(check_gradients(
      "frames_to_channels", {fx.offzero({6, 3})},
      [&sq_sum](Tape& t, const std::vector<Tensor>& p) {
        return sq_sum(t, t.frames_to_channels(p[0], 2));
      }));
  results.push_back(check_gradients(
      "row_block_dot", {fx.offzero({3, 4}), fx.offzero({9, 4})},
      [&sq_sum](Tape& t, const std::vector<Tensor>& p) {
        return sq_sum(t, t.row_block_dot(p[0], p[1], 3));
      }));
  results.push_back(check_gradients(
      "sum", {fx.offzero({3, 3})},
      [](Tape& t, const std::vector<Tensor>& p) { return t.sum(p[0]); }));
  results.push_back(check_gradients(
      "mean", {fx.offzero({3, 3})},
      [](Tape& t, const std::vector<Tensor>& p) { return t.mean(p[0]); }));
  results.push_back(check_gradients(
      "logsumexp", {fx.offzero({7})},
      [](Tape& t, const std::vector<Tensor>& p) {
        return t.logsumexp(p[0]);
      }));
  results.push_back(check_gradients(
      "cross_entropy_rows", {fx.offzero({4, 5})},
      [](Tape& t, const std::vector<Tensor>& p) {
        return t.cross_entropy_rows(p[0], {1, 0, 4, 2}, Reduction::kMean);
      }));
  results.push_back(check_gradients(
      "infonce_loss", {fx.offzero({6})},
      [](Tape& t, const std::vector<Tensor>& p) {
        return infonce_loss(t, p[0], 3);
      }));
  {
    GruWeights w;
    w.input_proj = fx.offzero({9, 2});
    w.hidden_proj = fx.offzero({6, 3});
    w.candidate_proj = fx.offzero({3, 3});
    w.bias = fx.offzero({9});
    results.push_back(check_gradients(
        "gru_step",
        {fx.offzero({3}), fx.offzero({2}), w.input_proj, w.hidden_proj,
         w.candidate_proj, w.bias},
        [](Tape& t, const std::vector<Tensor>& p) {
          GruWeights wl{p[2], p[3], p[4], p[5]};
          Tensor out = t.gru_step(p[0], p[1], wl);
          return t.sum(t.mul(out, out));
        }));
  }
  // composed CPC InfoNCE loss on a miniature model and task
  {
    LatentMarkovSequenceTask task;
    task.states = 3;
    task.sources = 2;
    task.p_stay = 0.8;
    task.obs_dim = 2;
    task.emission_sigma = 0.5;
    task.seq_len = 24;
    task.seed = 5;

    ModelConfig mc;
    mc.encoder.strides = {2};
    mc.encoder.widths = {3};
    mc.encoder.channels = {4};
    mc.input_channels = 2;
    mc.latent_dim = 4;
    mc.context_dim = 5;
    mc.horizons = 2;

    Rng data_rng(31337);
    std::vector<LabeledSequence> seqs;
    seqs.push_back(sample_sequence(task, 0, 0, data_rng));
    seqs.push_back(sample_sequence(task, 1, 1, data_rng));
    std::vector<const LabeledSequence*> batch = {&seqs[0], &seqs[1]};

    Rng neg_rng(4242);
    const CpcLossPlan plan =
        plan_cpc_loss(mc, batch, /*num_candidates=*/3,
                      NegativeStrategy::kMixedSource, Reduction::kMean,
                      neg_rng);
    const Tensor packed = pack_sequences(batch);

    CpcModel model = CpcModel::init(mc, 99);
    std::vector<Tensor> params;
    for (auto& [name, t] : model.named_parameters()) params.push_back(*t);

    results.push_back(check_gradients(
        "cpc_infonce_composed", params,
        [&mc, &packed, &plan](Tape& t, const std::vector<Tensor>& p) {
          CpcLeaves leaves;
          std::size_t i = 0;
          leaves.conv_kernels = {p[i]};
          leaves.conv_biases = {p[i + 1]};
          i += 2;
          leaves.gru.input_proj = p[i++];
          leaves.gru.hidden_proj = p[i++];
          leaves.gru.candidate_proj = p[i++];
          leaves.gru.bias = p[i++];
          for (; i < p.size(); ++i) leaves.heads.push_back(p[i]);
          return cpc_loss_from_plan(t, leaves, mc, packed, 2, plan)
              .total_loss;
        }));
  }

  // composed pair-scorer InfoNCE loss
  {
    PairScorerConfig pc;
    pc.x_dim = 1;
    pc.c_dim = 1;
    pc.hidden_dim = 4;
    pc.embed_dim = 3;
    PairScorer scorer = PairScorer::init(pc, 7);
    GaussianPairTask task{1, 0.7};
    Rng rng(606);
    PairBatch pairs = sample_pairs(task, 5, rng);
    std::vector<Tensor> params;
    for (auto& [name, t] : scorer.named_parameters()) params.push_back(*t);
    const Tensor x = pairs.x;
    const Tensor c = pairs.c;
    results.push_back(check_gradients(
        "pair_infonce_composed", params,
        [&x, &c](Tape& t, const std::vector<Tensor>& p) {
          PairLeaves leaves{p[0], p[1], p[2], p[3], p[4],
                            p[5], p[6], p[7], p[8]};
          Tensor phi = embed_pair_x(t, leaves, x);
          Tensor psi = embed_pair_c(t, leaves, c);
          Tensor scores = t.matmul_nt(t.matmul_nt(psi, leaves.bilinear), phi);
          return t.cross_entropy_rows(scores, {0, 1, 2, 3, 4},
                                      Reduction::kMean);
        }));
  }

  return results;
}

}  // namespace cpc
