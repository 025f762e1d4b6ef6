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

#include "cpc/config.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace cpc {

using nlohmann::json;

std::string task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::kMarkov:
      return "markov";
    case TaskKind::kGaussian:
      return "gaussian";
    case TaskKind::kDiscrete:
      return "discrete";
  }
  throw ValueError("unknown task kind");
}

std::string model_kind_name(ModelKind k) {
  return k == ModelKind::kCpc ? "cpc" : "pair";
}

namespace {

std::string reduction_name(Reduction r) {
  return r == Reduction::kMean ? "mean" : "sum";
}

// Collects every schema violation before failing.
class Checker {
 public:
  explicit Checker(const std::string& origin) : origin_(origin) {}

  void unknown_keys(const json& j, const std::string& path,
                    std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
      error(path, "expected an object");
      return;
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) {
        if (it.key() == a) {
          ok = true;
          break;
        }
      }
      if (!ok) error(path + "." + it.key(), "unknown field");
    }
  }

  template <typename T>
  void read(const json& j, const char* key, const std::string& path, T* out) {
    if (!j.is_object() || !j.contains(key)) return;  // keep default
    try {
      *out = j.at(key).get<T>();
    } catch (const json::exception&) {
      error(path + "." + key, "wrong type");
    }
  }

  void error(const std::string& path, const std::string& msg) {
    errors_.push_back(path + ": " + msg);
  }

  void finish() const {
    if (errors_.empty()) return;
    std::string msg = "invalid config " + origin_ + ":";
    for (const std::string& e : errors_) msg += "\n  " + e;
    throw ConfigError(msg);
  }

  bool ok() const { return errors_.empty(); }

 private:
  std::string origin_;
  std::vector<std::string> errors_;
};

}  // namespace

void ExperimentConfig::validate() const {
  std::vector<std::string> errors;
  auto fail = [&errors](const std::string& field, const std::string& msg) {
    errors.push_back(field + ": " + msg);
  };
  try {
    switch (task.kind) {
      case TaskKind::kMarkov:
        task.markov.validate();
        break;
      case TaskKind::kGaussian:
        task.gaussian.validate();
        break;
      case TaskKind::kDiscrete:
        task.discrete.validate();
        break;
    }
  } catch (const ConfigError& e) {
    fail("task", e.what());
  }
  if (task.kind == TaskKind::kMarkov && model_kind != ModelKind::kCpc) {
    fail("model.kind", "markov task requires the cpc model");
  }
  if (task.kind != TaskKind::kMarkov && model_kind != ModelKind::kPair) {
    fail("model.kind", "pair tasks (gaussian/discrete) require the pair model");
  }
  if (model_kind == ModelKind::kCpc) {
    try {
      cpc_model.validate();
    } catch (const ConfigError& e) {
      fail("model", e.what());
    }
    if (task.kind == TaskKind::kMarkov &&
        cpc_model.input_channels != task.markov.obs_dim) {
      fail("model.input_channels", "must equal task obs_dim");
    }
    if (training.batch_size < 2 || training.batch_size % 2 != 0) {
      fail("training.batch_size", "must be even and >= 2");
    }
    if (training.eval_sequences < 2 || training.eval_sequences % 2 != 0) {
      fail("training.eval_sequences", "must be even and >= 2");
    }
  }
  if (contrastive.num_candidates < 2) {
    fail("contrastive.num_candidates", "must be >= 2");
  }
  if (training.learning_rate <= 0.0) {
    fail("training.learning_rate", "must be positive");
  }
  if (training.groups_per_batch < 1) {
    fail("training.groups_per_batch", "must be >= 1");
  }
  if (out_dir.empty()) fail("outputs.dir", "must not be empty");
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const std::string& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

ExperimentConfig default_markov_config() {
  ExperimentConfig c;
  c.task.kind = TaskKind::kMarkov;
  c.model_kind = ModelKind::kCpc;
  // source offsets are linearly separable on this task; same-source
  // negatives keep the scorer from winning on source identity alone
  c.contrastive.strategy = NegativeStrategy::kSameSource;
  c.cpc_model.encoder.strides = {2, 2};
  c.cpc_model.encoder.widths = {4, 4};
  c.cpc_model.encoder.channels = {32, 32};
  c.cpc_model.input_channels = c.task.markov.obs_dim;
  c.cpc_model.latent_dim = 32;
  c.cpc_model.context_dim = 32;
  c.cpc_model.horizons = 8;
  return c;
}

ExperimentConfig default_gaussian_config() {
  ExperimentConfig c;
  c.task.kind = TaskKind::kGaussian;
  c.task.gaussian = {1, 0.8};
  c.model_kind = ModelKind::kPair;
  c.pair_model.x_dim = 1;
  c.pair_model.c_dim = 1;
  c.pair_model.hidden_dim = 64;
  c.pair_model.embed_dim = 32;
  c.training.steps = 20000;
  c.training.log_interval = 500;
  c.contrastive.num_candidates = 128;
  c.out_dir = "runs/gaussian";
  return c;
}

ExperimentConfig default_discrete_config() {
  ExperimentConfig c;
  c.task.kind = TaskKind::kDiscrete;
  c.task.discrete.x_alphabet = 4;
  c.task.discrete.c_alphabet = 4;
  c.task.discrete.joint.assign(16, 1.0 / 44.0);
  for (std::size_t i = 0; i < 4; ++i) {
    c.task.discrete.joint[i * 4 + i] = 8.0 / 44.0;
  }
  c.model_kind = ModelKind::kPair;
  c.pair_model.x_dim = 4;
  c.pair_model.c_dim = 4;
  c.pair_model.hidden_dim = 32;
  c.pair_model.embed_dim = 16;
  c.training.steps = 8000;
  c.training.log_interval = 500;
  c.contrastive.num_candidates = 8;
  c.out_dir = "runs/discrete";
  return c;
}

std::string task_to_json(const TaskSection& task) {
  json j;
  j["kind"] = task_kind_name(task.kind);
  switch (task.kind) {
    case TaskKind::kMarkov: {
      const auto& m = task.markov;
      j["states"] = m.states;
      j["sources"] = m.sources;
      j["p_stay"] = m.p_stay;
      j["obs_dim"] = m.obs_dim;
      j["emission_sigma"] = m.emission_sigma;
      j["source_offset_scale"] = m.source_offset_scale;
      j["seq_len"] = m.seq_len;
      j["seed"] = m.seed;
      break;
    }
    case TaskKind::kGaussian:
      j["dim"] = task.gaussian.dim;
      j["rho"] = task.gaussian.rho;
      break;
    case TaskKind::kDiscrete:
      j["x_alphabet"] = task.discrete.x_alphabet;
      j["c_alphabet"] = task.discrete.c_alphabet;
      j["joint"] = task.discrete.joint;
      break;
  }
  return j.dump();
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["task"] = json::parse(task_to_json(c.task));
  json model;
  model["kind"] = model_kind_name(c.model_kind);
  if (c.model_kind == ModelKind::kCpc) {
    model["strides"] = c.cpc_model.encoder.strides;
    model["widths"] = c.cpc_model.encoder.widths;
    model["channels"] = c.cpc_model.encoder.channels;
    model["latent_dim"] = c.cpc_model.latent_dim;
    model["context_dim"] = c.cpc_model.context_dim;
    model["horizons"] = c.cpc_model.horizons;
  } else {
    model["hidden_dim"] = c.pair_model.hidden_dim;
    model["embed_dim"] = c.pair_model.embed_dim;
  }
  j["model"] = model;
  j["training"] = {{"steps", c.training.steps},
                   {"batch_size", c.training.batch_size},
                   {"learning_rate", c.training.learning_rate},
                   {"seed", c.training.seed},
                   {"log_interval", c.training.log_interval},
                   {"eval_sequences", c.training.eval_sequences},
                   {"eval_batches", c.training.eval_batches},
                   {"groups_per_batch", c.training.groups_per_batch}};
  j["contrastive"] = {{"num_candidates", c.contrastive.num_candidates},
                      {"strategy", strategy_name(c.contrastive.strategy)},
                      {"loss_reduction",
                       reduction_name(c.contrastive.loss_reduction)}};
  j["outputs"] = {{"dir", c.out_dir}};
  return j.dump(2);
}

ExperimentConfig parse_config_json(const std::string& text,
                                   const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + origin + " is not valid JSON: " + e.what());
  }
  Checker check(origin);
  check.unknown_keys(j, "$",
                     {"task", "model", "training", "contrastive", "outputs"});

  ExperimentConfig c;
  bool model_kind_explicit = false;

  if (j.contains("task")) {
    const json& jt = j.at("task");
    std::string kind = "markov";
    check.read(jt, "kind", "task", &kind);
    if (kind == "markov") {
      c.task.kind = TaskKind::kMarkov;
      check.unknown_keys(jt, "task",
                         {"kind", "states", "sources", "p_stay", "obs_dim",
                          "emission_sigma", "source_offset_scale", "seq_len",
                          "seed"});
      auto& m = c.task.markov;
      check.read(jt, "states", "task", &m.states);
      check.read(jt, "sources", "task", &m.sources);
      check.read(jt, "p_stay", "task", &m.p_stay);
      check.read(jt, "obs_dim", "task", &m.obs_dim);
      check.read(jt, "emission_sigma", "task", &m.emission_sigma);
      check.read(jt, "source_offset_scale", "task", &m.source_offset_scale);
      check.read(jt, "seq_len", "task", &m.seq_len);
      check.read(jt, "seed", "task", &m.seed);
    } else if (kind == "gaussian") {
      c.task.kind = TaskKind::kGaussian;
      check.unknown_keys(jt, "task", {"kind", "dim", "rho"});
      check.read(jt, "dim", "task", &c.task.gaussian.dim);
      check.read(jt, "rho", "task", &c.task.gaussian.rho);
    } else if (kind == "discrete") {
      c.task.kind = TaskKind::kDiscrete;
      check.unknown_keys(jt, "task",
                         {"kind", "x_alphabet", "c_alphabet", "joint"});
      check.read(jt, "x_alphabet", "task", &c.task.discrete.x_alphabet);
      check.read(jt, "c_alphabet", "task", &c.task.discrete.c_alphabet);
      check.read(jt, "joint", "task", &c.task.discrete.joint);
    } else {
      check.error("task.kind", "must be markov, gaussian, or discrete");
    }
  }

  // model kind and contrastive defaults follow the task's natural pairing
  c.model_kind =
      c.task.kind == TaskKind::kMarkov ? ModelKind::kCpc : ModelKind::kPair;
  if (c.task.kind == TaskKind::kMarkov) {
    c.cpc_model = default_markov_config().cpc_model;
    c.contrastive.strategy = NegativeStrategy::kSameSource;
  } else if (c.task.kind == TaskKind::kGaussian) {
    c.pair_model = default_gaussian_config().pair_model;
  } else {
    c.pair_model = default_discrete_config().pair_model;
  }

  if (j.contains("model")) {
    const json& jm = j.at("model");
    std::string kind = model_kind_name(c.model_kind);
    check.read(jm, "kind", "model", &kind);
    if (kind == "cpc") {
      c.model_kind = ModelKind::kCpc;
      model_kind_explicit = true;
      check.unknown_keys(jm, "model",
                         {"kind", "strides", "widths", "channels",
                          "latent_dim", "context_dim", "horizons"});
      check.read(jm, "strides", "model", &c.cpc_model.encoder.strides);
      check.read(jm, "widths", "model", &c.cpc_model.encoder.widths);
      check.read(jm, "channels", "model", &c.cpc_model.encoder.channels);
      check.read(jm, "latent_dim", "model", &c.cpc_model.latent_dim);
      check.read(jm, "context_dim", "model", &c.cpc_model.context_dim);
      check.read(jm, "horizons", "model", &c.cpc_model.horizons);
    } else if (kind == "pair") {
      c.model_kind = ModelKind::kPair;
      model_kind_explicit = true;
      check.unknown_keys(jm, "model", {"kind", "hidden_dim", "embed_dim"});
      check.read(jm, "hidden_dim", "model", &c.pair_model.hidden_dim);
      check.read(jm, "embed_dim", "model", &c.pair_model.embed_dim);
    } else {
      check.error("model.kind", "must be cpc or pair");
    }
  }
  (void)model_kind_explicit;

  if (j.contains("training")) {
    const json& jt = j.at("training");
    check.unknown_keys(jt, "training",
                       {"steps", "batch_size", "learning_rate", "seed",
                        "log_interval", "eval_sequences", "eval_batches",
                        "groups_per_batch"});
    check.read(jt, "steps", "training", &c.training.steps);
    check.read(jt, "batch_size", "training", &c.training.batch_size);
    check.read(jt, "learning_rate", "training", &c.training.learning_rate);
    check.read(jt, "seed", "training", &c.training.seed);
    check.read(jt, "log_interval", "training", &c.training.log_interval);
    check.read(jt, "eval_sequences", "training", &c.training.eval_sequences);
    check.read(jt, "eval_batches", "training", &c.training.eval_batches);
    check.read(jt, "groups_per_batch", "training",
               &c.training.groups_per_batch);
  }

  if (j.contains("contrastive")) {
    const json& jc = j.at("contrastive");
    check.unknown_keys(jc, "contrastive",
                       {"num_candidates", "strategy", "loss_reduction"});
    check.read(jc, "num_candidates", "contrastive",
               &c.contrastive.num_candidates);
    std::string strat = strategy_name(c.contrastive.strategy);
    check.read(jc, "strategy", "contrastive", &strat);
    try {
      c.contrastive.strategy = parse_strategy(strat);
    } catch (const ValueError& e) {
      check.error("contrastive.strategy", e.what());
    }
    std::string red = reduction_name(c.contrastive.loss_reduction);
    check.read(jc, "loss_reduction", "contrastive", &red);
    if (red == "mean") {
      c.contrastive.loss_reduction = Reduction::kMean;
    } else if (red == "sum") {
      c.contrastive.loss_reduction = Reduction::kSum;
    } else {
      check.error("contrastive.loss_reduction", "must be mean or sum");
    }
  }

  if (j.contains("outputs")) {
    const json& jo = j.at("outputs");
    check.unknown_keys(jo, "outputs", {"dir"});
    check.read(jo, "dir", "outputs", &c.out_dir);
  }

  // derived dims
  if (c.task.kind == TaskKind::kMarkov) {
    c.cpc_model.input_channels = c.task.markov.obs_dim;
  } else if (c.task.kind == TaskKind::kGaussian) {
    c.pair_model.x_dim = c.task.gaussian.dim;
    c.pair_model.c_dim = c.task.gaussian.dim;
  } else {
    c.pair_model.x_dim = c.task.discrete.x_alphabet;
    c.pair_model.c_dim = c.task.discrete.c_alphabet;
  }

  check.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_json(buf.str(), path);
}

std::string config_hash_hex(const ExperimentConfig& config) {
  const std::string dump = config_to_json(config);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cpc
