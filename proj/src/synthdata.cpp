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

#include "cpc/synthdata.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace cpc {

namespace {
constexpr char kDatasetMagic[8] = {'C', 'P', 'C', 'D', 'A', 'T', 'A', '1'};
}

void GaussianPairTask::validate() const {
  if (dim < 1) throw ConfigError("gaussian task dim must be >= 1");
  if (!(rho > -1.0 && rho < 1.0)) {
    throw ConfigError("gaussian task rho must lie in (-1, 1)");
  }
}

void DiscreteJointTask::validate() const {
  if (x_alphabet < 1 || c_alphabet < 1) {
    throw ConfigError("discrete task alphabets must be >= 1");
  }
  if (joint.size() != x_alphabet * c_alphabet) {
    throw ConfigError("discrete joint table must have x_alphabet*c_alphabet "
                      "entries");
  }
  double total = 0.0;
  for (double p : joint) {
    if (!(p > 0.0)) {
      throw ConfigError("discrete joint table entries must all be positive");
    }
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw ConfigError("discrete joint table must sum to 1, sums to " +
                      std::to_string(total));
  }
}

std::vector<double> DiscreteJointTask::marginal_x() const {
  std::vector<double> px(x_alphabet, 0.0);
  for (std::size_t x = 0; x < x_alphabet; ++x) {
    for (std::size_t c = 0; c < c_alphabet; ++c) px[x] += p(x, c);
  }
  return px;
}

std::vector<double> DiscreteJointTask::marginal_c() const {
  std::vector<double> pc(c_alphabet, 0.0);
  for (std::size_t x = 0; x < x_alphabet; ++x) {
    for (std::size_t c = 0; c < c_alphabet; ++c) pc[c] += p(x, c);
  }
  return pc;
}

void LatentMarkovSequenceTask::validate() const {
  if (states < 1) throw ConfigError("markov task needs >= 1 state");
  if (sources < 1) throw ConfigError("markov task needs >= 1 source");
  if (!(p_stay >= 0.0 && p_stay <= 1.0)) {
    throw ConfigError("p_stay must lie in [0, 1]");
  }
  if (obs_dim < 1) throw ConfigError("obs_dim must be >= 1");
  if (emission_sigma < 0.0) throw ConfigError("emission_sigma must be >= 0");
  if (seq_len < 1) throw ConfigError("seq_len must be >= 1");
}

Tensor LatentMarkovSequenceTask::state_embeddings() const {
  Rng rng(Rng::split(seed, 100));
  return random_normal({states, obs_dim}, rng);
}

Tensor LatentMarkovSequenceTask::source_offsets() const {
  Rng rng(Rng::split(seed, 101));
  return random_normal({sources, obs_dim}, rng, source_offset_scale);
}

Tensor LatentMarkovSequenceTask::transition_matrix() const {
  Tensor t({states, states});
  if (states == 1) {
    t.values[0] = 1.0;
    return t;
  }
  const double off = (1.0 - p_stay) / static_cast<double>(states - 1);
  for (std::size_t i = 0; i < states; ++i) {
    for (std::size_t j = 0; j < states; ++j) {
      t(i, j) = i == j ? p_stay : off;
    }
  }
  return t;
}

std::vector<double> LatentMarkovSequenceTask::stationary_distribution() const {
  // Symmetric off-diagonal structure makes the chain doubly stochastic.
  return std::vector<double>(states, 1.0 / static_cast<double>(states));
}

PairBatch sample_pairs(const GaussianPairTask& task, std::size_t n, Rng& rng) {
  task.validate();
  if (n < 1) throw ValueError("sample_pairs requires n >= 1");
  PairBatch batch;
  batch.c = Tensor({n, task.dim});
  batch.x = Tensor({n, task.dim});
  const double noise = std::sqrt(1.0 - task.rho * task.rho);
  for (std::size_t i = 0; i < n * task.dim; ++i) {
    const double c = rng.normal();
    batch.c.values[i] = c;
    batch.x.values[i] = task.rho * c + noise * rng.normal();
  }
  return batch;
}

DiscretePairBatch sample_pairs(const DiscreteJointTask& task, std::size_t n,
                               Rng& rng) {
  task.validate();
  if (n < 1) throw ValueError("sample_pairs requires n >= 1");
  DiscretePairBatch batch;
  batch.x.resize(n);
  batch.c.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform();
    std::size_t cell = task.joint.size() - 1;
    for (std::size_t j = 0; j < task.joint.size(); ++j) {
      if (u < task.joint[j]) {
        cell = j;
        break;
      }
      u -= task.joint[j];
    }
    batch.x[i] = cell / task.c_alphabet;
    batch.c[i] = cell % task.c_alphabet;
  }
  return batch;
}

double true_mi(const GaussianPairTask& task) {
  task.validate();
  return -0.5 * static_cast<double>(task.dim) *
         std::log(1.0 - task.rho * task.rho);
}

double true_mi(const DiscreteJointTask& task) {
  task.validate();
  const std::vector<double> px = task.marginal_x();
  const std::vector<double> pc = task.marginal_c();
  double mi = 0.0;
  for (std::size_t x = 0; x < task.x_alphabet; ++x) {
    for (std::size_t c = 0; c < task.c_alphabet; ++c) {
      mi += task.p(x, c) * std::log(task.p(x, c) / (px[x] * pc[c]));
    }
  }
  return mi;
}

double true_density_ratio(const GaussianPairTask& task,
                          std::span<const double> x,
                          std::span<const double> c) {
  task.validate();
  if (x.size() != task.dim || c.size() != task.dim) {
    throw ShapeError("true_density_ratio: expected dim " +
                     std::to_string(task.dim));
  }
  // p(x|c) = N(rho c, 1-rho^2) per dimension, p(x) = N(0, 1).
  const double s2 = 1.0 - task.rho * task.rho;
  double log_ratio = -0.5 * static_cast<double>(task.dim) * std::log(s2);
  for (std::size_t i = 0; i < task.dim; ++i) {
    const double r = x[i] - task.rho * c[i];
    log_ratio += -r * r / (2.0 * s2) + x[i] * x[i] / 2.0;
  }
  return std::exp(log_ratio);
}

double true_density_ratio(const DiscreteJointTask& task, std::size_t x,
                          std::size_t c) {
  task.validate();
  if (x >= task.x_alphabet || c >= task.c_alphabet) {
    throw ValueError("true_density_ratio: symbol out of alphabet range");
  }
  const std::vector<double> px = task.marginal_x();
  const std::vector<double> pc = task.marginal_c();
  return task.p(x, c) / (px[x] * pc[c]);
}

LabeledSequence sample_sequence(const LatentMarkovSequenceTask& task,
                                std::int64_t source_id,
                                std::int64_t sequence_id, Rng& rng) {
  task.validate();
  if (source_id < 0 || static_cast<std::size_t>(source_id) >= task.sources) {
    throw ValueError("source_id out of range");
  }
  const Tensor emb = task.state_embeddings();
  const Tensor off = task.source_offsets();
  LabeledSequence seq;
  seq.sequence_id = sequence_id;
  seq.source_id = source_id;
  seq.obs = Tensor({task.seq_len, task.obs_dim});
  seq.states.resize(task.seq_len);
  std::size_t state = rng.uniform_int(task.states);
  for (std::size_t t = 0; t < task.seq_len; ++t) {
    if (t > 0 && task.states > 1) {
      if (rng.uniform() >= task.p_stay) {
        // jump uniformly to one of the other states
        std::size_t jump = rng.uniform_int(task.states - 1);
        state = jump < state ? jump : jump + 1;
      }
    }
    seq.states[t] = static_cast<std::int32_t>(state);
    double* frame = seq.obs.values.data() + t * task.obs_dim;
    const double* e = emb.values.data() + state * task.obs_dim;
    const double* o = off.values.data() + source_id * task.obs_dim;
    for (std::size_t d = 0; d < task.obs_dim; ++d) {
      frame[d] = e[d] + o[d] + task.emission_sigma * rng.normal();
    }
  }
  return seq;
}

std::vector<LabeledSequence> sample_sequences(
    const LatentMarkovSequenceTask& task, std::size_t n, Rng& rng,
    std::int64_t first_sequence_id) {
  if (n < 1) throw ValueError("sample_sequences requires n >= 1");
  std::vector<LabeledSequence> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t source =
        static_cast<std::int64_t>(rng.uniform_int(task.sources));
    out.push_back(sample_sequence(task, source,
                                  first_sequence_id + static_cast<std::int64_t>(i),
                                  rng));
  }
  return out;
}

void write_dataset(const std::string& path, const std::string& task_json,
                   const std::string& split,
                   const std::vector<LabeledSequence>& sequences,
                   std::size_t obs_dim) {
  if (sequences.empty()) throw ValueError("write_dataset of no sequences");
  const std::size_t seq_len = sequences[0].obs.rows();
  for (const LabeledSequence& s : sequences) {
    if (s.obs.rows() != seq_len || s.obs.cols() != obs_dim) {
      throw ShapeError("write_dataset: ragged sequences are not supported");
    }
  }
  nlohmann::json header = {
      {"task", nlohmann::json::parse(task_json)},
      {"split", split},
      {"sequences", sequences.size()},
      {"seq_len", seq_len},
      {"obs_dim", obs_dim},
      {"layout", "frame-major"},
      {"endianness", "little"},
  };
  const std::string htext = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kDatasetMagic, sizeof(kDatasetMagic));
  const std::uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const LabeledSequence& s : sequences) {
    out.write(reinterpret_cast<const char*>(s.obs.values.data()),
              static_cast<std::streamsize>(s.obs.size() * sizeof(double)));
  }
  for (const LabeledSequence& s : sequences) {
    out.write(reinterpret_cast<const char*>(s.states.data()),
              static_cast<std::streamsize>(s.states.size() *
                                           sizeof(std::int32_t)));
  }
  for (const LabeledSequence& s : sequences) {
    for (std::size_t t = 0; t < seq_len; ++t) {
      const std::int32_t src = static_cast<std::int32_t>(s.source_id);
      out.write(reinterpret_cast<const char*>(&src), sizeof(src));
    }
  }
  for (const LabeledSequence& s : sequences) {
    out.write(reinterpret_cast<const char*>(&s.sequence_id),
              sizeof(s.sequence_id));
  }
  if (!out) throw IoError("failed writing dataset: " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset: " + path);
  char magic[sizeof(kDatasetMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0) {
    throw IoError("not a dataset file (bad magic): " + path);
  }
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw IoError("truncated dataset header: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(htext);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("malformed dataset header in " + path + ": " + e.what());
  }
  Dataset ds;
  ds.task_json = header.at("task").dump();
  ds.split = header.at("split").get<std::string>();
  ds.obs_dim = header.at("obs_dim").get<std::size_t>();
  const std::size_t n = header.at("sequences").get<std::size_t>();
  const std::size_t seq_len = header.at("seq_len").get<std::size_t>();
  ds.sequences.resize(n);
  for (LabeledSequence& s : ds.sequences) {
    s.obs = Tensor({seq_len, ds.obs_dim});
    in.read(reinterpret_cast<char*>(s.obs.values.data()),
            static_cast<std::streamsize>(s.obs.size() * sizeof(double)));
  }
  for (LabeledSequence& s : ds.sequences) {
    s.states.resize(seq_len);
    in.read(reinterpret_cast<char*>(s.states.data()),
            static_cast<std::streamsize>(seq_len * sizeof(std::int32_t)));
  }
  for (LabeledSequence& s : ds.sequences) {
    std::vector<std::int32_t> src(seq_len);
    in.read(reinterpret_cast<char*>(src.data()),
            static_cast<std::streamsize>(seq_len * sizeof(std::int32_t)));
    s.source_id = src.empty() ? 0 : src[0];
  }
  for (LabeledSequence& s : ds.sequences) {
    in.read(reinterpret_cast<char*>(&s.sequence_id), sizeof(s.sequence_id));
  }
  if (!in) throw IoError("truncated dataset payload: " + path);
  return ds;
}

}  // namespace cpc
