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

#ifndef CPC_MODEL_HPP_
#define CPC_MODEL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpc/tape.hpp"
#include "cpc/tensor.hpp"

namespace cpc {

// Strided conv + ReLU stack; one entry per layer.
struct EncoderConfig {
  std::vector<std::size_t> strides;
  std::vector<std::size_t> widths;
  std::vector<std::size_t> channels;
};

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t input_channels = 1;
  std::size_t latent_dim = 32;   // equals encoder.channels.back()
  std::size_t context_dim = 32;  // GRU hidden size
  std::size_t horizons = 8;      // K prediction heads

  void validate() const;
};

/// Frames of input covered by one latent frame.
std::size_t receptive_field(const EncoderConfig& enc);
/// Input frames between consecutive latent frames.
std::size_t total_stride(const EncoderConfig& enc);
/// Latent frames produced from `time` input frames; throws ValueError naming
/// the minimum length when the input is too short.
std::size_t latent_length(const EncoderConfig& enc, std::size_t time);

// Encoder, context GRU, and one scoring matrix per horizon.
struct CpcModel {
  ModelConfig config;
  std::vector<Tensor> conv_kernels;  // [out x in x width]
  std::vector<Tensor> conv_biases;   // [out]
  GruWeights gru;
  std::vector<Tensor> heads;  // K of [latent_dim x context_dim]
  std::uint64_t init_seed = 0;
  std::uint64_t trained_steps = 0;

  static CpcModel init(const ModelConfig& config, std::uint64_t seed);

  std::vector<std::pair<std::string, Tensor*>> named_parameters();
  std::vector<std::pair<std::string, const Tensor*>> named_parameters() const;
};

/// Model parameters re-registered as leaves of `tape` for one training step.
struct CpcLeaves {
  std::vector<Tensor> conv_kernels;
  std::vector<Tensor> conv_biases;
  GruWeights gru;
  std::vector<Tensor> heads;
};
CpcLeaves bind(Tape& tape, const CpcModel& model);

/// Encoder over `batch` stacked sequences: [batch*channels x time] ->
/// latent frames [batch*T x latent_dim], row (b*T + t).
Tensor encode_batch(Tape& tape, const CpcLeaves& leaves,
                    const ModelConfig& config, const Tensor& x,
                    std::size_t batch);

/// GRU over latent frames: [batch*T x latent_dim] -> [batch*T x context_dim]
/// with zero initial state. Row order matches encode_batch.
Tensor contextualize_batch(Tape& tape, const CpcLeaves& leaves,
                           const ModelConfig& config, const Tensor& z,
                           std::size_t batch, std::size_t frames);

/// Single GRU cell update given a precomputed input projection row block.
Tensor gru_cell_from_xw(Tape& tape, const Tensor& h, const Tensor& xw,
                        const GruWeights& w);

// Single-sequence entry points (run on an internal tape, values only).
Tensor encode(const CpcModel& model, const Tensor& x);         // [C x T] -> [T x d_z]
Tensor contextualize(const CpcModel& model, const Tensor& z);  // [T x d_z] -> [T x d_c]

/// z^T W_k c, i.e. the log of the density-ratio score for horizon k.
double score(const CpcModel& model, std::span<const double> z,
             std::span<const double> c, std::size_t k);

/// W_k c: the latent-space prediction whose inner product with z gives
/// score().
std::vector<double> predict(const CpcModel& model, std::span<const double> c,
                            std::size_t k);

// Two-branch MLP scorer for (x, c) pair tasks: score = phi(x)^T W psi(c).
struct PairScorerConfig {
  std::size_t x_dim = 1;
  std::size_t c_dim = 1;
  std::size_t hidden_dim = 64;
  std::size_t embed_dim = 32;
};

struct PairScorer {
  PairScorerConfig config;
  Tensor x_w1, x_b1, x_w2, x_b2;  // x branch: [h x dx], [h], [e x h], [e]
  Tensor c_w1, c_b1, c_w2, c_b2;  // c branch
  Tensor bilinear;                // [e x e]
  std::uint64_t init_seed = 0;
  std::uint64_t trained_steps = 0;

  static PairScorer init(const PairScorerConfig& config, std::uint64_t seed);
  std::vector<std::pair<std::string, Tensor*>> named_parameters();
  std::vector<std::pair<std::string, const Tensor*>> named_parameters() const;
};

struct PairLeaves {
  Tensor x_w1, x_b1, x_w2, x_b2;
  Tensor c_w1, c_b1, c_w2, c_b2;
  Tensor bilinear;
};
PairLeaves bind(Tape& tape, const PairScorer& scorer);

/// MLP embedding of a batch of raw vectors: [n x in] -> [n x e].
Tensor embed_pair_x(Tape& tape, const PairLeaves& leaves, const Tensor& x);
Tensor embed_pair_c(Tape& tape, const PairLeaves& leaves, const Tensor& c);

// Same encoder + GRU backbone with a per-frame linear classifier head,
// trained end-to-end on labels (the supervised ceiling).
struct SupervisedModel {
  ModelConfig config;
  std::vector<Tensor> conv_kernels;
  std::vector<Tensor> conv_biases;
  GruWeights gru;
  Tensor head_w;  // [classes x context_dim]
  Tensor head_b;  // [classes]
  std::size_t classes = 0;
  std::uint64_t init_seed = 0;
  std::uint64_t trained_steps = 0;

  static SupervisedModel init(const ModelConfig& config, std::size_t classes,
                              std::uint64_t seed);
  std::vector<std::pair<std::string, Tensor*>> named_parameters();
  std::vector<std::pair<std::string, const Tensor*>> named_parameters() const;
};

// Checkpoint files: self-describing JSON with config, every parameter
// tensor (shape + row-major values), and the init seed.
void save_checkpoint(const std::string& path, const CpcModel& model);
void save_checkpoint(const std::string& path, const PairScorer& scorer);
CpcModel load_cpc_checkpoint(const std::string& path);
PairScorer load_pair_checkpoint(const std::string& path);
/// "cpc" or "pair"; throws IoError with offset/field context when malformed.
std::string checkpoint_kind(const std::string& path);

/// FNV-1a over each parameter's bytes; used by frozen-feature assertions.
std::uint64_t parameter_hash(
    const std::vector<std::pair<std::string, const Tensor*>>& params);
std::uint64_t parameter_hash(
    const std::vector<std::pair<std::string, Tensor*>>& params);

}  // namespace cpc

#endif  // CPC_MODEL_HPP_
