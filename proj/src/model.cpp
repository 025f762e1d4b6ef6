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

#include "cpc/model.hpp"

#include <cmath>

#include "cpc/kernels.hpp"

namespace cpc {

namespace ker = cpc::kernels;

void ModelConfig::validate() const {
  if (encoder.strides.empty() ||
      encoder.strides.size() != encoder.widths.size() ||
      encoder.strides.size() != encoder.channels.size()) {
    throw ConfigError(
        "encoder strides/widths/channels must be equal-length, non-empty "
        "lists");
  }
  for (std::size_t s : encoder.strides) {
    if (s < 1) throw ConfigError("encoder strides must be >= 1");
  }
  for (std::size_t w : encoder.widths) {
    if (w < 1) throw ConfigError("encoder widths must be >= 1");
  }
  if (latent_dim != encoder.channels.back()) {
    throw ConfigError("latent_dim must equal the last encoder channel count");
  }
  if (context_dim < 1) throw ConfigError("context_dim must be >= 1");
  if (horizons < 1) throw ConfigError("horizons (K) must be >= 1");
  if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
}

std::size_t receptive_field(const EncoderConfig& enc) {
  std::size_t rf = 1;
  std::size_t stride = 1;
  for (std::size_t i = 0; i < enc.widths.size(); ++i) {
    rf += (enc.widths[i] - 1) * stride;
    stride *= enc.strides[i];
  }
  return rf;
}

std::size_t total_stride(const EncoderConfig& enc) {
  std::size_t stride = 1;
  for (std::size_t s : enc.strides) stride *= s;
  return stride;
}

std::size_t latent_length(const EncoderConfig& enc, std::size_t time) {
  const std::size_t min_len = receptive_field(enc);
  if (time < min_len) {
    throw ValueError("input too short for encoder: " + std::to_string(time) +
                     " frames < minimum length " + std::to_string(min_len));
  }
  std::size_t t = time;
  for (std::size_t i = 0; i < enc.widths.size(); ++i) {
    t = (t - enc.widths[i]) / enc.strides[i] + 1;
  }
  return t;
}

namespace {

GruWeights init_gru(std::size_t hidden, std::size_t input, Rng& rng) {
  GruWeights w;
  const double bx = 1.0 / std::sqrt(static_cast<double>(input));
  const double bh = 1.0 / std::sqrt(static_cast<double>(hidden));
  w.input_proj = uniform_init({3 * hidden, input}, bx, rng);
  w.hidden_proj = uniform_init({2 * hidden, hidden}, bh, rng);
  w.candidate_proj = uniform_init({hidden, hidden}, bh, rng);
  w.bias = zeros({3 * hidden});
  return w;
}

void init_encoder(const ModelConfig& config, std::vector<Tensor>* kernels,
                  std::vector<Tensor>* biases, Rng& rng) {
  std::size_t cin = config.input_channels;
  for (std::size_t i = 0; i < config.encoder.widths.size(); ++i) {
    const std::size_t cout = config.encoder.channels[i];
    const std::size_t width = config.encoder.widths[i];
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * width));
    kernels->push_back(uniform_init({cout, cin, width}, bound, rng));
    biases->push_back(zeros({cout}));
    cin = cout;
  }
}

}  // namespace

CpcModel CpcModel::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  CpcModel model;
  model.config = config;
  model.init_seed = seed;
  Rng rng(Rng::split(seed, 0));
  init_encoder(config, &model.conv_kernels, &model.conv_biases, rng);
  model.gru = init_gru(config.context_dim, config.latent_dim, rng);
  const double bound =
      1.0 / std::sqrt(static_cast<double>(config.context_dim));
  for (std::size_t k = 0; k < config.horizons; ++k) {
    model.heads.push_back(
        uniform_init({config.latent_dim, config.context_dim}, bound, rng));
  }
  return model;
}

std::vector<std::pair<std::string, Tensor*>> CpcModel::named_parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t i = 0; i < conv_kernels.size(); ++i) {
    out.emplace_back("enc.conv" + std::to_string(i) + ".kernel",
                     &conv_kernels[i]);
    out.emplace_back("enc.conv" + std::to_string(i) + ".bias",
                     &conv_biases[i]);
  }
  out.emplace_back("gru.input_proj", &gru.input_proj);
  out.emplace_back("gru.hidden_proj", &gru.hidden_proj);
  out.emplace_back("gru.candidate_proj", &gru.candidate_proj);
  out.emplace_back("gru.bias", &gru.bias);
  for (std::size_t k = 0; k < heads.size(); ++k) {
    out.emplace_back("head.w" + std::to_string(k + 1), &heads[k]);
  }
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> CpcModel::named_parameters()
    const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<CpcModel*>(this)->named_parameters()) {
    out.emplace_back(name, t);
  }
  return out;
}

CpcLeaves bind(Tape& tape, const CpcModel& model) {
  CpcLeaves leaves;
  for (std::size_t i = 0; i < model.conv_kernels.size(); ++i) {
    leaves.conv_kernels.push_back(tape.leaf(model.conv_kernels[i]));
    leaves.conv_biases.push_back(tape.leaf(model.conv_biases[i]));
  }
  leaves.gru.input_proj = tape.leaf(model.gru.input_proj);
  leaves.gru.hidden_proj = tape.leaf(model.gru.hidden_proj);
  leaves.gru.candidate_proj = tape.leaf(model.gru.candidate_proj);
  leaves.gru.bias = tape.leaf(model.gru.bias);
  for (const Tensor& head : model.heads) {
    leaves.heads.push_back(tape.leaf(head));
  }
  return leaves;
}

Tensor encode_batch(Tape& tape, const CpcLeaves& leaves,
                    const ModelConfig& config, const Tensor& x,
                    std::size_t batch) {
  if (x.rank() != 2 || x.rows() != batch * config.input_channels) {
    throw ShapeError("encode_batch expects [batch*channels x time], got " +
                     shape_to_string(x.shape));
  }
  latent_length(config.encoder, x.cols());  // validates minimum length
  Tensor cur = x;  // channel-major
  std::size_t cin = config.input_channels;
  const std::size_t layers = config.encoder.widths.size();
  for (std::size_t i = 0; i < layers; ++i) {
    const std::size_t width = config.encoder.widths[i];
    const std::size_t stride = config.encoder.strides[i];
    const std::size_t cout = config.encoder.channels[i];
    Tensor cols = tape.im2col(cur, cin, width, stride, batch);
    Tensor kmat = leaves.conv_kernels[i].reshaped({cout, cin * width});
    Tensor framed = tape.matmul_nt(cols, kmat);
    framed = tape.add_bias(framed, leaves.conv_biases[i]);
    framed = tape.relu(framed);
    if (i + 1 < layers) {
      cur = tape.frames_to_channels(framed, batch);
      cin = cout;
    } else {
      cur = framed;  // final layer stays frame-major: [batch*T x latent_dim]
    }
  }
  return cur;
}

Tensor gru_cell_from_xw(Tape& tape, const Tensor& h, const Tensor& xw,
                        const GruWeights& w) {
  const std::size_t d = w.hidden_dim();
  Tensor hu = tape.matmul_nt(h, w.hidden_proj);  // [B x 2d]
  Tensor reset =
      tape.sigmoid(tape.add(tape.slice_cols(xw, 0, d), tape.slice_cols(hu, 0, d)));
  Tensor update = tape.sigmoid(
      tape.add(tape.slice_cols(xw, d, 2 * d), tape.slice_cols(hu, d, 2 * d)));
  Tensor candidate = tape.tanh(
      tape.add(tape.slice_cols(xw, 2 * d, 3 * d),
               tape.matmul_nt(tape.mul(reset, h), w.candidate_proj)));
  return tape.add(tape.mul(update, h),
                  tape.sub(candidate, tape.mul(update, candidate)));
}

Tensor contextualize_batch(Tape& tape, const CpcLeaves& leaves,
                           const ModelConfig& config, const Tensor& z,
                           std::size_t batch, std::size_t frames) {
  if (frames < 1) throw ValueError("contextualize of an empty sequence");
  if (z.rank() != 2 || z.rows() != batch * frames ||
      z.cols() != config.latent_dim) {
    throw ShapeError("contextualize_batch expects [batch*T x latent_dim], got " +
                     shape_to_string(z.shape));
  }
  const std::size_t d = config.context_dim;
  // Input projections for the whole sequence in one matmul.
  Tensor xw_all =
      tape.add_bias(tape.matmul_nt(z, leaves.gru.input_proj), leaves.gru.bias);
  Tensor h = zeros({batch, d});  // constant zero initial state
  std::vector<Tensor> steps;
  steps.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<std::size_t> idx(batch);
    for (std::size_t b = 0; b < batch; ++b) idx[b] = b * frames + t;
    Tensor xw_t = tape.gather_rows(xw_all, std::move(idx));
    h = gru_cell_from_xw(tape, h, xw_t, leaves.gru);
    steps.push_back(h);
  }
  Tensor stacked = tape.concat_rows(steps);  // row (t*batch + b)
  std::vector<std::size_t> to_bmajor(batch * frames);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < frames; ++t) {
      to_bmajor[b * frames + t] = t * batch + b;
    }
  }
  return tape.gather_rows(stacked, std::move(to_bmajor));
}

Tensor encode(const CpcModel& model, const Tensor& x) {
  if (x.rank() != 2 || x.rows() != model.config.input_channels) {
    throw ShapeError("encode expects [channels x time], got " +
                     shape_to_string(x.shape));
  }
  Tape tape;
  CpcLeaves leaves = bind(tape, model);
  Tensor z = encode_batch(tape, leaves, model.config, x, 1);
  z.node = Tensor::kNoNode;
  return z;
}

Tensor contextualize(const CpcModel& model, const Tensor& z) {
  if (z.rank() != 2 || z.cols() != model.config.latent_dim) {
    throw ShapeError("contextualize expects [T x latent_dim], got " +
                     shape_to_string(z.shape));
  }
  if (z.rows() == 0) throw ValueError("contextualize of an empty sequence");
  Tape tape;
  CpcLeaves leaves = bind(tape, model);
  Tensor c = contextualize_batch(tape, leaves, model.config, z, 1, z.rows());
  c.node = Tensor::kNoNode;
  return c;
}

std::vector<double> predict(const CpcModel& model, std::span<const double> c,
                            std::size_t k) {
  if (k < 1 || k > model.config.horizons) {
    throw ValueError("horizon k=" + std::to_string(k) + " out of range [1, " +
                     std::to_string(model.config.horizons) + "]");
  }
  const Tensor& w = model.heads[k - 1];
  if (c.size() != w.cols()) {
    throw ShapeError("predict: context dim " + std::to_string(c.size()) +
                     " vs head " + shape_to_string(w.shape));
  }
  std::vector<double> out(w.rows());
  // out = W_k c
  for (std::size_t i = 0; i < w.rows(); ++i) {
    out[i] = ker::dot(w.values.data() + i * w.cols(), c.data(), c.size());
  }
  return out;
}

double score(const CpcModel& model, std::span<const double> z,
             std::span<const double> c, std::size_t k) {
  std::vector<double> pred = predict(model, c, k);
  if (z.size() != pred.size()) {
    throw ShapeError("score: latent dim " + std::to_string(z.size()) +
                     " vs prediction dim " + std::to_string(pred.size()));
  }
  return ker::dot(z.data(), pred.data(), pred.size());
}

PairScorer PairScorer::init(const PairScorerConfig& config,
                            std::uint64_t seed) {
  if (config.x_dim < 1 || config.c_dim < 1 || config.hidden_dim < 1 ||
      config.embed_dim < 1) {
    throw ConfigError("pair scorer dims must be >= 1");
  }
  PairScorer s;
  s.config = config;
  s.init_seed = seed;
  Rng rng(Rng::split(seed, 1));
  auto lin = [&rng](std::size_t out, std::size_t in) {
    return uniform_init({out, in}, 1.0 / std::sqrt(static_cast<double>(in)),
                        rng);
  };
  s.x_w1 = lin(config.hidden_dim, config.x_dim);
  s.x_b1 = zeros({config.hidden_dim});
  s.x_w2 = lin(config.embed_dim, config.hidden_dim);
  s.x_b2 = zeros({config.embed_dim});
  s.c_w1 = lin(config.hidden_dim, config.c_dim);
  s.c_b1 = zeros({config.hidden_dim});
  s.c_w2 = lin(config.embed_dim, config.hidden_dim);
  s.c_b2 = zeros({config.embed_dim});
  s.bilinear = lin(config.embed_dim, config.embed_dim);
  return s;
}

std::vector<std::pair<std::string, Tensor*>> PairScorer::named_parameters() {
  return {
      {"x.w1", &x_w1}, {"x.b1", &x_b1}, {"x.w2", &x_w2}, {"x.b2", &x_b2},
      {"c.w1", &c_w1}, {"c.b1", &c_b1}, {"c.w2", &c_w2}, {"c.b2", &c_b2},
      {"bilinear", &bilinear},
  };
}

std::vector<std::pair<std::string, const Tensor*>>
PairScorer::named_parameters() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<PairScorer*>(this)->named_parameters()) {
    out.emplace_back(name, t);
  }
  return out;
}

PairLeaves bind(Tape& tape, const PairScorer& s) {
  PairLeaves l;
  l.x_w1 = tape.leaf(s.x_w1);
  l.x_b1 = tape.leaf(s.x_b1);
  l.x_w2 = tape.leaf(s.x_w2);
  l.x_b2 = tape.leaf(s.x_b2);
  l.c_w1 = tape.leaf(s.c_w1);
  l.c_b1 = tape.leaf(s.c_b1);
  l.c_w2 = tape.leaf(s.c_w2);
  l.c_b2 = tape.leaf(s.c_b2);
  l.bilinear = tape.leaf(s.bilinear);
  return l;
}

namespace {

Tensor mlp2(Tape& tape, const Tensor& x, const Tensor& w1, const Tensor& b1,
            const Tensor& w2, const Tensor& b2) {
  Tensor h = tape.relu(tape.add_bias(tape.matmul_nt(x, w1), b1));
  return tape.add_bias(tape.matmul_nt(h, w2), b2);
}

}  // namespace

Tensor embed_pair_x(Tape& tape, const PairLeaves& l, const Tensor& x) {
  return mlp2(tape, x, l.x_w1, l.x_b1, l.x_w2, l.x_b2);
}

Tensor embed_pair_c(Tape& tape, const PairLeaves& l, const Tensor& c) {
  return mlp2(tape, c, l.c_w1, l.c_b1, l.c_w2, l.c_b2);
}

SupervisedModel SupervisedModel::init(const ModelConfig& config,
                                      std::size_t classes,
                                      std::uint64_t seed) {
  config.validate();
  if (classes < 2) throw ConfigError("supervised model needs >= 2 classes");
  SupervisedModel model;
  model.config = config;
  model.classes = classes;
  model.init_seed = seed;
  Rng rng(Rng::split(seed, 2));
  init_encoder(config, &model.conv_kernels, &model.conv_biases, rng);
  model.gru = init_gru(config.context_dim, config.latent_dim, rng);
  model.head_w = uniform_init(
      {classes, config.context_dim},
      1.0 / std::sqrt(static_cast<double>(config.context_dim)), rng);
  model.head_b = zeros({classes});
  return model;
}

std::vector<std::pair<std::string, Tensor*>>
SupervisedModel::named_parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t i = 0; i < conv_kernels.size(); ++i) {
    out.emplace_back("enc.conv" + std::to_string(i) + ".kernel",
                     &conv_kernels[i]);
    out.emplace_back("enc.conv" + std::to_string(i) + ".bias",
                     &conv_biases[i]);
  }
  out.emplace_back("gru.input_proj", &gru.input_proj);
  out.emplace_back("gru.hidden_proj", &gru.hidden_proj);
  out.emplace_back("gru.candidate_proj", &gru.candidate_proj);
  out.emplace_back("gru.bias", &gru.bias);
  out.emplace_back("head.w", &head_w);
  out.emplace_back("head.b", &head_b);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>>
SupervisedModel::named_parameters() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] :
       const_cast<SupervisedModel*>(this)->named_parameters()) {
    out.emplace_back(name, t);
  }
  return out;
}

std::uint64_t parameter_hash(
    const std::vector<std::pair<std::string, const Tensor*>>& params) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& [name, t] : params) {
    mix(name.data(), name.size());
    mix(t->values.data(), t->values.size() * sizeof(double));
  }
  return h;
}

std::uint64_t parameter_hash(
    const std::vector<std::pair<std::string, Tensor*>>& params) {
  std::vector<std::pair<std::string, const Tensor*>> view;
  view.reserve(params.size());
  for (const auto& [name, t] : params) view.emplace_back(name, t);
  return parameter_hash(view);
}

}  // namespace cpc
