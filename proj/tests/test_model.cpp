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
#include <fstream>

#include "cpc/model.hpp"

using namespace cpc;

namespace {

ModelConfig desk_config() {
  ModelConfig mc;
  mc.encoder.strides = {2, 2};
  mc.encoder.widths = {4, 4};
  mc.encoder.channels = {32, 32};
  mc.input_channels = 16;
  mc.latent_dim = 32;
  mc.context_dim = 32;
  mc.horizons = 8;
  return mc;
}

ModelConfig tiny_config() {
  ModelConfig mc;
  mc.encoder.strides = {2};
  mc.encoder.widths = {3};
  mc.encoder.channels = {4};
  mc.input_channels = 2;
  mc.latent_dim = 4;
  mc.context_dim = 3;
  mc.horizons = 2;
  return mc;
}

}  // namespace

TEST_CASE("length arithmetic") {
  const ModelConfig mc = desk_config();
  CHECK(receptive_field(mc.encoder) == 10);
  CHECK(total_stride(mc.encoder) == 4);
  // compose the conv1d formula layer by layer: 64 -> 31 -> 14
  CHECK(latent_length(mc.encoder, 64) == 14);
  // exactly one receptive field -> a single latent frame
  CHECK(latent_length(mc.encoder, 10) == 1);
  CHECK_THROWS_WITH_AS(latent_length(mc.encoder, 9),
                       doctest::Contains("minimum length 10"), ValueError);
}

TEST_CASE("config validation") {
  ModelConfig mc = desk_config();
  mc.latent_dim = 16;  // != channels.back()
  CHECK_THROWS_AS(mc.validate(), ConfigError);
  mc = desk_config();
  mc.horizons = 0;
  CHECK_THROWS_AS(mc.validate(), ConfigError);
  mc = desk_config();
  mc.encoder.widths.pop_back();
  CHECK_THROWS_AS(mc.validate(), ConfigError);
}

TEST_CASE("encode basics") {
  const ModelConfig mc = tiny_config();
  CpcModel model = CpcModel::init(mc, 7);

  // zero input with zero weights gives all-zero latents
  CpcModel zero_model = model;
  for (auto& [name, t] : zero_model.named_parameters()) {
    std::fill(t->values.begin(), t->values.end(), 0.0);
  }
  Tensor x0 = zeros({2, 16});
  Tensor z0 = encode(zero_model, x0);
  CHECK(z0.shape == std::vector<std::size_t>{7, 4});
  for (double v : z0.values) CHECK(v == 0.0);

  Rng rng(71);
  Tensor x = random_normal({2, 16}, rng);
  Tensor z = encode(model, x);
  CHECK(z.rows() == latent_length(mc.encoder, 16));
  CHECK(z.cols() == mc.latent_dim);
  CHECK(all_finite(z));

  CHECK_THROWS_AS(encode(model, random_normal({3, 16}, rng)), ShapeError);
  CHECK_THROWS_AS(encode(model, random_normal({2, 2}, rng)), ValueError);
}

TEST_CASE("contextualize is causal and matches repeated gru_step") {
  const ModelConfig mc = tiny_config();
  CpcModel model = CpcModel::init(mc, 8);
  Rng rng(72);
  const std::size_t frames = 6;
  Tensor z = random_normal({frames, mc.latent_dim}, rng);
  Tensor c = contextualize(model, z);
  CHECK(c.shape == std::vector<std::size_t>{frames, mc.context_dim});

  // causality: perturbing z_{t+1} leaves c_1..c_t bit-identical
  const std::size_t t_perturb = 3;
  Tensor z2 = z;
  for (std::size_t d = 0; d < mc.latent_dim; ++d) {
    z2(t_perturb, d) += 10.0;
  }
  Tensor c2 = contextualize(model, z2);
  for (std::size_t t = 0; t < t_perturb; ++t) {
    for (std::size_t d = 0; d < mc.context_dim; ++d) {
      CHECK(c(t, d) == c2(t, d));  // bitwise
    }
  }
  bool later_changed = false;
  for (std::size_t d = 0; d < mc.context_dim; ++d) {
    later_changed = later_changed || c(t_perturb, d) != c2(t_perturb, d);
  }
  CHECK(later_changed);

  // the sequence runner equals naive per-step gru_step applications
  Tape tape;
  GruWeights wl;
  wl.input_proj = tape.leaf(model.gru.input_proj);
  wl.hidden_proj = tape.leaf(model.gru.hidden_proj);
  wl.candidate_proj = tape.leaf(model.gru.candidate_proj);
  wl.bias = tape.leaf(model.gru.bias);
  Tensor h = tape.leaf(zeros({1, mc.context_dim}));
  for (std::size_t t = 0; t < frames; ++t) {
    Tensor xt({1, mc.latent_dim});
    for (std::size_t d = 0; d < mc.latent_dim; ++d) xt.values[d] = z(t, d);
    h = tape.gru_step(h, tape.leaf(xt), wl);
    for (std::size_t d = 0; d < mc.context_dim; ++d) {
      CHECK(c(t, d) == doctest::Approx(h.values[d]).epsilon(1e-13));
    }
  }

  // zero parameters keep the context at zero
  CpcModel zero_model = model;
  for (auto& [name, t] : zero_model.named_parameters()) {
    std::fill(t->values.begin(), t->values.end(), 0.0);
  }
  Tensor cz = contextualize(zero_model, z);
  for (double v : cz.values) CHECK(v == 0.0);

  CHECK_THROWS_AS(contextualize(model, Tensor({0, mc.latent_dim})),
                  ValueError);
}

TEST_CASE("batched forward equals single-sequence forward") {
  const ModelConfig mc = tiny_config();
  CpcModel model = CpcModel::init(mc, 9);
  Rng rng(73);
  const std::size_t frames = 20, batch = 3;
  std::vector<Tensor> xs;
  for (std::size_t b = 0; b < batch; ++b) {
    xs.push_back(random_normal({mc.input_channels, frames}, rng));
  }
  Tensor packed({batch * mc.input_channels, frames});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy(xs[b].values.begin(), xs[b].values.end(),
              packed.values.begin() + b * mc.input_channels * frames);
  }
  Tape tape;
  CpcLeaves leaves = bind(tape, model);
  const std::size_t t_lat = latent_length(mc.encoder, frames);
  Tensor zb = encode_batch(tape, leaves, mc, packed, batch);
  Tensor cb = contextualize_batch(tape, leaves, mc, zb, batch, t_lat);
  for (std::size_t b = 0; b < batch; ++b) {
    Tensor z1 = encode(model, xs[b]);
    Tensor c1 = contextualize(model, z1);
    for (std::size_t t = 0; t < t_lat; ++t) {
      for (std::size_t d = 0; d < mc.latent_dim; ++d) {
        CHECK(zb((b * t_lat + t), d) ==
              doctest::Approx(z1(t, d)).epsilon(1e-13));
      }
      for (std::size_t d = 0; d < mc.context_dim; ++d) {
        CHECK(cb((b * t_lat + t), d) ==
              doctest::Approx(c1(t, d)).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("score and predict duality") {
  ModelConfig mc = tiny_config();
  mc.context_dim = mc.latent_dim;  // identity-head checks need square W
  CpcModel model = CpcModel::init(mc, 10);
  Rng rng(74);

  std::vector<double> c(mc.context_dim);
  std::vector<double> z(mc.latent_dim);
  for (auto& v : c) v = rng.normal();
  for (auto& v : z) v = rng.normal();

  // zero latent scores zero (f = 1)
  std::vector<double> zero_z(mc.latent_dim, 0.0);
  CHECK(score(model, zero_z, c, 1) == 0.0);

  // identity head: score(z, z) = |z|^2 and predict returns c
  CpcModel ident = model;
  ident.heads[0] = identity_matrix(mc.latent_dim);
  double sq = 0.0;
  for (double v : z) sq += v * v;
  CHECK(score(ident, z, z, 1) == doctest::Approx(sq).epsilon(1e-12));
  std::vector<double> pred = predict(ident, c, 1);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(pred[i] == doctest::Approx(c[i]));
  }

  // zero context predicts zero
  std::vector<double> zero_c(mc.context_dim, 0.0);
  for (double v : predict(model, zero_c, 2)) CHECK(v == 0.0);

  // bilinearity in z
  CHECK(score(model, z, c, 2) * 2.0 ==
        doctest::Approx([&] {
          std::vector<double> z2 = z;
          for (double& v : z2) v *= 2.0;
          return score(model, z2, c, 2);
        }()).epsilon(1e-12));

  // duality against an independent evaluation route: (z^T W) . c
  for (std::size_t k = 1; k <= mc.horizons; ++k) {
    const Tensor& w = model.heads[k - 1];
    std::vector<double> ztw(mc.context_dim, 0.0);
    for (std::size_t i = 0; i < mc.latent_dim; ++i) {
      for (std::size_t j = 0; j < mc.context_dim; ++j) {
        ztw[j] += z[i] * w(i, j);
      }
    }
    double via_rows = 0.0;
    for (std::size_t j = 0; j < mc.context_dim; ++j) via_rows += ztw[j] * c[j];
    CHECK(score(model, z, c, k) == doctest::Approx(via_rows).epsilon(1e-12));
    // and the advertised identity <z, predict(c, k)> == score(z, c, k)
    std::vector<double> p = predict(model, c, k);
    double dot = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dot += z[i] * p[i];
    CHECK(score(model, z, c, k) == doctest::Approx(dot).epsilon(1e-13));
  }

  CHECK_THROWS_AS(score(model, z, c, 0), ValueError);
  CHECK_THROWS_AS(score(model, z, c, mc.horizons + 1), ValueError);
  CHECK_THROWS_AS(predict(model, c, mc.horizons + 1), ValueError);
}

TEST_CASE("initialization is deterministic given seed and config") {
  const ModelConfig mc = desk_config();
  CpcModel a = CpcModel::init(mc, 1234);
  CpcModel b = CpcModel::init(mc, 1234);
  CpcModel c = CpcModel::init(mc, 1235);
  CHECK(parameter_hash(a.named_parameters()) ==
        parameter_hash(b.named_parameters()));
  CHECK(parameter_hash(a.named_parameters()) !=
        parameter_hash(c.named_parameters()));

  Rng rng(75);
  Tensor x = random_normal({mc.input_channels, 64}, rng);
  Tensor z1 = encode(a, x);
  Tensor z2 = encode(b, x);
  CHECK(z1.values == z2.values);
}

TEST_CASE("checkpoint round trip and error reporting") {
  const std::string path = "test_checkpoint_roundtrip.json";
  const ModelConfig mc = tiny_config();
  CpcModel model = CpcModel::init(mc, 42);
  model.trained_steps = 17;
  save_checkpoint(path, model);
  CHECK(checkpoint_kind(path) == "cpc");

  CpcModel loaded = load_cpc_checkpoint(path);
  CHECK(loaded.trained_steps == 17);
  CHECK(loaded.init_seed == 42);
  CHECK(parameter_hash(loaded.named_parameters()) ==
        parameter_hash(model.named_parameters()));

  // malformed file: parse error carries context
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("{\"kind\": \"cpc\", \"config\": {", f);
    std::fclose(f);
    CHECK_THROWS_AS(load_cpc_checkpoint(path), IoError);
  }
  // missing tensor field is named
  save_checkpoint(path, model);
  {
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    in.close();
    const std::string key = "\"gru.bias\"";
    text.replace(text.find(key), key.size(), "\"gru.bias_gone\"");
    std::ofstream out(path);
    out << text;
    out.close();
    CHECK_THROWS_WITH_AS(load_cpc_checkpoint(path),
                         doctest::Contains("gru.bias"), IoError);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_cpc_checkpoint(path), IoError);

  // pair scorer round trip
  PairScorerConfig pc;
  pc.x_dim = 2;
  pc.c_dim = 2;
  pc.hidden_dim = 8;
  pc.embed_dim = 4;
  PairScorer scorer = PairScorer::init(pc, 5);
  const std::string ppath = "test_pair_roundtrip.json";
  save_checkpoint(ppath, scorer);
  CHECK(checkpoint_kind(ppath) == "pair");
  PairScorer ploaded = load_pair_checkpoint(ppath);
  CHECK(parameter_hash(ploaded.named_parameters()) ==
        parameter_hash(scorer.named_parameters()));
  CHECK_THROWS_AS(load_cpc_checkpoint(ppath), IoError);  // wrong kind
  std::remove(ppath.c_str());
}
