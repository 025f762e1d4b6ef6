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

#include <fstream>

#include <json.hpp>

#include "cpc/model.hpp"

namespace cpc {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

json tensors_to_json(
    const std::vector<std::pair<std::string, const Tensor*>>& params) {
  json out = json::object();
  for (const auto& [name, t] : params) {
    out[name] = {{"shape", t->shape}, {"values", t->values}};
  }
  return out;
}

json model_config_to_json(const ModelConfig& c) {
  return {{"strides", c.encoder.strides},
          {"widths", c.encoder.widths},
          {"channels", c.encoder.channels},
          {"input_channels", c.input_channels},
          {"latent_dim", c.latent_dim},
          {"context_dim", c.context_dim},
          {"horizons", c.horizons}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.encoder.strides = j.at("strides").get<std::vector<std::size_t>>();
  c.encoder.widths = j.at("widths").get<std::vector<std::size_t>>();
  c.encoder.channels = j.at("channels").get<std::vector<std::size_t>>();
  c.input_channels = j.at("input_channels").get<std::size_t>();
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.context_dim = j.at("context_dim").get<std::size_t>();
  c.horizons = j.at("horizons").get<std::size_t>();
  return c;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump();
  out << "\n";
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    // e.what() carries the byte offset from nlohmann.
    throw IoError("malformed checkpoint " + path + ": " + e.what());
  }
}

void fill_parameters(
    const json& tensors,
    const std::vector<std::pair<std::string, Tensor*>>& params,
    const std::string& path) {
  for (const auto& [name, t] : params) {
    if (!tensors.contains(name)) {
      throw IoError("checkpoint " + path + " missing tensor field '" + name +
                    "'");
    }
    const json& jt = tensors.at(name);
    std::vector<std::size_t> shape;
    std::vector<double> values;
    try {
      shape = jt.at("shape").get<std::vector<std::size_t>>();
      values = jt.at("values").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw IoError("checkpoint " + path + " tensor '" + name +
                    "' malformed: " + e.what());
    }
    if (shape != t->shape || values.size() != t->size()) {
      throw IoError("checkpoint " + path + " tensor '" + name + "' has shape " +
                    shape_to_string(shape) + ", expected " +
                    shape_to_string(t->shape));
    }
    t->values = std::move(values);
  }
}

template <typename T>
T read_field(const json& j, const char* field, const std::string& path) {
  if (!j.contains(field)) {
    throw IoError("checkpoint " + path + " missing field '" + field + "'");
  }
  try {
    return j.at(field).get<T>();
  } catch (const json::exception& e) {
    throw IoError("checkpoint " + path + " field '" + field +
                  "' malformed: " + e.what());
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const CpcModel& model) {
  json j = {{"schema_version", kSchemaVersion},
            {"kind", "cpc"},
            {"config", model_config_to_json(model.config)},
            {"init_seed", model.init_seed},
            {"trained_steps", model.trained_steps},
            {"tensors", tensors_to_json(model.named_parameters())}};
  write_json(path, j);
}

void save_checkpoint(const std::string& path, const PairScorer& scorer) {
  json j = {{"schema_version", kSchemaVersion},
            {"kind", "pair"},
            {"config",
             {{"x_dim", scorer.config.x_dim},
              {"c_dim", scorer.config.c_dim},
              {"hidden_dim", scorer.config.hidden_dim},
              {"embed_dim", scorer.config.embed_dim}}},
            {"init_seed", scorer.init_seed},
            {"trained_steps", scorer.trained_steps},
            {"tensors", tensors_to_json(scorer.named_parameters())}};
  write_json(path, j);
}

std::string checkpoint_kind(const std::string& path) {
  const json j = read_json(path);
  return read_field<std::string>(j, "kind", path);
}

CpcModel load_cpc_checkpoint(const std::string& path) {
  const json j = read_json(path);
  if (read_field<std::string>(j, "kind", path) != "cpc") {
    throw IoError("checkpoint " + path + " is not a cpc model");
  }
  ModelConfig config;
  try {
    config = model_config_from_json(j.at("config"));
  } catch (const json::exception& e) {
    throw IoError("checkpoint " + path + " config malformed: " + e.what());
  }
  CpcModel model =
      CpcModel::init(config, read_field<std::uint64_t>(j, "init_seed", path));
  model.trained_steps = read_field<std::uint64_t>(j, "trained_steps", path);
  if (!j.contains("tensors")) {
    throw IoError("checkpoint " + path + " missing field 'tensors'");
  }
  fill_parameters(j.at("tensors"), model.named_parameters(), path);
  return model;
}

PairScorer load_pair_checkpoint(const std::string& path) {
  const json j = read_json(path);
  if (read_field<std::string>(j, "kind", path) != "pair") {
    throw IoError("checkpoint " + path + " is not a pair scorer");
  }
  PairScorerConfig config;
  try {
    const json& jc = j.at("config");
    config.x_dim = jc.at("x_dim").get<std::size_t>();
    config.c_dim = jc.at("c_dim").get<std::size_t>();
    config.hidden_dim = jc.at("hidden_dim").get<std::size_t>();
    config.embed_dim = jc.at("embed_dim").get<std::size_t>();
  } catch (const json::exception& e) {
    throw IoError("checkpoint " + path + " config malformed: " + e.what());
  }
  PairScorer scorer = PairScorer::init(
      config, read_field<std::uint64_t>(j, "init_seed", path));
  scorer.trained_steps = read_field<std::uint64_t>(j, "trained_steps", path);
  if (!j.contains("tensors")) {
    throw IoError("checkpoint " + path + " missing field 'tensors'");
  }
  fill_parameters(j.at("tensors"), scorer.named_parameters(), path);
  return scorer;
}

}  // namespace cpc
