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

#include "cpc/adam.hpp"

#include <cmath>

#include "cpc/kernels.hpp"

namespace cpc {

AdamState::AdamState(const std::vector<Tensor*>& params, AdamConfig config)
    : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Tensor* p : params) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void AdamState::step(const std::vector<Tensor*>& params,
                     const std::vector<Tensor>& grads) {
  if (params.size() != m_.size() || grads.size() != params.size()) {
    throw ShapeError("adam_step: parameter/gradient count mismatch");
  }
  ++step_count_;
  const double bc1 =
      1.0 / (1.0 - std::pow(config_.beta1, static_cast<double>(step_count_)));
  const double bc2 =
      1.0 / (1.0 - std::pow(config_.beta2, static_cast<double>(step_count_)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (g.size() != p.size() || m_[i].size() != p.size()) {
      throw ShapeError("adam_step: shape mismatch for parameter " +
                       std::to_string(i) + ": " + shape_to_string(p.shape) +
                       " vs " + shape_to_string(g.shape));
    }
    kernels::adam_update(p.values.data(), g.values.data(), m_[i].data(),
                         v_[i].data(), p.size(), config_.learning_rate,
                         config_.beta1, config_.beta2, config_.epsilon, bc1,
                         bc2);
  }
}

void adam_step(const std::vector<Tensor*>& params,
               const std::vector<Tensor>& grads, AdamState& state) {
  state.step(params, grads);
}

}  // namespace cpc
