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

#ifndef CPC_ADAM_HPP_
#define CPC_ADAM_HPP_

#include <cstdint>
#include <vector>

#include "cpc/tensor.hpp"

namespace cpc {

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment accumulators plus the shared step counter, one slot
// per parameter tensor in registration order.
class AdamState {
 public:
  AdamState(const std::vector<Tensor*>& params, AdamConfig config);

  /// One bias-corrected Adam update, in place.
  void step(const std::vector<Tensor*>& params,
            const std::vector<Tensor>& grads);

  std::uint64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<double>& second_moment(std::size_t i) const {
    return v_[i];
  }

 private:
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t step_count_ = 0;
};

/// Free-function form: applies one update to `params` given matching grads.
void adam_step(const std::vector<Tensor*>& params,
               const std::vector<Tensor>& grads, AdamState& state);

}  // namespace cpc

#endif  // CPC_ADAM_HPP_
