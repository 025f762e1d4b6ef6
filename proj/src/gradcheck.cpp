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

#include "cpc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace cpc {

namespace {

double eval_loss(const std::vector<Tensor>& params,
                 const std::function<Tensor(Tape&, const std::vector<Tensor>&)>&
                     forward) {
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(tape.leaf(p));
  Tensor loss = forward(tape, leaves);
  if (loss.size() != 1) {
    throw ValueError("gradcheck forward must return a scalar");
  }
  return loss.values[0];
}

}  // namespace

GradCheckResult check_gradients(
    const std::string& name, const std::vector<Tensor>& params,
    const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& forward,
    double eps, double tol) {
  GradCheckResult result;
  result.name = name;
  if (params.empty()) return result;  // vacuous pass

  // Analytic gradients from one taped pass.
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Tensor> leaves;
    leaves.reserve(params.size());
    for (const Tensor& p : params) leaves.push_back(tape.leaf(p));
    Tensor loss = forward(tape, leaves);
    if (loss.size() != 1) {
      throw ValueError("gradcheck forward must return a scalar");
    }
    GradientMap grads = tape.backward(loss);
    for (const Tensor& leaf : leaves) analytic.push_back(grads.grad(leaf));
  }

  std::vector<Tensor> probe = params;
  for (std::size_t pi = 0; pi < probe.size(); ++pi) {
    for (std::size_t j = 0; j < probe[pi].size(); ++j) {
      const double saved = probe[pi].values[j];
      probe[pi].values[j] = saved + eps;
      const double fplus = eval_loss(probe, forward);
      probe[pi].values[j] = saved - eps;
      const double fminus = eval_loss(probe, forward);
      probe[pi].values[j] = saved;
      const double numeric = (fplus - fminus) / (2.0 * eps);
      const double a = analytic[pi].values[j];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1.0});
      result.max_rel_err =
          std::max(result.max_rel_err, std::fabs(a - numeric) / denom);
      ++result.checked;
    }
  }
  result.pass = result.max_rel_err < tol;
  return result;
}

}  // namespace cpc
