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

#include "cpc/tensor.hpp"

#include <cmath>

namespace cpc {

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor ones(std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  std::fill(t.values.begin(), t.values.end(), 1.0);
  return t;
}

Tensor identity_matrix(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.values[i * n + i] = 1.0;
  return t;
}

Tensor uniform_init(std::vector<std::size_t> shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values) v = rng.uniform(-bound, bound);
  return t;
}

Tensor random_normal(std::vector<std::size_t> shape, Rng& rng, double stddev) {
  Tensor t(std::move(shape));
  for (double& v : t.values) v = stddev * rng.normal();
  return t;
}

bool all_finite(const Tensor& t) {
  for (double v : t.values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace cpc
