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

#ifndef CPC_TENSOR_HPP_
#define CPC_TENSOR_HPP_

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "cpc/errors.hpp"
#include "cpc/rng.hpp"

namespace cpc {

inline std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t p = 1;
  for (std::size_t d : shape) p *= d;
  return p;
}

std::string shape_to_string(const std::vector<std::size_t>& shape);

// Dense row-major double tensor. `node` links it to the tape that produced
// it; constants and detached values carry kNoNode.
struct Tensor {
  static constexpr int kNoNode = -1;

  std::vector<std::size_t> shape;
  std::vector<double> values;
  int node = kNoNode;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s)
      : shape(std::move(s)), values(shape_product(shape), 0.0) {}

  Tensor(std::vector<std::size_t> s, std::vector<double> v)
      : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != shape_product(shape)) {
      throw ShapeError("tensor value count " + std::to_string(values.size()) +
                       " does not match shape " + shape_to_string(shape));
    }
  }

  static Tensor scalar(double v) { return Tensor({}, {v}); }

  std::size_t size() const { return values.size(); }
  bool is_scalar() const { return values.size() == 1 && shape.empty(); }

  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }

  double& operator()(std::size_t r, std::size_t c) {
    return values[r * cols() + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return values[r * cols() + c];
  }

  /// Same values and tape node under a new shape (element count preserved).
  Tensor reshaped(std::vector<std::size_t> s) const {
    if (shape_product(s) != values.size()) {
      throw ShapeError("cannot reshape " + shape_to_string(shape) + " to " +
                       shape_to_string(s));
    }
    Tensor t(std::move(s), values);
    t.node = node;
    return t;
  }
};

/// All-zero tensor of the given shape.
inline Tensor zeros(std::vector<std::size_t> shape) {
  return Tensor(std::move(shape));
}

Tensor ones(std::vector<std::size_t> shape);
Tensor identity_matrix(std::size_t n);

/// Uniform values in [-bound, bound]; used with bound = 1/sqrt(fan_in).
Tensor uniform_init(std::vector<std::size_t> shape, double bound, Rng& rng);

Tensor random_normal(std::vector<std::size_t> shape, Rng& rng,
                     double stddev = 1.0);

bool all_finite(const Tensor& t);

}  // namespace cpc

#endif  // CPC_TENSOR_HPP_
