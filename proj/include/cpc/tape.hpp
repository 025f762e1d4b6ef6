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

#ifndef CPC_TAPE_HPP_
#define CPC_TAPE_HPP_

#include <functional>
#include <memory>
#include <vector>

#include "cpc/tensor.hpp"

namespace cpc {

enum class Reduction { kMean, kSum };

// GRU cell parameters. Gate rows are ordered reset, update, candidate in
// input_proj and bias; hidden_proj carries reset and update.
struct GruWeights {
  Tensor input_proj;      // [3d x e]
  Tensor hidden_proj;     // [2d x d]
  Tensor candidate_proj;  // [d x d]
  Tensor bias;            // [3d]

  std::size_t hidden_dim() const { return candidate_proj.rows(); }
  std::size_t input_dim() const { return input_proj.cols(); }
};

/// Gradients produced by one backward pass, keyed by tape node id.
/// Nodes the loss never reached report zero gradients.
class GradientMap {
 public:
  GradientMap(std::vector<std::vector<double>> grads,
              std::vector<std::vector<std::size_t>> shapes)
      : grads_(std::move(grads)), shapes_(std::move(shapes)) {}

  Tensor grad(int node) const;
  Tensor grad(const Tensor& t) const;
  bool reached(int node) const;

 private:
  std::vector<std::vector<double>> grads_;
  std::vector<std::vector<std::size_t>> shapes_;
};

// Reverse-mode differentiation tape. Every operation records its output
// shape and a pullback closure; parents always precede children, so one
// reverse sweep visits each node exactly once.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a differentiable input (parameter) on the tape.
  Tensor leaf(Tensor t);

  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(double a, const Tensor& x);
  /// m[r x c] + bias[c] broadcast over rows.
  Tensor add_bias(const Tensor& m, const Tensor& bias);
  Tensor relu(const Tensor& x);
  Tensor sigmoid(const Tensor& x);
  Tensor tanh(const Tensor& x);

  /// a[m x k] * b[k x n].
  Tensor matmul(const Tensor& a, const Tensor& b);
  /// a[m x k] * b[n x k]^T.
  Tensor matmul_nt(const Tensor& a, const Tensor& b);

  /// Valid (unpadded) strided convolution over `batch` stacked sequences.
  /// input is [batch*channels x time], kernel [out x in x width]; result is
  /// [batch*out x time'] with time' = floor((time - width)/stride) + 1.
  Tensor conv1d(const Tensor& input, const Tensor& kernel, std::size_t stride,
                std::size_t batch = 1);

  /// Unrolls conv windows: [batch*channels x time] -> [batch*time' x
  /// channels*width] with column order (channel, offset).
  Tensor im2col(const Tensor& input, std::size_t channels, std::size_t width,
                std::size_t stride, std::size_t batch);

  /// out[i] = x[perm[i]] elementwise; perm must be a permutation.
  Tensor permute(const Tensor& x, std::vector<std::size_t> perm,
                 std::vector<std::size_t> out_shape);

  /// [batch*time x channels] frame-major -> [batch*channels x time].
  Tensor frames_to_channels(const Tensor& x, std::size_t batch);
  /// [batch*channels x time] -> [batch*time x channels] frame-major.
  Tensor channels_to_frames(const Tensor& x, std::size_t batch);

  /// Rows of x selected by index (duplicates allowed).
  Tensor gather_rows(const Tensor& x, std::vector<std::size_t> idx);
  Tensor concat_rows(const std::vector<Tensor>& parts);
  Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t c1);

  /// s[i, j] = dot(a row i, b row i*block + j); a [rows x d],
  /// b [rows*block x d] -> [rows x block].
  Tensor row_block_dot(const Tensor& a, const Tensor& b, std::size_t block);

  Tensor sum(const Tensor& x);
  Tensor mean(const Tensor& x);

  /// log sum exp of all elements, max-shifted for stability.
  Tensor logsumexp(const Tensor& v);

  /// Per-row -log softmax(scores)[positive], reduced to a scalar. Backward
  /// is the fused (softmax - onehot) rule.
  Tensor cross_entropy_rows(const Tensor& scores,
                            const std::vector<std::size_t>& positives,
                            Reduction reduction = Reduction::kMean);

  /// One GRU update. h is [d] or [batch x d], x is [e] or [batch x e].
  /// Blend is h' = u*h + (1-u)*candidate, so a saturated update gate
  /// carries the state through unchanged.
  Tensor gru_step(const Tensor& h, const Tensor& x, const GruWeights& w);

  /// Reverse sweep from a scalar loss.
  GradientMap backward(const Tensor& loss);

  std::size_t node_count() const { return nodes_.size(); }

  /// When on, every op verifies its output is finite (test aid).
  void set_check_finite(bool on) { check_finite_ = on; }

 private:
  friend class TapeBackwardContext;
  using BackFn = std::function<void(Tape&, const std::vector<double>&)>;

  struct Node {
    std::vector<std::size_t> shape;
    BackFn back;
  };

  int push_node(std::vector<std::size_t> shape, BackFn back);
  Tensor make_result(std::vector<std::size_t> shape,
                     std::vector<double> values, BackFn back);
  /// Zero-initialized gradient buffer for a node (backward phase only).
  double* grad_buffer(int node, std::size_t size);
  void check(const Tensor& t) const;

  static std::shared_ptr<const std::vector<double>> snapshot(const Tensor& t) {
    return std::make_shared<const std::vector<double>>(t.values);
  }

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  bool check_finite_ = false;
};

}  // namespace cpc

#endif  // CPC_TAPE_HPP_
