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

#include "cpc/tape.hpp"

#include <cmath>
#include <cstring>
#include <utility>

#include "cpc/kernels.hpp"

namespace cpc {

namespace ker = cpc::kernels;

Tensor GradientMap::grad(int node) const {
  if (node < 0 || static_cast<std::size_t>(node) >= shapes_.size()) {
    throw ValueError("gradient requested for an id not on the tape");
  }
  Tensor g(shapes_[node]);
  if (!grads_[node].empty()) g.values = grads_[node];
  return g;
}

Tensor GradientMap::grad(const Tensor& t) const { return grad(t.node); }

bool GradientMap::reached(int node) const {
  return node >= 0 && static_cast<std::size_t>(node) < grads_.size() &&
         !grads_[node].empty();
}

int Tape::push_node(std::vector<std::size_t> shape, BackFn back) {
  nodes_.push_back({std::move(shape), std::move(back)});
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor Tape::make_result(std::vector<std::size_t> shape,
                         std::vector<double> values, BackFn back) {
  Tensor t(std::move(shape), std::move(values));
  t.node = push_node(t.shape, std::move(back));
  check(t);
  return t;
}

void Tape::check(const Tensor& t) const {
  if (check_finite_ && !all_finite(t)) {
    throw ValueError("non-finite values produced by op at node " +
                     std::to_string(t.node));
  }
}

double* Tape::grad_buffer(int node, std::size_t size) {
  auto& g = grads_[node];
  if (g.empty()) g.assign(size, 0.0);
  return g.data();
}

Tensor Tape::leaf(Tensor t) {
  t.node = push_node(t.shape, BackFn{});
  return t;
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape) {
    throw ShapeError(std::string(op) + " shape mismatch: " +
                     shape_to_string(a.shape) + " vs " +
                     shape_to_string(b.shape));
  }
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + " expects a rank-2 tensor, got " +
                     shape_to_string(t.shape));
  }
}

}  // namespace

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  ker::add(a.values.data(), b.values.data(), out.data(), out.size());
  const int pa = a.node, pb = b.node;
  return make_result(a.shape, std::move(out),
                     [pa, pb](Tape& t, const std::vector<double>& g) {
                       if (pa >= 0)
                         ker::axpy(1.0, g.data(),
                                   t.grad_buffer(pa, g.size()), g.size());
                       if (pb >= 0)
                         ker::axpy(1.0, g.data(),
                                   t.grad_buffer(pb, g.size()), g.size());
                     });
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  ker::sub(a.values.data(), b.values.data(), out.data(), out.size());
  const int pa = a.node, pb = b.node;
  return make_result(a.shape, std::move(out),
                     [pa, pb](Tape& t, const std::vector<double>& g) {
                       if (pa >= 0)
                         ker::axpy(1.0, g.data(),
                                   t.grad_buffer(pa, g.size()), g.size());
                       if (pb >= 0)
                         ker::axpy(-1.0, g.data(),
                                   t.grad_buffer(pb, g.size()), g.size());
                     });
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  ker::mul(a.values.data(), b.values.data(), out.data(), out.size());
  const int pa = a.node, pb = b.node;
  auto sa = snapshot(a);
  auto sb = snapshot(b);
  return make_result(
      a.shape, std::move(out),
      [pa, pb, sa, sb](Tape& t, const std::vector<double>& g) {
        if (pa >= 0)
          ker::mul_acc(g.data(), sb->data(), t.grad_buffer(pa, g.size()),
                       g.size());
        if (pb >= 0)
          ker::mul_acc(g.data(), sa->data(), t.grad_buffer(pb, g.size()),
                       g.size());
      });
}

Tensor Tape::scale(double a, const Tensor& x) {
  std::vector<double> out(x.size());
  ker::scale(a, x.values.data(), out.data(), out.size());
  const int px = x.node;
  return make_result(x.shape, std::move(out),
                     [px, a](Tape& t, const std::vector<double>& g) {
                       if (px >= 0)
                         ker::axpy(a, g.data(), t.grad_buffer(px, g.size()),
                                   g.size());
                     });
}

Tensor Tape::add_bias(const Tensor& m, const Tensor& bias) {
  require_rank2(m, "add_bias");
  if (bias.rank() != 1 || bias.shape[0] != m.cols()) {
    throw ShapeError("add_bias shape mismatch: " + shape_to_string(m.shape) +
                     " vs " + shape_to_string(bias.shape));
  }
  const std::size_t rows = m.rows(), cols = m.cols();
  std::vector<double> out(m.size());
  for (std::size_t r = 0; r < rows; ++r) {
    ker::add(m.values.data() + r * cols, bias.values.data(),
             out.data() + r * cols, cols);
  }
  const int pm = m.node, pb = bias.node;
  return make_result(
      m.shape, std::move(out),
      [pm, pb, rows, cols](Tape& t, const std::vector<double>& g) {
        if (pm >= 0)
          ker::axpy(1.0, g.data(), t.grad_buffer(pm, g.size()), g.size());
        if (pb >= 0) {
          double* gb = t.grad_buffer(pb, cols);
          for (std::size_t r = 0; r < rows; ++r) {
            ker::axpy(1.0, g.data() + r * cols, gb, cols);
          }
        }
      });
}

Tensor Tape::relu(const Tensor& x) {
  std::vector<double> out(x.size());
  ker::relu(x.values.data(), out.data(), out.size());
  const int px = x.node;
  auto sx = snapshot(x);
  return make_result(x.shape, std::move(out),
                     [px, sx](Tape& t, const std::vector<double>& g) {
                       if (px >= 0)
                         ker::relu_mask_acc(sx->data(), g.data(),
                                            t.grad_buffer(px, g.size()),
                                            g.size());
                     });
}

Tensor Tape::sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.values[i];
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  const int px = x.node;
  auto so = std::make_shared<const std::vector<double>>(out);
  return make_result(x.shape, std::move(out),
                     [px, so](Tape& t, const std::vector<double>& g) {
                       if (px < 0) return;
                       double* gx = t.grad_buffer(px, g.size());
                       const auto& o = *so;
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         gx[i] += g[i] * o[i] * (1.0 - o[i]);
                       }
                     });
}

Tensor Tape::tanh(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.values[i]);
  const int px = x.node;
  auto so = std::make_shared<const std::vector<double>>(out);
  return make_result(x.shape, std::move(out),
                     [px, so](Tape& t, const std::vector<double>& g) {
                       if (px < 0) return;
                       double* gx = t.grad_buffer(px, g.size());
                       const auto& o = *so;
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         gx[i] += g[i] * (1.0 - o[i] * o[i]);
                       }
                     });
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul shape mismatch: " + shape_to_string(a.shape) +
                     " vs " + shape_to_string(b.shape));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  ker::matmul_nn(a.values.data(), b.values.data(), out.data(), m, k, n);
  const int pa = a.node, pb = b.node;
  auto sa = snapshot(a);
  auto sb = snapshot(b);
  return make_result(
      {m, n}, std::move(out),
      [pa, pb, sa, sb, m, k, n](Tape& t, const std::vector<double>& g) {
        if (pa >= 0) {
          // gA += G * B^T
          ker::matmul_nt(g.data(), sb->data(), t.grad_buffer(pa, m * k), m, n,
                         k, /*acc=*/true);
        }
        if (pb >= 0) {
          // gB += A^T * G
          ker::matmul_tn(sa->data(), g.data(), t.grad_buffer(pb, k * n), k, m,
                         n, /*acc=*/true);
        }
      });
}

Tensor Tape::matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt shape mismatch: " + shape_to_string(a.shape) +
                     " vs " + shape_to_string(b.shape));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  std::vector<double> out(m * n);
  ker::matmul_nt(a.values.data(), b.values.data(), out.data(), m, k, n);
  const int pa = a.node, pb = b.node;
  auto sa = snapshot(a);
  auto sb = snapshot(b);
  return make_result(
      {m, n}, std::move(out),
      [pa, pb, sa, sb, m, k, n](Tape& t, const std::vector<double>& g) {
        if (pa >= 0) {
          // gA += G * B
          ker::matmul_nn(g.data(), sb->data(), t.grad_buffer(pa, m * k), m, n,
                         k, /*acc=*/true);
        }
        if (pb >= 0) {
          // gB += G^T * A
          ker::matmul_tn(g.data(), sa->data(), t.grad_buffer(pb, n * k), n, m,
                         k, /*acc=*/true);
        }
      });
}

Tensor Tape::im2col(const Tensor& input, std::size_t channels,
                    std::size_t width, std::size_t stride, std::size_t batch) {
  require_rank2(input, "im2col");
  if (stride < 1) throw ValueError("im2col stride must be >= 1");
  if (input.rows() != batch * channels) {
    throw ShapeError("im2col expects [batch*channels x time], got " +
                     shape_to_string(input.shape));
  }
  const std::size_t time = input.cols();
  if (time < width) {
    throw ValueError("conv1d input too short: time=" + std::to_string(time) +
                     " < width=" + std::to_string(width) +
                     " (minimum input length " + std::to_string(width) + ")");
  }
  const std::size_t tout = (time - width) / stride + 1;
  const std::size_t ccols = channels * width;
  std::vector<double> out(batch * tout * ccols);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < tout; ++t) {
      double* row = out.data() + (b * tout + t) * ccols;
      for (std::size_t c = 0; c < channels; ++c) {
        const double* src =
            input.values.data() + (b * channels + c) * time + t * stride;
        std::memcpy(row + c * width, src, width * sizeof(double));
      }
    }
  }
  const int px = input.node;
  const std::size_t in_rows = input.rows();
  return make_result(
      {batch * tout, ccols}, std::move(out),
      [px, batch, channels, width, stride, time, tout, ccols, in_rows](
          Tape& tp, const std::vector<double>& g) {
        if (px < 0) return;
        double* gx = tp.grad_buffer(px, in_rows * time);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t t = 0; t < tout; ++t) {
            const double* grow = g.data() + (b * tout + t) * ccols;
            for (std::size_t c = 0; c < channels; ++c) {
              double* dst = gx + (b * channels + c) * time + t * stride;
              ker::axpy(1.0, grow + c * width, dst, width);
            }
          }
        }
      });
}

Tensor Tape::permute(const Tensor& x, std::vector<std::size_t> perm,
                     std::vector<std::size_t> out_shape) {
  if (perm.size() != x.size() || shape_product(out_shape) != x.size()) {
    throw ShapeError("permute index count does not match tensor size");
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values[perm[i]];
  const int px = x.node;
  auto sp = std::make_shared<const std::vector<std::size_t>>(std::move(perm));
  return make_result(std::move(out_shape), std::move(out),
                     [px, sp](Tape& t, const std::vector<double>& g) {
                       if (px < 0) return;
                       double* gx = t.grad_buffer(px, g.size());
                       const auto& p = *sp;
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         gx[p[i]] += g[i];
                       }
                     });
}

Tensor Tape::frames_to_channels(const Tensor& x, std::size_t batch) {
  require_rank2(x, "frames_to_channels");
  const std::size_t rows = x.rows(), c = x.cols();
  if (rows % batch != 0) {
    throw ShapeError("frames_to_channels: rows not divisible by batch");
  }
  const std::size_t time = rows / batch;
  std::vector<std::size_t> perm(x.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t t = 0; t < time; ++t) {
        perm[(b * c + ch) * time + t] = (b * time + t) * c + ch;
      }
    }
  }
  return permute(x, std::move(perm), {batch * c, time});
}

Tensor Tape::channels_to_frames(const Tensor& x, std::size_t batch) {
  require_rank2(x, "channels_to_frames");
  const std::size_t rows = x.rows(), time = x.cols();
  if (rows % batch != 0) {
    throw ShapeError("channels_to_frames: rows not divisible by batch");
  }
  const std::size_t c = rows / batch;
  std::vector<std::size_t> perm(x.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < time; ++t) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        perm[(b * time + t) * c + ch] = (b * c + ch) * time + t;
      }
    }
  }
  return permute(x, std::move(perm), {batch * time, c});
}

Tensor Tape::conv1d(const Tensor& input, const Tensor& kernel,
                    std::size_t stride, std::size_t batch) {
  if (kernel.rank() != 3) {
    throw ShapeError("conv1d kernel must be [out x in x width], got " +
                     shape_to_string(kernel.shape));
  }
  const std::size_t cout = kernel.shape[0], cin = kernel.shape[1],
                    width = kernel.shape[2];
  if (input.rank() != 2 || input.rows() != batch * cin) {
    throw ShapeError("conv1d input/kernel mismatch: input " +
                     shape_to_string(input.shape) + " vs kernel " +
                     shape_to_string(kernel.shape));
  }
  if (stride < 1) throw ValueError("conv1d stride must be >= 1");
  Tensor cols = im2col(input, cin, width, stride, batch);
  Tensor kmat = kernel.reshaped({cout, cin * width});
  Tensor framed = matmul_nt(cols, kmat);  // [batch*time' x out]
  return frames_to_channels(framed, batch);
}

Tensor Tape::gather_rows(const Tensor& x, std::vector<std::size_t> idx) {
  require_rank2(x, "gather_rows");
  const std::size_t c = x.cols();
  std::vector<double> out(idx.size() * c);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= x.rows()) {
      throw ValueError("gather_rows index out of range");
    }
    std::memcpy(out.data() + i * c, x.values.data() + idx[i] * c,
                c * sizeof(double));
  }
  const int px = x.node;
  const std::size_t xrows = x.rows();
  auto si = std::make_shared<const std::vector<std::size_t>>(std::move(idx));
  return make_result({si->size(), c}, std::move(out),
                     [px, si, c, xrows](Tape& t, const std::vector<double>& g) {
                       if (px < 0) return;
                       double* gx = t.grad_buffer(px, xrows * c);
                       const auto& ix = *si;
                       for (std::size_t i = 0; i < ix.size(); ++i) {
                         ker::axpy(1.0, g.data() + i * c, gx + ix[i] * c, c);
                       }
                     });
}

Tensor Tape::concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ValueError("concat_rows of no tensors");
  const std::size_t c = parts[0].cols();
  std::size_t rows = 0;
  for (const Tensor& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.cols() != c) {
      throw ShapeError("concat_rows column mismatch: " +
                       shape_to_string(parts[0].shape) + " vs " +
                       shape_to_string(p.shape));
    }
    rows += p.rows();
  }
  std::vector<double> out;
  out.reserve(rows * c);
  std::vector<int> pids(parts.size());
  std::vector<std::size_t> sizes(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out.insert(out.end(), parts[i].values.begin(), parts[i].values.end());
    pids[i] = parts[i].node;
    sizes[i] = parts[i].size();
  }
  return make_result(
      {rows, c}, std::move(out),
      [pids, sizes](Tape& t, const std::vector<double>& g) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < pids.size(); ++i) {
          if (pids[i] >= 0) {
            ker::axpy(1.0, g.data() + off, t.grad_buffer(pids[i], sizes[i]),
                      sizes[i]);
          }
          off += sizes[i];
        }
      });
}

Tensor Tape::slice_cols(const Tensor& x, std::size_t c0, std::size_t c1) {
  require_rank2(x, "slice_cols");
  if (c0 >= c1 || c1 > x.cols()) {
    throw ShapeError("slice_cols range [" + std::to_string(c0) + ", " +
                     std::to_string(c1) + ") invalid for " +
                     shape_to_string(x.shape));
  }
  const std::size_t rows = x.rows(), cols = x.cols(), w = c1 - c0;
  std::vector<double> out(rows * w);
  for (std::size_t r = 0; r < rows; ++r) {
    std::memcpy(out.data() + r * w, x.values.data() + r * cols + c0,
                w * sizeof(double));
  }
  const int px = x.node;
  return make_result(
      {rows, w}, std::move(out),
      [px, rows, cols, c0, w](Tape& t, const std::vector<double>& g) {
        if (px < 0) return;
        double* gx = t.grad_buffer(px, rows * cols);
        for (std::size_t r = 0; r < rows; ++r) {
          ker::axpy(1.0, g.data() + r * w, gx + r * cols + c0, w);
        }
      });
}

Tensor Tape::row_block_dot(const Tensor& a, const Tensor& b,
                           std::size_t block) {
  require_rank2(a, "row_block_dot");
  require_rank2(b, "row_block_dot");
  if (a.cols() != b.cols() || b.rows() != a.rows() * block) {
    throw ShapeError("row_block_dot shape mismatch: " +
                     shape_to_string(a.shape) + " vs " +
                     shape_to_string(b.shape) + " with block " +
                     std::to_string(block));
  }
  const std::size_t rows = a.rows(), d = a.cols();
  std::vector<double> out(rows * block);
  ker::row_block_dot(a.values.data(), b.values.data(), out.data(), rows, block,
                     d);
  const int pa = a.node, pb = b.node;
  auto sa = snapshot(a);
  auto sb = snapshot(b);
  return make_result(
      {rows, block}, std::move(out),
      [pa, pb, sa, sb, rows, block, d](Tape& t, const std::vector<double>& g) {
        if (pa >= 0) {
          ker::row_block_dot_back_a(sb->data(), g.data(),
                                    t.grad_buffer(pa, rows * d), rows, block,
                                    d);
        }
        if (pb >= 0) {
          ker::row_block_dot_back_b(sa->data(), g.data(),
                                    t.grad_buffer(pb, rows * block * d), rows,
                                    block, d);
        }
      });
}

Tensor Tape::sum(const Tensor& x) {
  const double s = ker::reduce_sum(x.values.data(), x.size());
  const int px = x.node;
  const std::size_t n = x.size();
  return make_result({}, {s}, [px, n](Tape& t, const std::vector<double>& g) {
    if (px < 0) return;
    double* gx = t.grad_buffer(px, n);
    for (std::size_t i = 0; i < n; ++i) gx[i] += g[0];
  });
}

Tensor Tape::mean(const Tensor& x) {
  if (x.size() == 0) throw ValueError("mean of empty tensor");
  const double s = ker::reduce_sum(x.values.data(), x.size());
  const int px = x.node;
  const std::size_t n = x.size();
  return make_result({}, {s / static_cast<double>(n)},
                     [px, n](Tape& t, const std::vector<double>& g) {
                       if (px < 0) return;
                       double* gx = t.grad_buffer(px, n);
                       const double gi = g[0] / static_cast<double>(n);
                       for (std::size_t i = 0; i < n; ++i) gx[i] += gi;
                     });
}

Tensor Tape::logsumexp(const Tensor& v) {
  if (v.size() == 0) throw ValueError("logsumexp of empty input");
  const std::size_t n = v.size();
  const double m = ker::reduce_max(v.values.data(), n);
  auto soft = std::make_shared<std::vector<double>>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    (*soft)[i] = std::exp(v.values[i] - m);
    total += (*soft)[i];
  }
  for (std::size_t i = 0; i < n; ++i) (*soft)[i] /= total;
  const double lse = m + std::log(total);
  const int px = v.node;
  return make_result({}, {lse},
                     [px, soft](Tape& t, const std::vector<double>& g) {
                       if (px < 0) return;
                       double* gx = t.grad_buffer(px, soft->size());
                       ker::axpy(g[0], soft->data(), gx, soft->size());
                     });
}

Tensor Tape::cross_entropy_rows(const Tensor& scores,
                                const std::vector<std::size_t>& positives,
                                Reduction reduction) {
  require_rank2(scores, "cross_entropy_rows");
  const std::size_t rows = scores.rows(), n = scores.cols();
  if (positives.size() != rows) {
    throw ShapeError("cross_entropy_rows: one positive index per row");
  }
  auto probs = std::make_shared<std::vector<double>>(rows * n);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (positives[r] >= n) {
      throw ValueError("cross_entropy_rows positive index out of range");
    }
    const double* srow = scores.values.data() + r * n;
    double* prow = probs->data() + r * n;
    const double m = ker::reduce_max(srow, n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      prow[j] = std::exp(srow[j] - m);
      z += prow[j];
    }
    for (std::size_t j = 0; j < n; ++j) prow[j] /= z;
    total += (m + std::log(z)) - srow[positives[r]];
  }
  const double w =
      reduction == Reduction::kMean ? 1.0 / static_cast<double>(rows) : 1.0;
  const int ps = scores.node;
  auto pos = std::make_shared<const std::vector<std::size_t>>(positives);
  return make_result(
      {}, {total * w},
      [ps, probs, pos, rows, n, w](Tape& t, const std::vector<double>& g) {
        if (ps < 0) return;
        double* gs = t.grad_buffer(ps, rows * n);
        const double gw = g[0] * w;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* prow = probs->data() + r * n;
          double* grow = gs + r * n;
          ker::axpy(gw, prow, grow, n);
          grow[(*pos)[r]] -= gw;
        }
      });
}

Tensor Tape::gru_step(const Tensor& h, const Tensor& x, const GruWeights& w) {
  const bool vector_in = h.rank() == 1;
  const Tensor hb = vector_in ? h.reshaped({1, h.shape[0]}) : h;
  const Tensor xb = x.rank() == 1 ? x.reshaped({1, x.shape[0]}) : x;
  require_rank2(hb, "gru_step");
  require_rank2(xb, "gru_step");
  const std::size_t d = w.hidden_dim();
  if (hb.cols() != d || xb.cols() != w.input_dim() ||
      hb.rows() != xb.rows() || w.input_proj.rows() != 3 * d ||
      w.hidden_proj.rows() != 2 * d || w.hidden_proj.cols() != d ||
      w.bias.size() != 3 * d) {
    throw ShapeError("gru_step dimension mismatch: h " +
                     shape_to_string(h.shape) + ", x " +
                     shape_to_string(x.shape) + ", hidden dim " +
                     std::to_string(d));
  }
  Tensor xw = add_bias(matmul_nt(xb, w.input_proj), w.bias);  // [B x 3d]
  Tensor hu = matmul_nt(hb, w.hidden_proj);                   // [B x 2d]
  Tensor reset = sigmoid(add(slice_cols(xw, 0, d), slice_cols(hu, 0, d)));
  Tensor update =
      sigmoid(add(slice_cols(xw, d, 2 * d), slice_cols(hu, d, 2 * d)));
  Tensor candidate = tanh(add(slice_cols(xw, 2 * d, 3 * d),
                              matmul_nt(mul(reset, hb), w.candidate_proj)));
  Tensor out = add(mul(update, hb), sub(candidate, mul(update, candidate)));
  return vector_in ? out.reshaped({d}) : out;
}

GradientMap Tape::backward(const Tensor& loss) {
  if (loss.node < 0 || static_cast<std::size_t>(loss.node) >= nodes_.size()) {
    throw ValueError("backward: loss is not on this tape");
  }
  if (loss.size() != 1) {
    throw ValueError("backward requires a scalar loss, got shape " +
                     shape_to_string(loss.shape));
  }
  grads_.assign(nodes_.size(), {});
  grad_buffer(loss.node, 1)[0] = 1.0;
  for (int id = loss.node; id >= 0; --id) {
    if (grads_[id].empty()) continue;
    if (nodes_[id].back) nodes_[id].back(*this, grads_[id]);
  }
  std::vector<std::vector<std::size_t>> shapes(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) shapes[i] = nodes_[i].shape;
  return GradientMap(std::move(grads_), std::move(shapes));
}

}  // namespace cpc
