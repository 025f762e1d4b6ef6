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

// Scalar reference kernels. These are the ground truth the SIMD variants are
// equivalence-tested against; keep them simple and obviously correct.

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cpc/kernels.hpp"

namespace cpc::kernels {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double a, const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

void add_scalar(const double* x, const double* y, double* out,
                std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void sub_scalar(const double* x, const double* y, double* out,
                std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - y[i];
}

void mul_scalar(const double* x, const double* y, double* out,
                std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void mul_acc_scalar(const double* x, const double* y, double* out,
                    std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += x[i] * y[i];
}

double reduce_max_scalar(const double* x, std::size_t n) {
  double m = -HUGE_VAL;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

double reduce_sum_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

void relu_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask_acc_scalar(const double* x, const double* g, double* out,
                          std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > 0.0) out[i] += g[i];
  }
}

// Register-the-row (saxpy) form: for each a[i][l], stream b row l into c
// row i. Contiguous access on both b and c.
void matmul_nn_scalar(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n, bool acc) {
  if (!acc) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      axpy_scalar(arow[l], b + l * n, crow, n);
    }
  }
}

void matmul_nt_scalar(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n, bool acc) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = dot_scalar(arow, b + j * k, k);
      crow[j] = acc ? crow[j] + v : v;
    }
  }
}

void matmul_tn_scalar(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n, bool acc) {
  if (!acc) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t l = 0; l < k; ++l) {
    const double* arow = a + l * m;
    const double* brow = b + l * n;
    for (std::size_t i = 0; i < m; ++i) {
      axpy_scalar(arow[i], brow, c + i * n, n);
    }
  }
}

void row_block_dot_scalar(const double* a, const double* b, double* s,
                          std::size_t rows, std::size_t bn, std::size_t d) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* arow = a + i * d;
    for (std::size_t j = 0; j < bn; ++j) {
      s[i * bn + j] = dot_scalar(arow, b + (i * bn + j) * d, d);
    }
  }
}

void row_block_dot_back_a_scalar(const double* b, const double* gs,
                                 double* ga, std::size_t rows, std::size_t bn,
                                 std::size_t d) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* garow = ga + i * d;
    for (std::size_t j = 0; j < bn; ++j) {
      axpy_scalar(gs[i * bn + j], b + (i * bn + j) * d, garow, d);
    }
  }
}

void row_block_dot_back_b_scalar(const double* a, const double* gs,
                                 double* gb, std::size_t rows, std::size_t bn,
                                 std::size_t d) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* arow = a + i * d;
    for (std::size_t j = 0; j < bn; ++j) {
      axpy_scalar(gs[i * bn + j], arow, gb + (i * bn + j) * d, d);
    }
  }
}

void adam_update_scalar(double* p, const double* g, double* m, double* v,
                        std::size_t n, double lr, double beta1, double beta2,
                        double eps, double bc1, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] * bc1;
    const double vhat = v[i] * bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const Backend& scalar_backend() {
  static const Backend backend = {
      "scalar",
      dot_scalar,
      axpy_scalar,
      scale_scalar,
      add_scalar,
      sub_scalar,
      mul_scalar,
      mul_acc_scalar,
      reduce_max_scalar,
      reduce_sum_scalar,
      relu_scalar,
      relu_mask_acc_scalar,
      matmul_nn_scalar,
      matmul_nt_scalar,
      matmul_tn_scalar,
      row_block_dot_scalar,
      row_block_dot_back_a_scalar,
      row_block_dot_back_b_scalar,
      adam_update_scalar,
  };
  return backend;
}

}  // namespace cpc::kernels
