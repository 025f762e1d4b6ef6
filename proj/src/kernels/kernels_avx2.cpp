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

// AVX2+FMA kernels (4 doubles per vector). This translation unit is the only
// one compiled with -mavx2 -mfma; dispatch.cpp guards selection with CPUID,
// so nothing here runs on machines without the extensions.

#include "cpc/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace cpc::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_max_sd(lo, shuf));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                           _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                           acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double a, const double* x, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = a * x[i];
}

void add_avx2(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void sub_avx2(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        out + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] - y[i];
}

void mul_avx2(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void mul_acc_avx2(const double* x, const double* y, double* out,
                  std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vo = _mm256_loadu_pd(out + i);
    vo = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), vo);
    _mm256_storeu_pd(out + i, vo);
  }
  for (; i < n; ++i) out[i] += x[i] * y[i];
}

double reduce_max_avx2(const double* x, std::size_t n) {
  double m = -HUGE_VAL;
  std::size_t i = 0;
  if (n >= 4) {
    __m256d vm = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4) {
      vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
    }
    m = hmax(vm);
  }
  for (; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

double reduce_sum_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

void relu_avx2(const double* x, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask_acc_avx2(const double* x, const double* g, double* out,
                        std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d add = _mm256_and_pd(mask, _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), add));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) out[i] += g[i];
  }
}

void matmul_nn_avx2(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc) {
  if (!acc) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    std::size_t l = 0;
    // Two b-rows per pass keeps the FMA ports busier than a plain axpy.
    for (; l + 2 <= k; l += 2) {
      const __m256d va0 = _mm256_set1_pd(arow[l]);
      const __m256d va1 = _mm256_set1_pd(arow[l + 1]);
      const double* b0 = b + l * n;
      const double* b1 = b0 + n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d vc = _mm256_loadu_pd(crow + j);
        vc = _mm256_fmadd_pd(va0, _mm256_loadu_pd(b0 + j), vc);
        vc = _mm256_fmadd_pd(va1, _mm256_loadu_pd(b1 + j), vc);
        _mm256_storeu_pd(crow + j, vc);
      }
      for (; j < n; ++j) crow[j] += arow[l] * b0[j] + arow[l + 1] * b1[j];
    }
    for (; l < k; ++l) axpy_avx2(arow[l], b + l * n, crow, n);
  }
}

void matmul_nt_avx2(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = dot_avx2(arow, b + j * k, k);
      crow[j] = acc ? crow[j] + v : v;
    }
  }
}

void matmul_tn_avx2(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc) {
  if (!acc) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t l = 0; l < k; ++l) {
    const double* arow = a + l * m;
    const double* brow = b + l * n;
    for (std::size_t i = 0; i < m; ++i) {
      axpy_avx2(arow[i], brow, c + i * n, n);
    }
  }
}

void row_block_dot_avx2(const double* a, const double* b, double* s,
                        std::size_t rows, std::size_t bn, std::size_t d) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* arow = a + i * d;
    for (std::size_t j = 0; j < bn; ++j) {
      s[i * bn + j] = dot_avx2(arow, b + (i * bn + j) * d, d);
    }
  }
}

void row_block_dot_back_a_avx2(const double* b, const double* gs, double* ga,
                               std::size_t rows, std::size_t bn,
                               std::size_t d) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* garow = ga + i * d;
    for (std::size_t j = 0; j < bn; ++j) {
      axpy_avx2(gs[i * bn + j], b + (i * bn + j) * d, garow, d);
    }
  }
}

void row_block_dot_back_b_avx2(const double* a, const double* gs, double* gb,
                               std::size_t rows, std::size_t bn,
                               std::size_t d) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* arow = a + i * d;
    for (std::size_t j = 0; j < bn; ++j) {
      axpy_avx2(gs[i * bn + j], arow, gb + (i * bn + j) * d, d);
    }
  }
}

void adam_update_avx2(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bc1, double bc2) {
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb1c = _mm256_set1_pd(1.0 - beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vb2c = _mm256_set1_pd(1.0 - beta2);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vbc1 = _mm256_set1_pd(bc1);
  const __m256d vbc2 = _mm256_set1_pd(bc2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vg = _mm256_loadu_pd(g + i);
    __m256d vm = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    vm = _mm256_fmadd_pd(vb1c, vg, _mm256_mul_pd(vb1, vm));
    vv = _mm256_fmadd_pd(vb2c, _mm256_mul_pd(vg, vg), _mm256_mul_pd(vb2, vv));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_mul_pd(vm, vbc1);
    const __m256d vhat = _mm256_mul_pd(vv, vbc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] * bc1) / (std::sqrt(v[i] * bc2) + eps);
  }
}

}  // namespace

const Backend* avx2_backend() {
  static const Backend backend = {
      "avx2",
      dot_avx2,
      axpy_avx2,
      scale_avx2,
      add_avx2,
      sub_avx2,
      mul_avx2,
      mul_acc_avx2,
      reduce_max_avx2,
      reduce_sum_avx2,
      relu_avx2,
      relu_mask_acc_avx2,
      matmul_nn_avx2,
      matmul_nt_avx2,
      matmul_tn_avx2,
      row_block_dot_avx2,
      row_block_dot_back_a_avx2,
      row_block_dot_back_b_avx2,
      adam_update_avx2,
  };
  return &backend;
}

}  // namespace cpc::kernels

#else  // !(__AVX2__ && __FMA__)

namespace cpc::kernels {

const Backend* avx2_backend() { return nullptr; }

}  // namespace cpc::kernels

#endif
