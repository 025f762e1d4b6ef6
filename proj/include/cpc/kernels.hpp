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

#ifndef CPC_KERNELS_HPP_
#define CPC_KERNELS_HPP_

#include <cstddef>
#include <string>
#include <vector>

namespace cpc::kernels {

// Double-precision arithmetic kernels behind every hot loop (matmul, conv
// im2col products, gate math, Adam). Two implementations share this table:
// a scalar reference and an AVX2+FMA variant. The active one is picked at
// load time from CPUID, overridable with CPC_KERNELS=scalar|avx2.
//
// Matrices are row-major. All `acc` flags mean "add into the output instead
// of overwriting it".
struct Backend {
  const char* name;

  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // out = a * x
  void (*scale)(double a, const double* x, double* out, std::size_t n);
  void (*add)(const double* x, const double* y, double* out, std::size_t n);
  void (*sub)(const double* x, const double* y, double* out, std::size_t n);
  void (*mul)(const double* x, const double* y, double* out, std::size_t n);
  // out += x .* y
  void (*mul_acc)(const double* x, const double* y, double* out,
                  std::size_t n);
  double (*reduce_max)(const double* x, std::size_t n);
  double (*reduce_sum)(const double* x, std::size_t n);
  void (*relu)(const double* x, double* out, std::size_t n);
  // out += g .* (x > 0)
  void (*relu_mask_acc)(const double* x, const double* g, double* out,
                        std::size_t n);

  // c[m x n] = a[m x k] * b[k x n]
  void (*matmul_nn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc);
  // c[m x n] = a[m x k] * b[n x k]^T
  void (*matmul_nt)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc);
  // c[m x n] = a[k x m]^T * b[k x n]
  void (*matmul_tn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc);

  // s[i*bn + j] = dot(a row i, b row i*bn + j); a is [rows x d], b is
  // [rows*bn x d]. Scores one prediction row against its own candidate block.
  void (*row_block_dot)(const double* a, const double* b, double* s,
                        std::size_t rows, std::size_t bn, std::size_t d);
  // ga row i += sum_j gs[i,j] * b row (i*bn+j)
  void (*row_block_dot_back_a)(const double* b, const double* gs, double* ga,
                               std::size_t rows, std::size_t bn,
                               std::size_t d);
  // gb row (i*bn+j) += gs[i,j] * a row i
  void (*row_block_dot_back_b)(const double* a, const double* gs, double* gb,
                               std::size_t rows, std::size_t bn,
                               std::size_t d);

  // In-place Adam update with precomputed bias corrections
  // bc1 = 1/(1-beta1^t), bc2 = 1/(1-beta2^t).
  void (*adam_update)(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bc1, double bc2);
};

const Backend& scalar_backend();

/// Null when the binary was built without AVX2 support.
const Backend* avx2_backend();

/// Currently selected backend.
const Backend& active();

/// All backends usable on this machine.
std::vector<const Backend*> available();

/// Selects a backend by name; throws ValueError for unknown/unusable names.
void set_active(const std::string& name);

/// True if the running CPU can execute the AVX2+FMA variant.
bool cpu_supports_avx2();

// Convenience forwarders through the active backend.
inline double dot(const double* x, const double* y, std::size_t n) {
  return active().dot(x, y, n);
}
inline void axpy(double a, const double* x, double* y, std::size_t n) {
  active().axpy(a, x, y, n);
}
inline void scale(double a, const double* x, double* out, std::size_t n) {
  active().scale(a, x, out, n);
}
inline void add(const double* x, const double* y, double* out,
                std::size_t n) {
  active().add(x, y, out, n);
}
inline void sub(const double* x, const double* y, double* out,
                std::size_t n) {
  active().sub(x, y, out, n);
}
inline void mul(const double* x, const double* y, double* out,
                std::size_t n) {
  active().mul(x, y, out, n);
}
inline void mul_acc(const double* x, const double* y, double* out,
                    std::size_t n) {
  active().mul_acc(x, y, out, n);
}
inline double reduce_max(const double* x, std::size_t n) {
  return active().reduce_max(x, n);
}
inline double reduce_sum(const double* x, std::size_t n) {
  return active().reduce_sum(x, n);
}
inline void relu(const double* x, double* out, std::size_t n) {
  active().relu(x, out, n);
}
inline void relu_mask_acc(const double* x, const double* g, double* out,
                          std::size_t n) {
  active().relu_mask_acc(x, g, out, n);
}
inline void matmul_nn(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n,
                      bool acc = false) {
  active().matmul_nn(a, b, c, m, k, n, acc);
}
inline void matmul_nt(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n,
                      bool acc = false) {
  active().matmul_nt(a, b, c, m, k, n, acc);
}
inline void matmul_tn(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n,
                      bool acc = false) {
  active().matmul_tn(a, b, c, m, k, n, acc);
}
inline void row_block_dot(const double* a, const double* b, double* s,
                          std::size_t rows, std::size_t bn, std::size_t d) {
  active().row_block_dot(a, b, s, rows, bn, d);
}
inline void row_block_dot_back_a(const double* b, const double* gs,
                                 double* ga, std::size_t rows, std::size_t bn,
                                 std::size_t d) {
  active().row_block_dot_back_a(b, gs, ga, rows, bn, d);
}
inline void row_block_dot_back_b(const double* a, const double* gs,
                                 double* gb, std::size_t rows, std::size_t bn,
                                 std::size_t d) {
  active().row_block_dot_back_b(a, gs, gb, rows, bn, d);
}
inline void adam_update(double* p, const double* g, double* m, double* v,
                        std::size_t n, double lr, double beta1, double beta2,
                        double eps, double bc1, double bc2) {
  active().adam_update(p, g, m, v, n, lr, beta1, beta2, eps, bc1, bc2);
}

/// Swaps the active backend for a scope; used by equivalence tests.
class ScopedBackend {
 public:
  explicit ScopedBackend(const std::string& name);
  ~ScopedBackend();
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  const Backend* saved_;
};

}  // namespace cpc::kernels

#endif  // CPC_KERNELS_HPP_
