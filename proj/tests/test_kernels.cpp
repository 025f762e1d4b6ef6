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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "cpc/errors.hpp"
#include "cpc/kernels.hpp"
#include "cpc/rng.hpp"

namespace ker = cpc::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, cpc::Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

// FMA and lane-parallel accumulation reorder roundings, so SIMD vs scalar
// agreement is tight-tolerance, not bitwise.
void check_close(const std::vector<double>& a, const std::vector<double>& b,
                 double tol = 5e-13) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom =
        std::max({std::fabs(a[i]), std::fabs(b[i]), 1.0});
    CHECK(std::fabs(a[i] - b[i]) / denom < tol);
  }
}

bool have_avx2() { return ker::avx2_backend() != nullptr && ker::cpu_supports_avx2(); }

}  // namespace

TEST_CASE("scalar kernel semantics") {
  const ker::Backend& b = ker::scalar_backend();
  std::vector<double> x = {1.0, 2.0, 3.0};
  std::vector<double> y = {4.0, -5.0, 6.0};
  CHECK(b.dot(x.data(), y.data(), 3) == doctest::Approx(12.0));
  CHECK(b.reduce_sum(x.data(), 3) == doctest::Approx(6.0));
  CHECK(b.reduce_max(y.data(), 3) == doctest::Approx(6.0));

  std::vector<double> out(3, 0.0);
  b.relu(y.data(), out.data(), 3);
  CHECK(out == std::vector<double>{4.0, 0.0, 6.0});

  b.axpy(2.0, x.data(), out.data(), 3);
  CHECK(out == std::vector<double>{6.0, 4.0, 12.0});
}

TEST_CASE("matmul identity and hand examples") {
  // identity(2x2) * [[3],[4]] = [[3],[4]]
  std::vector<double> eye = {1.0, 0.0, 0.0, 1.0};
  std::vector<double> v = {3.0, 4.0};
  std::vector<double> out(2, -1.0);
  ker::matmul_nn(eye.data(), v.data(), out.data(), 2, 2, 1);
  CHECK(out == std::vector<double>{3.0, 4.0});

  // [[1,2]] * [[3],[4]] = [[11]]
  std::vector<double> a = {1.0, 2.0};
  std::vector<double> c(1, 0.0);
  ker::matmul_nn(a.data(), v.data(), c.data(), 1, 2, 1);
  CHECK(c[0] == doctest::Approx(11.0));
}

TEST_CASE("matmul layout variants agree with the nn form") {
  cpc::Rng rng(7);
  const std::size_t m = 5, k = 7, n = 3;
  std::vector<double> a = random_vec(m * k, rng);
  std::vector<double> bmat = random_vec(k * n, rng);

  std::vector<double> c_nn(m * n);
  ker::scalar_backend().matmul_nn(a.data(), bmat.data(), c_nn.data(), m, k, n,
                                  false);

  // b transposed -> nt
  std::vector<double> bt(n * k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + i] = bmat[i * n + j];
  std::vector<double> c_nt(m * n);
  ker::scalar_backend().matmul_nt(a.data(), bt.data(), c_nt.data(), m, k, n,
                                  false);
  check_close(c_nn, c_nt, 1e-12);

  // a transposed -> tn
  std::vector<double> at(k * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) at[j * m + i] = a[i * k + j];
  std::vector<double> c_tn(m * n);
  ker::scalar_backend().matmul_tn(at.data(), bmat.data(), c_tn.data(), m, k, n,
                                  false);
  check_close(c_nn, c_tn, 1e-12);
}

TEST_CASE("avx2 backend matches scalar reference") {
  if (!have_avx2()) {
    MESSAGE("AVX2 unavailable on this machine; skipping equivalence");
    return;
  }
  const ker::Backend& s = ker::scalar_backend();
  const ker::Backend& a = *ker::avx2_backend();
  cpc::Rng rng(42);

  // Sizes straddle the 4-lane width, including tails and tiny inputs.
  for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 33u, 64u, 129u}) {
    std::vector<double> x = random_vec(n, rng);
    std::vector<double> y = random_vec(n, rng);

    CHECK(std::fabs(s.dot(x.data(), y.data(), n) -
                    a.dot(x.data(), y.data(), n)) < 1e-12 * (1.0 + n));
    CHECK(s.reduce_max(x.data(), n) == a.reduce_max(x.data(), n));
    CHECK(std::fabs(s.reduce_sum(x.data(), n) - a.reduce_sum(x.data(), n)) <
          1e-12 * (1.0 + n));

    std::vector<double> o1(n), o2(n);
    s.add(x.data(), y.data(), o1.data(), n);
    a.add(x.data(), y.data(), o2.data(), n);
    check_close(o1, o2);
    s.sub(x.data(), y.data(), o1.data(), n);
    a.sub(x.data(), y.data(), o2.data(), n);
    check_close(o1, o2);
    s.mul(x.data(), y.data(), o1.data(), n);
    a.mul(x.data(), y.data(), o2.data(), n);
    check_close(o1, o2);
    s.relu(x.data(), o1.data(), n);
    a.relu(x.data(), o2.data(), n);
    check_close(o1, o2);
    s.scale(1.7, x.data(), o1.data(), n);
    a.scale(1.7, x.data(), o2.data(), n);
    check_close(o1, o2);

    std::vector<double> acc1 = random_vec(n, rng);
    std::vector<double> acc2 = acc1;
    s.axpy(-0.3, x.data(), acc1.data(), n);
    a.axpy(-0.3, x.data(), acc2.data(), n);
    check_close(acc1, acc2);
    s.mul_acc(x.data(), y.data(), acc1.data(), n);
    a.mul_acc(x.data(), y.data(), acc2.data(), n);
    check_close(acc1, acc2);
    s.relu_mask_acc(x.data(), y.data(), acc1.data(), n);
    a.relu_mask_acc(x.data(), y.data(), acc2.data(), n);
    check_close(acc1, acc2);
  }
}

TEST_CASE("avx2 matmul family matches scalar") {
  if (!have_avx2()) return;
  const ker::Backend& s = ker::scalar_backend();
  const ker::Backend& a = *ker::avx2_backend();
  cpc::Rng rng(43);
  for (auto [m, k, n] : std::vector<std::array<std::size_t, 3>>{
           {1, 1, 1}, {3, 5, 2}, {8, 16, 8}, {7, 13, 9}, {32, 64, 33}}) {
    std::vector<double> av = random_vec(m * k, rng);
    std::vector<double> bv = random_vec(k * n, rng);
    std::vector<double> bt = random_vec(n * k, rng);
    std::vector<double> at = random_vec(k * m, rng);
    std::vector<double> c1(m * n), c2(m * n);

    s.matmul_nn(av.data(), bv.data(), c1.data(), m, k, n, false);
    a.matmul_nn(av.data(), bv.data(), c2.data(), m, k, n, false);
    check_close(c1, c2);

    s.matmul_nt(av.data(), bt.data(), c1.data(), m, k, n, false);
    a.matmul_nt(av.data(), bt.data(), c2.data(), m, k, n, false);
    check_close(c1, c2);

    s.matmul_tn(at.data(), bv.data(), c1.data(), m, k, n, false);
    a.matmul_tn(at.data(), bv.data(), c2.data(), m, k, n, false);
    check_close(c1, c2);

    // accumulate variants start from the same nonzero c
    std::vector<double> base = random_vec(m * n, rng);
    c1 = base;
    c2 = base;
    s.matmul_nn(av.data(), bv.data(), c1.data(), m, k, n, true);
    a.matmul_nn(av.data(), bv.data(), c2.data(), m, k, n, true);
    check_close(c1, c2);
  }
}

TEST_CASE("avx2 row_block_dot and adam match scalar") {
  if (!have_avx2()) return;
  const ker::Backend& s = ker::scalar_backend();
  const ker::Backend& a = *ker::avx2_backend();
  cpc::Rng rng(44);
  const std::size_t rows = 9, bn = 5, d = 19;
  std::vector<double> av = random_vec(rows * d, rng);
  std::vector<double> bv = random_vec(rows * bn * d, rng);
  std::vector<double> s1(rows * bn), s2(rows * bn);
  s.row_block_dot(av.data(), bv.data(), s1.data(), rows, bn, d);
  a.row_block_dot(av.data(), bv.data(), s2.data(), rows, bn, d);
  check_close(s1, s2);

  std::vector<double> gs = random_vec(rows * bn, rng);
  std::vector<double> ga1(rows * d, 0.0), ga2(rows * d, 0.0);
  s.row_block_dot_back_a(bv.data(), gs.data(), ga1.data(), rows, bn, d);
  a.row_block_dot_back_a(bv.data(), gs.data(), ga2.data(), rows, bn, d);
  check_close(ga1, ga2);

  std::vector<double> gb1(rows * bn * d, 0.0), gb2(rows * bn * d, 0.0);
  s.row_block_dot_back_b(av.data(), gs.data(), gb1.data(), rows, bn, d);
  a.row_block_dot_back_b(av.data(), gs.data(), gb2.data(), rows, bn, d);
  check_close(gb1, gb2);

  // Adam: identical states stay close across both paths for many steps.
  const std::size_t n = 13;
  std::vector<double> p1 = random_vec(n, rng);
  std::vector<double> p2 = p1;
  std::vector<double> m1(n, 0.0), v1(n, 0.0), m2(n, 0.0), v2(n, 0.0);
  for (int step = 1; step <= 50; ++step) {
    std::vector<double> g = random_vec(n, rng);
    const double bc1 = 1.0 / (1.0 - std::pow(0.9, step));
    const double bc2 = 1.0 / (1.0 - std::pow(0.999, step));
    s.adam_update(p1.data(), g.data(), m1.data(), v1.data(), n, 1e-3, 0.9,
                  0.999, 1e-8, bc1, bc2);
    a.adam_update(p2.data(), g.data(), m2.data(), v2.data(), n, 1e-3, 0.9,
                  0.999, 1e-8, bc1, bc2);
  }
  check_close(p1, p2, 1e-11);
}

TEST_CASE("backend selection") {
  CHECK(ker::available().size() >= 1);
  CHECK(std::string(ker::scalar_backend().name) == "scalar");
  {
    ker::ScopedBackend guard("scalar");
    CHECK(std::string(ker::active().name) == "scalar");
  }
  CHECK_THROWS_AS(ker::set_active("not-a-backend"), cpc::ValueError);
  if (have_avx2()) {
    ker::ScopedBackend guard("avx2");
    CHECK(std::string(ker::active().name) == "avx2");
  }
}
