// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "stpc/kernels.hpp"
#include "stpc/rng.hpp"

using stpc::Rng;
namespace k = stpc::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -3.0, double hi = 3.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Sizes straddling the 4-lane AVX2 width, including remainders of every
// residue class and a couple of large blocks.
const std::vector<std::size_t> kSizes = {1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 33, 100, 257, 1024};

}  // namespace

TEST_CASE("scalar reference is always available") {
  CHECK(std::string(k::scalar().name) == "scalar");
  const k::Ops& act = k::active();
  CHECK((std::string(act.name) == "scalar" || std::string(act.name) == "avx2"));
}

TEST_CASE("vector variant matches the scalar reference on every primitive") {
  const k::Ops* v = k::avx2();
  if (v == nullptr) return;  // cpu without AVX2: dispatch already covered above
  Rng rng(42);
  for (std::size_t n : kSizes) {
    CAPTURE(n);
    const auto x = random_vec(rng, n);
    const auto y = random_vec(rng, n);

    const double d0 = k::scalar().dot(x.data(), y.data(), n);
    const double d1 = v->dot(x.data(), y.data(), n);
    CHECK(std::fabs(d0 - d1) <= 1e-12 * (1.0 + std::fabs(d0)));

    CHECK(k::scalar().max_abs(x.data(), n) == v->max_abs(x.data(), n));

    auto y0 = y, y1 = y;
    k::scalar().axpy(1.7, x.data(), y0.data(), n);
    v->axpy(1.7, x.data(), y1.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::fabs(y0[i] - y1[i]) <= 1e-12 * (1.0 + std::fabs(y0[i])));

    auto s0 = x, s1 = x;
    k::scalar().scal(-0.3, s0.data(), n);
    v->scal(-0.3, s1.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(s0[i] == s1[i]);

    const auto lo = random_vec(rng, n, -1.0, 0.0);
    const auto hi = random_vec(rng, n, 0.0, 1.0);
    auto c0 = x, c1 = x;
    k::scalar().clamp(c0.data(), lo.data(), hi.data(), n);
    v->clamp(c1.data(), lo.data(), hi.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(c0[i] == c1[i]);
  }
}

TEST_CASE("clamp pins to the box and leaves interior points alone") {
  std::vector<double> x = {-2.0, 0.25, 2.0, 0.0};
  const std::vector<double> lo = {-1.0, -1.0, -1.0, -1.0};
  const std::vector<double> hi = {1.0, 1.0, 1.0, 1.0};
  k::active().clamp(x.data(), lo.data(), hi.data(), x.size());
  CHECK(x == std::vector<double>{-1.0, 0.25, 1.0, 0.0});
}

TEST_CASE("max_abs sees the sign-flipped extreme") {
  const std::vector<double> x = {0.5, -7.25, 3.0};
  CHECK(k::active().max_abs(x.data(), x.size()) == 7.25);
  CHECK(k::scalar().max_abs(x.data(), 0) == 0.0);
}

TEST_CASE("gemv agrees with a naive triple loop") {
  Rng rng(7);
  for (std::size_t rows : {1u, 3u, 8u, 17u}) {
    for (std::size_t cols : {1u, 4u, 9u, 33u}) {
      const auto a = random_vec(rng, rows * cols);
      const auto x = random_vec(rng, cols);
      std::vector<double> y(rows, 0.0), y_ref(rows, 0.0);
      k::gemv(a.data(), rows, cols, x.data(), y.data());
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) y_ref[i] += a[i * cols + j] * x[j];
      for (std::size_t i = 0; i < rows; ++i)
        CHECK(std::fabs(y[i] - y_ref[i]) <= 1e-12 * (1.0 + std::fabs(y_ref[i])));

      const auto yy = random_vec(rng, rows);
      std::vector<double> t(cols, 1.0), t_ref(cols, 1.0);
      k::gemv_t_acc(a.data(), rows, cols, yy.data(), t.data());
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) t_ref[j] += a[i * cols + j] * yy[i];
      for (std::size_t j = 0; j < cols; ++j)
        CHECK(std::fabs(t[j] - t_ref[j]) <= 1e-12 * (1.0 + std::fabs(t_ref[j])));
    }
  }
}
