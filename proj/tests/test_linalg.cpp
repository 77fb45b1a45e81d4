// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stpc/linalg.hpp"
#include "stpc/rng.hpp"

using namespace stpc;

namespace {

Mat random_mat(Rng& rng, std::size_t r, std::size_t c) {
  Mat m(r, c);
  for (double& x : m.a) x = rng.uniform(-2.0, 2.0);
  return m;
}

Mat random_spd(Rng& rng, std::size_t n) {
  Mat a = random_mat(rng, n, n);
  Mat s = matmul(transpose(a), a);
  for (std::size_t i = 0; i < n; ++i) s(i, i) += 0.5;
  return s;
}

}  // namespace

TEST_CASE("matmul and transpose against hand values") {
  Mat a(2, 3);
  a.a = {1, 2, 3, 4, 5, 6};
  Mat b(3, 2);
  b.a = {7, 8, 9, 10, 11, 12};
  Mat c = matmul(a, b);
  CHECK(c.rows == 2);
  CHECK(c.cols == 2);
  CHECK(c(0, 0) == 58);
  CHECK(c(0, 1) == 64);
  CHECK(c(1, 0) == 139);
  CHECK(c(1, 1) == 154);
  Mat at = transpose(a);
  CHECK(at.rows == 3);
  CHECK(at(2, 1) == 6);
  Mat i3 = Mat::identity(3);
  Mat ai = matmul(a, i3);
  CHECK(ai.a == a.a);
}

TEST_CASE("matvec pair are transposes of each other") {
  Rng rng(1);
  Mat a = random_mat(rng, 5, 3);
  Vec x = {1.0, -2.0, 0.5};
  Vec y = matvec(a, x);
  Vec check(5, 0.0);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) check[i] += a(i, j) * x[j];
  for (std::size_t i = 0; i < 5; ++i) CHECK(y[i] == doctest::Approx(check[i]).epsilon(1e-14));

  Vec w = {2.0, 0.0, -1.0, 3.0, 0.25};
  Vec z = matvec_t(a, w);
  Vec zc = matvec(transpose(a), w);
  for (std::size_t j = 0; j < 3; ++j) CHECK(z[j] == doctest::Approx(zc[j]).epsilon(1e-14));
}

TEST_CASE("lu solve recovers a known solution") {
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 1 + rng.below(8);
    Mat a = random_mat(rng, n, n);
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 4.0;  // keep it comfortably regular
    Vec x_true(n);
    for (double& v : x_true) v = rng.uniform(-1.0, 1.0);
    Vec b = matvec(a, x_true);
    Lu f = lu_factor(a);
    REQUIRE(f.ok);
    Vec x = f.solve(b);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::fabs(x[i] - x_true[i]) <= 1e-10 * (1.0 + std::fabs(x_true[i])));
  }
}

TEST_CASE("lu flags a singular matrix") {
  Mat a(2, 2);
  a.a = {1, 2, 2, 4};
  CHECK_FALSE(lu_factor(a).ok);
}

TEST_CASE("cholesky solves SPD systems and rejects indefinite ones") {
  Rng rng(3);
  Mat s = random_spd(rng, 6);
  Vec x_true(6);
  for (double& v : x_true) v = rng.uniform(-1.0, 1.0);
  Vec b = matvec(s, x_true);
  Cholesky f = llt_factor(s);
  REQUIRE(f.ok);
  Vec x = f.solve(b);
  for (std::size_t i = 0; i < 6; ++i) CHECK(x[i] == doctest::Approx(x_true[i]).epsilon(1e-9));

  Mat bad(2, 2);
  bad.a = {1, 0, 0, -1};
  CHECK_FALSE(llt_factor(bad).ok);
}

TEST_CASE("svd singular values on a diagonal matrix") {
  Mat a(3, 3);
  a(0, 0) = 3.0;
  a(1, 1) = 1.0;
  a(2, 2) = 2.0;
  Svd s = svd_jacobi(a);
  REQUIRE(s.sigma.size() == 3);
  CHECK(s.sigma[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(s.sigma[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s.sigma[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("svd invariants: descending order, Frobenius identity, orthonormal basis") {
  Rng rng(4);
  Mat a = random_mat(rng, 7, 4);
  Svd s = svd_jacobi(a, /*want_basis=*/true);
  REQUIRE(s.sigma.size() == 4);
  double fro = 0.0;
  for (double v : a.a) fro += v * v;
  double ssq = 0.0;
  for (std::size_t i = 0; i < s.sigma.size(); ++i) {
    ssq += s.sigma[i] * s.sigma[i];
    if (i) CHECK(s.sigma[i] <= s.sigma[i - 1] + 1e-12);
  }
  CHECK(ssq == doctest::Approx(fro).epsilon(1e-10));
  // Columns of the basis are orthonormal.
  for (std::size_t i = 0; i < s.col_basis.cols; ++i)
    for (std::size_t j = i; j < s.col_basis.cols; ++j) {
      double d = 0.0;
      for (std::size_t r = 0; r < s.col_basis.rows; ++r) d += s.col_basis(r, i) * s.col_basis(r, j);
      CHECK(d == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
    }
}

TEST_CASE("numerical rank detects a rank-one matrix") {
  Mat a(2, 2);
  a.a = {1, 2, 2, 4};
  Svd s = svd_jacobi(a);
  CHECK(numerical_rank(s.sigma, 1e-9) == 1);
  CHECK(numerical_rank(Vec{}, 1e-9) == 0);
}

TEST_CASE("least squares matches the normal equations") {
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    Mat a = random_mat(rng, 9, 4);
    Vec b(9);
    for (double& v : b) v = rng.uniform(-1.0, 1.0);
    Vec x = qr_least_squares(a, b);
    // Oracle: solve (A'A) x = A'b with the LU path.
    Mat ata = matmul(transpose(a), a);
    Vec atb = matvec_t(a, b);
    Lu f = lu_factor(ata);
    REQUIRE(f.ok);
    Vec x_ref = f.solve(atb);
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(std::fabs(x[i] - x_ref[i]) <= 1e-9 * (1.0 + std::fabs(x_ref[i])));
  }
}

TEST_CASE("symmetric eigenvalues of known matrices") {
  Mat a(2, 2);
  a.a = {2, 1, 1, 2};
  Vec ev = sym_eigenvalues(a);
  REQUIRE(ev.size() == 2);
  CHECK(ev[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ev[1] == doctest::Approx(3.0).epsilon(1e-12));

  // Eigenvalues of a random SPD matrix are positive and sum to the trace.
  Rng rng(6);
  Mat s = random_spd(rng, 5);
  Vec es = sym_eigenvalues(s);
  double tr = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    tr += s(i, i);
    sum += es[i];
    CHECK(es[i] > 0.0);
  }
  CHECK(sum == doctest::Approx(tr).epsilon(1e-10));
}

TEST_CASE("norms") {
  Vec v = {3.0, -4.0};
  CHECK(norm2(v) == doctest::Approx(5.0));
  CHECK(norm_inf(v) == 4.0);
  CHECK(dot(v, v) == 25.0);
  CHECK(norm_inf(Vec{}) == 0.0);
}
