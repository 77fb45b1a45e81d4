// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "stpc/control.hpp"
#include "stpc/qp.hpp"
#include "stpc/rng.hpp"
#include "util.hpp"

using namespace stpc;

namespace {

QuadraticProgram box_bounds(std::size_t n, const Vec& lo, const Vec& hi) {
  QuadraticProgram qp;
  qp.z = n;
  qp.Gin = SparseMat(0, n);
  for (std::size_t i = 0; i < n; ++i) {
    qp.Gin.append_row({{i, 1.0}});
    qp.hin.push_back(hi[i]);
    qp.Gin.append_row({{i, -1.0}});
    qp.hin.push_back(-lo[i]);
  }
  return qp;
}

double objective_of(const QuadraticProgram& qp, const Vec& z) {
  double obj = 0.0;
  if (!qp.P.empty())
    for (std::size_t i = 0; i < qp.z; ++i)
      for (std::size_t j = 0; j < qp.z; ++j) obj += 0.5 * z[i] * qp.P(i, j) * z[j];
  for (std::size_t i = 0; i < qp.q.size(); ++i) obj += qp.q[i] * z[i];
  return obj;
}

}  // namespace

TEST_CASE("unconstrained scalar parabola") {
  QuadraticProgram qp;
  qp.z = 1;
  qp.P = Mat(1, 1);
  qp.P(0, 0) = 2.0;
  qp.q = {-4.0};  // (x - 2)^2 up to a constant
  QpSolution s = solve(qp);
  REQUIRE(s.status == QpStatus::optimal);
  CHECK(s.z[0] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(s.objective == doctest::Approx(-4.0).epsilon(1e-8));
}

TEST_CASE("equality constrained circle lands on the midpoint") {
  QuadraticProgram qp;
  qp.z = 2;
  qp.P = Mat(2, 2);
  qp.P(0, 0) = qp.P(1, 1) = 2.0;
  qp.q = {0.0, 0.0};
  qp.Aeq = SparseMat(0, 2);
  qp.Aeq.append_row({{0, 1.0}, {1, 1.0}});
  qp.beq = {1.0};
  QpSolution s = solve(qp);
  REQUIRE(s.status == QpStatus::optimal);
  CHECK(s.z[0] == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(s.z[1] == doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("active inequality pins the solution to the bound") {
  QuadraticProgram qp;
  qp.z = 1;
  qp.P = Mat(1, 1);
  qp.P(0, 0) = 2.0;
  qp.q = {0.0};
  qp.Gin = SparseMat(0, 1);
  qp.Gin.append_row({{0, -1.0}});  // -x <= -1, i.e. x >= 1
  qp.hin = {-1.0};
  QpSolution s = solve(qp);
  REQUIRE(s.status == QpStatus::optimal);
  CHECK(s.z[0] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("contradictory bounds are reported infeasible") {
  QuadraticProgram qp;
  qp.z = 1;
  qp.q = {0.0};
  qp.Gin = SparseMat(0, 1);
  qp.Gin.append_row({{0, 1.0}});   // x <= -1
  qp.hin.push_back(-1.0);
  qp.Gin.append_row({{0, -1.0}});  // x >= 1
  qp.hin.push_back(-1.0);
  QpSolution s = solve(qp);
  CHECK(s.status == QpStatus::infeasible);
}

TEST_CASE("contradictory general equalities are certified infeasible") {
  QuadraticProgram qp;
  qp.z = 2;
  qp.P = Mat(2, 2);
  qp.P(0, 0) = qp.P(1, 1) = 2.0;
  qp.q = {0.0, 0.0};
  qp.Aeq = SparseMat(0, 2);
  qp.Aeq.append_row({{0, 1.0}, {1, 1.0}});
  qp.Aeq.append_row({{0, 1.0}, {1, 1.0}});
  qp.beq = {1.0, 3.0};
  QpSolution s = solve(qp);
  CHECK(s.status == QpStatus::infeasible);
}

TEST_CASE("linear program over the unit interval") {
  SparseMat aeq(0, 1);
  SparseMat gin(0, 1);
  Vec hin;
  gin.append_row({{0, 1.0}});
  hin.push_back(1.0);
  gin.append_row({{0, -1.0}});
  hin.push_back(0.0);
  QpSolution s = solve_lp({1.0}, aeq, {}, gin, hin);
  REQUIRE(s.status == QpStatus::optimal);
  CHECK(s.z[0] == doctest::Approx(0.0).epsilon(1e-8));

  QpSolution t = solve_lp({-1.0}, aeq, {}, gin, hin);
  REQUIRE(t.status == QpStatus::optimal);
  CHECK(t.z[0] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("equality-constrained solves match the direct KKT system") {
  Rng rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 2 + rng.below(6);
    const std::size_t k = 1 + rng.below(n - 1);
    Mat a(n, n);
    for (double& v : a.a) v = rng.uniform(-1.0, 1.0);
    Mat p = matmul(transpose(a), a);
    for (std::size_t i = 0; i < n; ++i) p(i, i) += 0.5;

    QuadraticProgram qp;
    qp.z = n;
    qp.P = p;
    qp.q.assign(n, 0.0);
    for (double& v : qp.q) v = rng.uniform(-1.0, 1.0);
    qp.Aeq = SparseMat(0, n);
    Mat aeq_dense(k, n);
    Vec x_feas(n);
    for (double& v : x_feas) v = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<std::pair<std::size_t, double>> row;
      for (std::size_t j = 0; j < n; ++j) {
        aeq_dense(i, j) = rng.uniform(-1.0, 1.0);
        row.emplace_back(j, aeq_dense(i, j));
      }
      qp.Aeq.append_row(std::move(row));
    }
    qp.beq = matvec(aeq_dense, x_feas);

    QpSolution s = solve(qp);
    REQUIRE(s.status == QpStatus::optimal);

    // Oracle: [P A'; A 0] [x; nu] = [-q; b].
    Mat kkt(n + k, n + k);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) kkt(i, j) = p(i, j);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        kkt(n + i, j) = aeq_dense(i, j);
        kkt(j, n + i) = aeq_dense(i, j);
      }
    Vec rhs(n + k, 0.0);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = -qp.q[i];
    for (std::size_t i = 0; i < k; ++i) rhs[n + i] = qp.beq[i];
    Lu f = lu_factor(kkt);
    REQUIRE(f.ok);
    Vec ref = f.solve(rhs);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::fabs(s.z[i] - ref[i]) <= 1e-6 * (1.0 + std::fabs(ref[i])));
  }
}

TEST_CASE("box QPs beat every feasible probe point") {
  Rng rng(18);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 2 + rng.below(5);
    Vec lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) {
      lo[i] = rng.uniform(-2.0, -0.1);
      hi[i] = rng.uniform(0.1, 2.0);
    }
    QuadraticProgram qp = box_bounds(n, lo, hi);
    Mat a(n, n);
    for (double& v : a.a) v = rng.uniform(-1.0, 1.0);
    qp.P = matmul(transpose(a), a);
    for (std::size_t i = 0; i < n; ++i) qp.P(i, i) += 0.3;
    qp.q.assign(n, 0.0);
    for (double& v : qp.q) v = rng.uniform(-2.0, 2.0);

    QpSolution s = solve(qp);
    REQUIRE(s.status == QpStatus::optimal);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(s.z[i] >= lo[i] - 1e-8);
      CHECK(s.z[i] <= hi[i] + 1e-8);
    }
    const double opt = objective_of(qp, s.z);
    for (int probe = 0; probe < 20; ++probe) {
      Vec x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = rng.uniform(lo[i], hi[i]);
      CHECK(opt <= objective_of(qp, x) + 1e-7 * (1.0 + std::fabs(opt)));
    }
  }
}

TEST_CASE("solution is invariant to objective and row scaling") {
  QuadraticProgram qp;
  qp.z = 2;
  qp.P = Mat(2, 2);
  qp.P(0, 0) = 4.0;
  qp.P(1, 1) = 2.0;
  qp.P(0, 1) = qp.P(1, 0) = 1.0;
  qp.q = {-1.0, 2.5};
  qp.Gin = SparseMat(0, 2);
  qp.Gin.append_row({{0, 1.0}, {1, 1.0}});
  qp.hin = {0.5};
  QpSolution base = solve(qp);
  REQUIRE(base.status == QpStatus::optimal);

  QuadraticProgram scaled = qp;
  for (double& v : scaled.P.a) v *= 10.0;
  for (double& v : scaled.q) v *= 10.0;
  scaled.Gin = SparseMat(0, 2);
  scaled.Gin.append_row({{0, 3.0}, {1, 3.0}});
  scaled.hin = {1.5};
  QpSolution s = solve(scaled);
  REQUIRE(s.status == QpStatus::optimal);
  CHECK(std::fabs(s.z[0] - base.z[0]) <= 1e-7);
  CHECK(std::fabs(s.z[1] - base.z[1]) <= 1e-7);
  CHECK(s.objective == doctest::Approx(10.0 * base.objective).epsilon(1e-6));
}

TEST_CASE("repeated solves are bit-identical") {
  Rng rng(19);
  QuadraticProgram qp;
  qp.z = 6;
  Mat a(6, 6);
  for (double& v : a.a) v = rng.uniform(-1.0, 1.0);
  qp.P = matmul(transpose(a), a);
  qp.q.assign(6, 0.25);
  qp.Gin = SparseMat(0, 6);
  qp.Gin.append_row({{0, 1.0}, {3, -2.0}});
  qp.hin = {0.1};
  QpSolution s1 = solve(qp);
  QpSolution s2 = solve(qp);
  CHECK(s1.z == s2.z);
  CHECK(s1.iters == s2.iters);
  CHECK(s1.status == s2.status);
}

TEST_CASE("indefinite or asymmetric cost matrices are rejected") {
  QuadraticProgram qp;
  qp.z = 1;
  qp.P = Mat(1, 1);
  qp.P(0, 0) = -1.0;
  qp.q = {0.0};
  CHECK_THROWS_AS(solve(qp), std::invalid_argument);

  QuadraticProgram asym;
  asym.z = 2;
  asym.P = Mat(2, 2);
  asym.P(0, 1) = 1.0;  // no matching (1,0) entry
  asym.q = {0.0, 0.0};
  CHECK_THROWS_AS(solve(asym), std::invalid_argument);
}

TEST_CASE("optimal status follows the residual gate, not the effort spent") {
  QuadraticProgram qp;
  qp.z = 1;
  qp.P = Mat(1, 1);
  qp.P(0, 0) = 2.0;
  qp.q = {0.0};
  qp.Gin = SparseMat(0, 1);
  qp.Gin.append_row({{0, -1.0}});
  qp.hin = {-1.0};

  // An unreachable stationarity threshold demotes even a perfect solve.
  QpSettings impossible;
  impossible.eps_stat = -1.0;
  QpSolution s = solve(qp, impossible);
  CHECK(s.status == QpStatus::max_iter);
  REQUIRE(s.z.size() == 1);  // best iterate still returned

  // A starved iteration budget may still end optimal (the polish can finish
  // the job), but only with the residuals to back it up.
  QpSettings starved;
  starved.max_iter = 2;
  QpSolution t = solve(qp, starved);
  REQUIRE(t.z.size() == 1);
  if (t.status == QpStatus::optimal) {
    CHECK(t.z[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(t.primal_residual <= 1e-8);
    CHECK(t.dual_residual <= 1e-6);
  }
}

TEST_CASE("regression: unconstrained-horizon plan from the benchmark corner") {
  // Baseline predictive QP from the [0,0,4,4] history. Hand-derivable: the
  // forced outputs are y0 = y1 = 4, and with u0 = -0.5, u2 = u3 = 0.5 at
  // their bounds the stationary interior input is u1 = 1/12, giving
  // 32 (past) + 22 + 1/12 (future) = 54 + 1/12 with every KKT sign correct.
  const DataArchive& a = testutil::benchmark_archive();
  ControllerState state;
  for (int k = 0; k < 2; ++k) state.history.emplace_back(Vec{0.0}, Vec{4.0});
  ControllerWeights weights;
  weights.Q_y = Mat::identity(1);
  weights.Q_u = Mat::identity(1);
  QuadraticProgram qp = assemble_ddpc_qp(a, state, weights, testutil::benchmark_boxes());
  CHECK(qp.z == 193 + 8 + 8);
  QpSolution s = solve(qp);
  REQUIRE(s.status == QpStatus::optimal);
  const std::size_t u0 = 193 + 2;  // [alpha | u window] with T_ini samples of history first
  CHECK(s.z[u0] == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(s.objective == doctest::Approx(54.0 + 1.0 / 12.0).epsilon(1e-6));
}
