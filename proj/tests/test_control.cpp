// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "stpc/control.hpp"
#include "stpc/reach.hpp"
#include "util.hpp"

using namespace stpc;

namespace {

ControllerWeights unit_weights() {
  ControllerWeights w;
  w.Q_y = Mat::identity(1);
  w.Q_u = Mat::identity(1);
  return w;
}

// Hand-made nested family over 4-d extended states: origin, the +-1 box, and
// the +-2 box (both inside the benchmark constraint boxes).
NestedFamily toy_family() {
  NestedFamily f;
  f.T_ini = 2;
  f.m = f.p = 1;
  f.N = 6;
  f.boxes = testutil::benchmark_boxes();
  VRepSet origin;
  origin.vertices = {Vec(4, 0.0)};
  VRepSet box1, box2;
  for (double a : {-0.4, 0.4})
    for (double b : {-0.4, 0.4})
      for (double c : {-1.0, 1.0})
        for (double d : {-1.0, 1.0}) {
          box1.vertices.push_back({a, b, c, d});
          box2.vertices.push_back({a, b, 2 * c, 2 * d});
        }
  f.levels = {origin, box1, box2};
  return f;
}

ControllerState state_at(double u, double y, std::size_t l, std::size_t w) {
  ControllerState s;
  s.l = l;
  s.w = w;
  s.history.emplace_back(Vec{u}, Vec{y});
  s.history.emplace_back(Vec{u}, Vec{y});
  return s;
}

}  // namespace

TEST_CASE("window rule: plain decrement while the level holds") {
  NestedFamily fam = toy_family();
  ControllerState s = state_at(0.4, 1.5, 2, 3);  // xi in level 2 only
  StepDiagnostics diag;
  update_after_measurement(s, fam, Vec{0.4}, Vec{1.5}, diag);
  CHECK(s.l == 2);
  CHECK_FALSE(diag.level_decreased);
  CHECK(s.w == 2);
}

TEST_CASE("window rule: hitting zero resets to N-1") {
  NestedFamily fam = toy_family();
  ControllerState s = state_at(0.4, 1.5, 2, 1);
  StepDiagnostics diag;
  update_after_measurement(s, fam, Vec{0.4}, Vec{1.5}, diag);
  CHECK(s.l == 2);
  CHECK(s.w == 5);  // N - 1
}

TEST_CASE("window rule: entering the inner set resets and drops the level") {
  NestedFamily fam = toy_family();
  ControllerState s = state_at(0.4, 1.5, 2, 4);
  StepDiagnostics diag;
  // New window [0.4, 0.4, 1.5, 0.5] is still outside level 1; then a second
  // measurement brings the whole window inside it.
  update_after_measurement(s, fam, Vec{0.4}, Vec{0.5}, diag);
  CHECK(s.l == 2);
  CHECK(s.w == 3);
  update_after_measurement(s, fam, Vec{0.4}, Vec{0.5}, diag);
  CHECK(s.l == 1);
  CHECK(diag.level_decreased);
  CHECK(s.w == 5);
}

TEST_CASE("window rule: the level never climbs back up") {
  NestedFamily fam = toy_family();
  ControllerState s = state_at(0.4, 0.5, 1, 4);  // already certified at level 1
  StepDiagnostics diag;
  update_after_measurement(s, fam, Vec{0.4}, Vec{1.5}, diag);  // drifts out to level 2
  CHECK(s.l == 1);  // certification is monotone
  CHECK_FALSE(diag.level_decreased);
  CHECK(s.w == 3);
}

TEST_CASE("planner assembly validates its preconditions") {
  const DataArchive& a = testutil::benchmark_archive();
  NestedFamily fam = toy_family();
  ControllerWeights w = unit_weights();
  const ConstraintBoxes boxes = testutil::benchmark_boxes();

  ControllerState s = state_at(0.0, 0.0, 0, 3);
  CHECK_THROWS_AS(assemble_stddpc_qp(a, fam, s, w, boxes), std::invalid_argument);
  s.l = 5;  // beyond the family
  CHECK_THROWS_AS(assemble_stddpc_qp(a, fam, s, w, boxes), std::invalid_argument);
  s.l = 1;
  s.w = 0;
  CHECK_THROWS_AS(assemble_stddpc_qp(a, fam, s, w, boxes), std::invalid_argument);
  s.w = 6;  // must stay <= N-1
  CHECK_THROWS_AS(assemble_stddpc_qp(a, fam, s, w, boxes), std::invalid_argument);
  s.w = 3;
  s.history.pop_back();
  CHECK_THROWS_AS(assemble_stddpc_qp(a, fam, s, w, boxes), std::invalid_argument);

  ControllerState ok = state_at(0.0, 0.0, 1, 3);
  QuadraticProgram qp = assemble_stddpc_qp(a, fam, ok, w, boxes);
  // One weight block per constrained step k = 1 ... N: steps 1, 2 target the
  // 16-vertex level 1, steps 3 ... 6 the origin singleton.
  CHECK(qp.z == 193 + 8 + 8 + (2 * 16 + 4 * 1));

  ControllerWeights bad = unit_weights();
  bad.Q_y = Mat(2, 2);
  CHECK_THROWS_AS(assemble_stddpc_qp(a, fam, ok, bad, boxes), std::invalid_argument);
}

TEST_CASE("planning from the origin history is free") {
  const DataArchive& a = testutil::benchmark_archive();
  NestedFamily fam = toy_family();
  ControllerState s = state_at(0.0, 0.0, 1, 3);
  Vec u;
  StepDiagnostics diag = plan_stddpc(a, fam, s, unit_weights(), testutil::benchmark_boxes(), u);
  REQUIRE(diag.status == QpStatus::optimal);
  CHECK(std::fabs(u[0]) <= 1e-6);
  CHECK(diag.objective <= 1e-8);
}

TEST_CASE("baseline planner from the origin history is free") {
  const DataArchive& a = testutil::benchmark_archive();
  ControllerState s = state_at(0.0, 0.0, 0, 1);
  QuadraticProgram qp = assemble_ddpc_qp(a, s, unit_weights(), testutil::benchmark_boxes());
  CHECK(qp.z == 193 + 8 + 8);
  QpSolution sol = solve(qp);
  REQUIRE(sol.status == QpStatus::optimal);
  CHECK(std::fabs(sol.z[193 + 2]) <= 1e-6);
}

TEST_CASE("history synthesis replays the zero-input prefix") {
  auto hist = synthesize_history(testutil::benchmark_plant(), Vec{4.0, 0.0}, 2);
  REQUIRE(hist.size() == 2);
  for (const auto& [u, y] : hist) {
    CHECK(u == Vec{0.0});
    CHECK(y == Vec{4.0});  // [4, 0] is a fixed point of the drift
  }

  PlantSpec singular = testutil::benchmark_plant();
  singular.A = Mat(2, 2);  // nilpotent drift cannot be run backward
  singular.A(0, 1) = 1.0;
  CHECK_THROWS_AS(synthesize_history(singular, Vec{1.0, 0.0}, 2), std::invalid_argument);
}

TEST_CASE("closed loop from the origin converges immediately") {
  const DataArchive& a = testutil::benchmark_archive();
  NestedFamily fam = toy_family();
  RunResult res = run_closed_loop(testutil::benchmark_plant(), a, fam, Vec{0.0, 0.0},
                                  unit_weights(), testutil::benchmark_boxes());
  CHECK(res.converged);
  CHECK(res.steps == 0);
  CHECK(res.min_level_reached == 0);
  CHECK(res.max_abs_u == 0.0);
  for (const LogRow& r : res.log) CHECK(r.status == "hold");
}

TEST_CASE("start outside the outermost level is refused with a reason") {
  const DataArchive& a = testutil::benchmark_archive();
  NestedFamily fam = toy_family();
  RunResult res = run_closed_loop(testutil::benchmark_plant(), a, fam, Vec{3.9, 0.0},
                                  unit_weights(), testutil::benchmark_boxes());
  CHECK_FALSE(res.converged);
  CHECK(res.failure_reason == "outside region of attraction");
  CHECK(res.log.empty());
}

TEST_CASE("set-governed loop converges from inside a sampled family") {
  const DataArchive& a = testutil::benchmark_archive();
  ReachConfig cfg;
  cfg.n_star = 2;
  cfg.N_i = 40;
  cfg.seed = 5;
  NestedFamily fam = build_family(a, testutil::benchmark_plant(), testutil::benchmark_boxes(), cfg);

  // Pick the largest drift fixed point [c, 0] whose synthesized window the
  // family certifies; the build is deterministic, so this probe is too.
  double c = 0.0;
  for (double cand : {0.5, 0.3, 0.2, 0.1, 0.05}) {
    if (fam.smallest_level({0.0, 0.0, cand, cand}).has_value()) {
      c = cand;
      break;
    }
  }
  REQUIRE(c > 0.0);
  RunResult res = run_closed_loop(testutil::benchmark_plant(), a, fam, Vec{c, 0.0}, unit_weights(),
                                  testutil::benchmark_boxes());
  CHECK(res.converged);
  CHECK(res.max_abs_u <= 0.5 + 1e-9);
  CHECK(res.max_abs_y <= 4.0 + 1e-9);
  CHECK_FALSE(res.any_infeasible);
  CHECK(res.min_level_reached == 0);

  long prev_level = -1;
  long prev_w = -1;
  for (const LogRow& r : res.log) {
    if (r.status == "hold") break;
    CHECK(r.status == "optimal");
    if (prev_level >= 0) {
      CHECK(r.level <= prev_level);  // certified level is monotone
      const bool reset = r.w == static_cast<long>(fam.N) - 1;
      const bool expected_reset = prev_w == 1 || r.level < prev_level;
      CHECK(reset == expected_reset);
      if (!reset) CHECK(r.w == prev_w - 1);
    }
    prev_level = r.level;
    prev_w = r.w;
  }
}

TEST_CASE("terminal-ingredient-free baseline stabilizes a contractive plant") {
  PlantSpec plant = testutil::benchmark_plant();
  for (double& v : plant.A.a) v *= 0.5;  // halve the drift: spectral radius 1/2, 1
  const ConstraintBoxes boxes = testutil::benchmark_boxes();
  Trajectory data = collect_dataset(plant, boxes, 200, 7);
  DataArchive a = make_archive(data, 2, 6);
  RunResult res = run_ddpc_baseline(plant, a, Vec{2.0, 0.0}, unit_weights(), boxes);
  CHECK(res.converged);
  CHECK(res.max_abs_y <= 4.0 + 1e-9);
  CHECK_FALSE(res.any_infeasible);
}

TEST_CASE("baseline cannot hold the unstable benchmark within eight steps") {
  const DataArchive& a = testutil::benchmark_archive();
  RunOptions opt;
  opt.max_steps = 8;
  RunResult res = run_ddpc_baseline(testutil::benchmark_plant(), a, Vec{4.0, 0.0}, unit_weights(),
                                    testutil::benchmark_boxes(), opt);
  CHECK_FALSE(res.converged);
  CHECK(res.log.size() == 8);
}
