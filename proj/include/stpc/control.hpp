// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <string>
#include <vector>

#include "stpc/geometry.hpp"
#include "stpc/hankel.hpp"
#include "stpc/plant.hpp"
#include "stpc/qp.hpp"

namespace stpc {

struct ControllerWeights {
  Mat Q_y;  // p x p
  Mat Q_u;  // m x m
};

// Runtime state of the set-governed controller: current level, sliding
// window position, and the last T_ini measured (u, y) pairs.
struct ControllerState {
  std::size_t l = 0;
  std::size_t w = 1;
  std::deque<std::pair<Vec, Vec>> history;  // oldest first, length T_ini

  ExtendedState extended(std::size_t m, std::size_t p, std::size_t T_ini) const;
};

// Variables: [alpha | u window (m*L) | y window (p*L) | one lambda block per
// constrained step k = 1 ... N]. Steps k < w target level l, steps k >= w
// target level l-1. Requires state.l >= 1; membership of the current
// extended state in level l is the caller's check (it is data, not a
// decision variable).
QuadraticProgram assemble_stddpc_qp(const DataArchive& archive, const NestedFamily& family,
                                    const ControllerState& state, const ControllerWeights& weights,
                                    const ConstraintBoxes& boxes);

// Same problem with every set block removed: window consistency, history
// pinning, boxes, and the quadratic cost only.
QuadraticProgram assemble_ddpc_qp(const DataArchive& archive, const ControllerState& state,
                                  const ControllerWeights& weights, const ConstraintBoxes& boxes);

struct StepDiagnostics {
  QpStatus status = QpStatus::max_iter;
  double objective = 0.0;
  double solve_ms = 0.0;
  bool level_decreased = false;
};

// Plans the next input from the current state (does not touch the plant).
StepDiagnostics plan_stddpc(const DataArchive& archive, const NestedFamily& family,
                            const ControllerState& state, const ControllerWeights& weights,
                            const ConstraintBoxes& boxes, Vec& u_out,
                            const QpSettings& settings = {});

// Folds a measurement into the state: pushes (u, y) into the history,
// re-computes the smallest containing level, and applies the window rule
// (decrement; reset to N-1 when it hits zero or the level dropped).
void update_after_measurement(ControllerState& state, const NestedFamily& family, const Vec& u,
                              const Vec& y, StepDiagnostics& diag);

struct LogRow {
  long t = 0;
  Vec u, y;
  long level = 0;
  long w = 0;
  std::string status;  // qp status, or "hold" after convergence
  double objective = 0.0;
  double solve_ms = 0.0;
};

struct RunResult {
  std::vector<LogRow> log;
  bool converged = false;
  long steps = 0;  // steps until convergence (log length if never)
  double max_abs_u = 0.0;
  double max_abs_y = 0.0;
  long min_level_reached = 0;
  bool any_infeasible = false;
  std::string failure_reason;
};

struct RunOptions {
  double eps_conv = 1e-2;   // infinity-norm ball around the origin window
  long max_steps = 0;       // 0: use initial_level * N (at least 1)
};

// Closed loop from a bare initial plant state. The pre-run history is
// synthesized by driving the plant backward-consistently with zero input
// for T_ini steps (requires an invertible state matrix).
RunResult run_closed_loop(const PlantSpec& plant, const DataArchive& archive,
                          const NestedFamily& family, const Vec& x0,
                          const ControllerWeights& weights, const ConstraintBoxes& boxes,
                          const RunOptions& opt = {});

RunResult run_ddpc_baseline(const PlantSpec& plant, const DataArchive& archive, const Vec& x0,
                            const ControllerWeights& weights, const ConstraintBoxes& boxes,
                            const RunOptions& opt = {});

// History synthesis shared by both runners; also returns the y samples.
std::deque<std::pair<Vec, Vec>> synthesize_history(const PlantSpec& plant, const Vec& x0,
                                                   std::size_t T_ini);

}  // namespace stpc
