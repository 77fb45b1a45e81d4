// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "stpc/geometry.hpp"
#include "stpc/hankel.hpp"
#include "stpc/plant.hpp"
#include "stpc/qp.hpp"

namespace stpc {

// Safety-filter instance: minimally modify a proposed input so that the
// predicted window stays inside the boxes and its terminal extended state
// lands in the target set.
struct FilterProblem {
  const DataArchive* archive = nullptr;
  ExtendedState xi_now;
  const VRepSet* target = nullptr;
  Vec u_learning;  // proposed input for the current step
  Mat R;           // PSD intervention weight; identity when empty
  ConstraintBoxes boxes;
};

// One feasible trajectory over the window [-T_ini, N-1]: the first T_ini
// samples replay the measured history, the rest is the planned completion.
struct BackupTrajectory {
  std::vector<Vec> inputs;   // length L = T_ini + N
  std::vector<Vec> outputs;  // length L
  std::vector<ExtendedState> extended_states;  // xi_0 ... xi_N
};

struct FilterOutcome {
  bool ok = false;
  QpStatus status = QpStatus::max_iter;
  Vec safe_input;
  BackupTrajectory backup;
  double objective = 0.0;  // actual intervention cost ||u_safe - u_l||_R^2
};

// Decision variables: [alpha (N0-L+1) | u window (m*L) | y window (p*L) |
// lambda (one per target vertex)].
QuadraticProgram assemble_filter_qp(const FilterProblem& prob);

FilterOutcome filter_step(const FilterProblem& prob, const QpSettings& settings = {});

struct SampleStep {
  long t = 0;
  Vec u_l, u_safe, y;
  double objective = 0.0;
  QpStatus status = QpStatus::max_iter;
  bool fallback = false;
  bool restarted = false;  // rollout was reset to the origin after this step
};

struct SampleRun {
  std::vector<BackupTrajectory> backups;
  std::vector<SampleStep> log;
  std::size_t failures = 0;
  std::size_t restarts = 0;
};

// Closed-loop sampling: draw a random input from the box each step, filter
// it, apply the safe input to the plant, and record the backup trajectory.
// Rollouts start from the origin history; on repeated filter failure the
// loop falls back to the previous backup's next input and, after three
// consecutive failures, restarts from the origin. Deterministic per seed.
SampleRun sample_backups(const DataArchive& archive, const PlantSpec& plant,
                         const ConstraintBoxes& boxes, const VRepSet& target, std::size_t n_steps,
                         std::uint64_t seed);

}  // namespace stpc
