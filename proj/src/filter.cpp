// SPDX-License-Identifier: Apache-2.0
#include "stpc/filter.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

#include "stpc/rng.hpp"

namespace stpc {

namespace {

struct Layout {
  std::size_t na, m, p, L, T_ini, N, kt;
  std::size_t off_u, off_y, off_lam, z;
};

Layout layout_of(const FilterProblem& prob) {
  const DataArchive& ar = *prob.archive;
  Layout lo;
  // Span-basis coefficients, not raw Hankel columns: the orthonormal basis
  // is only rank-many wide where the column count is ~20x larger and flat
  // in every null direction, which poisons conditioning for no extra reach.
  lo.na = ar.rank;
  lo.m = ar.m;
  lo.p = ar.p;
  lo.L = ar.L;
  lo.T_ini = ar.T_ini;
  lo.N = ar.N;
  lo.kt = prob.target->count();
  lo.off_u = lo.na;
  lo.off_y = lo.na + lo.m * lo.L;
  lo.off_lam = lo.off_y + lo.p * lo.L;
  lo.z = lo.off_lam + lo.kt;
  return lo;
}

void check_problem(const FilterProblem& prob) {
  if (prob.archive == nullptr || prob.target == nullptr)
    throw std::invalid_argument("filter: archive and target are required");
  const DataArchive& ar = *prob.archive;
  const std::size_t d = (ar.m + ar.p) * ar.T_ini;
  if (prob.xi_now.flat.size() != d)
    throw std::invalid_argument("filter: extended state dimension mismatch");
  if (prob.target->empty() || prob.target->dim() != d)
    throw std::invalid_argument("filter: target set dimension mismatch");
  if (prob.u_learning.size() != ar.m)
    throw std::invalid_argument("filter: proposed input dimension mismatch");
  if (!prob.R.empty() && (prob.R.rows != ar.m || prob.R.cols != ar.m))
    throw std::invalid_argument("filter: intervention weight must be m x m");
  if (prob.boxes.u_lo.size() != ar.m || prob.boxes.y_lo.size() != ar.p)
    throw std::invalid_argument("filter: constraint box dimension mismatch");
}

}  // namespace

QuadraticProgram assemble_filter_qp(const FilterProblem& prob) {
  check_problem(prob);
  const DataArchive& ar = *prob.archive;
  const Layout lo = layout_of(prob);
  const VRepSet& tgt = *prob.target;

  QuadraticProgram qp;
  qp.z = lo.z;
  qp.q.assign(lo.z, 0.0);
  qp.P = Mat(lo.z, lo.z);

  // Intervention cost ||u_0 - u_l||_R^2 on the first future input slot.
  const std::size_t u0 = lo.off_u + lo.T_ini * lo.m;
  for (std::size_t i = 0; i < lo.m; ++i) {
    for (std::size_t j = 0; j < lo.m; ++j) {
      const double r = prob.R.empty() ? (i == j ? 1.0 : 0.0) : prob.R(i, j);
      qp.P(u0 + i, u0 + j) += 2.0 * r;
      qp.q[u0 + i] += -2.0 * r * prob.u_learning[j];
    }
  }
  // Interior terminal points have infinitely many vertex representations;
  // without this the optimal face is flat in lambda and the solver crawls.
  // Sum(lambda) = 1 bounds the added cost by kLamCurv, far below the
  // intervention term, and the weights land on the minimum-norm choice.
  for (std::size_t v = 0; v < lo.kt; ++v) qp.P(lo.off_lam + v, lo.off_lam + v) += kLamCurv;

  SparseMat aeq(0, lo.z);
  Vec beq;
  SparseMat gin(0, lo.z);
  Vec hin;

  // Window consistency: every admissible window lies in the span of the
  // recorded ones, expressed through the orthonormal basis of that span.
  const std::size_t nwin = (lo.m + lo.p) * lo.L;
  for (std::size_t r = 0; r < nwin; ++r) {
    std::vector<std::pair<std::size_t, double>> row;
    row.reserve(lo.na + 1);
    for (std::size_t j = 0; j < lo.na; ++j) {
      const double v = ar.span_basis(r, j);
      if (v != 0.0) row.emplace_back(j, v);
    }
    const std::size_t slot = r < lo.m * lo.L ? lo.off_u + r : lo.off_y + (r - lo.m * lo.L);
    row.emplace_back(slot, -1.0);
    aeq.append_row(row);
    beq.push_back(0.0);
  }

  // Pin the first T_ini window slots to the measured history.
  for (std::size_t k = 0; k < lo.T_ini; ++k) {
    for (std::size_t c = 0; c < lo.m; ++c) {
      aeq.append_row({{lo.off_u + k * lo.m + c, 1.0}});
      beq.push_back(prob.xi_now.flat[k * lo.m + c]);
    }
    for (std::size_t c = 0; c < lo.p; ++c) {
      aeq.append_row({{lo.off_y + k * lo.p + c, 1.0}});
      beq.push_back(prob.xi_now.flat[lo.m * lo.T_ini + k * lo.p + c]);
    }
  }

  // Terminal window equals a convex combination of the target vertices.
  const std::size_t tail = lo.L - lo.T_ini;
  for (std::size_t k = 0; k < lo.T_ini; ++k) {
    for (std::size_t c = 0; c < lo.m; ++c) {
      std::vector<std::pair<std::size_t, double>> row;
      row.emplace_back(lo.off_u + (tail + k) * lo.m + c, 1.0);
      for (std::size_t v = 0; v < lo.kt; ++v)
        row.emplace_back(lo.off_lam + v, -tgt.vertices[v][k * lo.m + c]);
      aeq.append_row(row);
      beq.push_back(0.0);
    }
    for (std::size_t c = 0; c < lo.p; ++c) {
      std::vector<std::pair<std::size_t, double>> row;
      row.emplace_back(lo.off_y + (tail + k) * lo.p + c, 1.0);
      for (std::size_t v = 0; v < lo.kt; ++v)
        row.emplace_back(lo.off_lam + v, -tgt.vertices[v][lo.m * lo.T_ini + k * lo.p + c]);
      aeq.append_row(row);
      beq.push_back(0.0);
    }
  }
  {
    std::vector<std::pair<std::size_t, double>> row;
    for (std::size_t v = 0; v < lo.kt; ++v) row.emplace_back(lo.off_lam + v, 1.0);
    aeq.append_row(row);
    beq.push_back(1.0);
  }
  for (std::size_t v = 0; v < lo.kt; ++v) {
    gin.append_row({{lo.off_lam + v, -1.0}});
    hin.push_back(0.0);
  }

  // Boxes on the planned part of the window (k = 0 ... N-1).
  for (std::size_t k = lo.T_ini; k < lo.L; ++k) {
    for (std::size_t c = 0; c < lo.m; ++c) {
      const std::size_t s = lo.off_u + k * lo.m + c;
      gin.append_row({{s, 1.0}});
      hin.push_back(prob.boxes.u_hi[c]);
      gin.append_row({{s, -1.0}});
      hin.push_back(-prob.boxes.u_lo[c]);
    }
    for (std::size_t c = 0; c < lo.p; ++c) {
      const std::size_t s = lo.off_y + k * lo.p + c;
      gin.append_row({{s, 1.0}});
      hin.push_back(prob.boxes.y_hi[c]);
      gin.append_row({{s, -1.0}});
      hin.push_back(-prob.boxes.y_lo[c]);
    }
  }

  qp.Aeq = std::move(aeq);
  qp.beq = std::move(beq);
  qp.Gin = std::move(gin);
  qp.hin = std::move(hin);
  return qp;
}

FilterOutcome filter_step(const FilterProblem& prob, const QpSettings& settings) {
  FilterOutcome out;
  QuadraticProgram qp = assemble_filter_qp(prob);
  const Layout lo = layout_of(prob);
  QpSolution sol = solve(qp, settings);
  out.status = sol.status;
  if (sol.status != QpStatus::optimal) return out;

  BackupTrajectory bt;
  bt.inputs.resize(lo.L);
  bt.outputs.resize(lo.L);
  for (std::size_t k = 0; k < lo.L; ++k) {
    bt.inputs[k].assign(sol.z.begin() + static_cast<long>(lo.off_u + k * lo.m),
                        sol.z.begin() + static_cast<long>(lo.off_u + (k + 1) * lo.m));
    bt.outputs[k].assign(sol.z.begin() + static_cast<long>(lo.off_y + k * lo.p),
                         sol.z.begin() + static_cast<long>(lo.off_y + (k + 1) * lo.p));
  }
  bt.extended_states.resize(lo.N + 1);
  for (std::size_t k = 0; k <= lo.N; ++k) {
    ExtendedState& xi = bt.extended_states[k];
    xi.m = lo.m;
    xi.p = lo.p;
    xi.T_ini = lo.T_ini;
    xi.flat.clear();
    for (std::size_t j = 0; j < lo.T_ini; ++j)
      xi.flat.insert(xi.flat.end(), bt.inputs[k + j].begin(), bt.inputs[k + j].end());
    for (std::size_t j = 0; j < lo.T_ini; ++j)
      xi.flat.insert(xi.flat.end(), bt.outputs[k + j].begin(), bt.outputs[k + j].end());
  }

  // Re-verify the safety contract outside the solver: boxes on the planned
  // window and terminal membership through the returned convex weights.
  constexpr double kBoxTol = 1e-6;
  for (std::size_t k = lo.T_ini; k < lo.L; ++k) {
    if (!prob.boxes.u_inside(bt.inputs[k], kBoxTol) || !prob.boxes.y_inside(bt.outputs[k], kBoxTol))
      return out;
  }
  const VRepSet& tgt = *prob.target;
  double term_resid = 0.0, lam_sum = 0.0;
  const std::size_t d = (lo.m + lo.p) * lo.T_ini;
  for (std::size_t c = 0; c < d; ++c) {
    double acc = -bt.extended_states[lo.N].flat[c];
    for (std::size_t v = 0; v < lo.kt; ++v) acc += sol.z[lo.off_lam + v] * tgt.vertices[v][c];
    term_resid = std::max(term_resid, std::fabs(acc));
  }
  for (std::size_t v = 0; v < lo.kt; ++v) {
    lam_sum += sol.z[lo.off_lam + v];
    term_resid = std::max(term_resid, -sol.z[lo.off_lam + v]);
  }
  term_resid = std::max(term_resid, std::fabs(lam_sum - 1.0));
  if (term_resid > 1e-6) return out;

  out.safe_input = bt.inputs[lo.T_ini];
  double obj = 0.0;
  for (std::size_t i = 0; i < lo.m; ++i) {
    for (std::size_t j = 0; j < lo.m; ++j) {
      const double r = prob.R.empty() ? (i == j ? 1.0 : 0.0) : prob.R(i, j);
      obj += (out.safe_input[i] - prob.u_learning[i]) * r *
             (out.safe_input[j] - prob.u_learning[j]);
    }
  }
  out.objective = obj;
  out.backup = std::move(bt);
  out.ok = true;
  return out;
}

SampleRun sample_backups(const DataArchive& archive, const PlantSpec& plant,
                         const ConstraintBoxes& boxes, const VRepSet& target, std::size_t n_steps,
                         std::uint64_t seed) {
  SampleRun run;
  if (n_steps == 0) return run;
  const std::size_t m = archive.m, p = archive.p, T_ini = archive.T_ini;
  Rng rng(seed);

  PlantLoop loop{plant, Vec(plant.n(), 0.0)};
  std::deque<std::pair<Vec, Vec>> history;  // (u, y), oldest first
  auto reset = [&] {
    loop.x.assign(plant.n(), 0.0);
    history.clear();
    for (std::size_t k = 0; k < T_ini; ++k) history.emplace_back(Vec(m, 0.0), Vec(p, 0.0));
  };
  reset();

  bool have_backup = false;
  BackupTrajectory last_backup;
  std::size_t backup_shift = 0;  // how far into last_backup the fallback is
  int consecutive_fail = 0;

  for (std::size_t t = 0; t < n_steps; ++t) {
    Vec u_l(m);
    for (std::size_t c = 0; c < m; ++c) u_l[c] = rng.uniform(boxes.u_lo[c], boxes.u_hi[c]);

    FilterProblem prob;
    prob.archive = &archive;
    prob.target = &target;
    prob.u_learning = u_l;
    prob.boxes = boxes;
    prob.xi_now.m = m;
    prob.xi_now.p = p;
    prob.xi_now.T_ini = T_ini;
    for (const auto& [u, y] : history)
      prob.xi_now.flat.insert(prob.xi_now.flat.end(), u.begin(), u.end());
    for (const auto& [u, y] : history)
      prob.xi_now.flat.insert(prob.xi_now.flat.end(), y.begin(), y.end());

    FilterOutcome fo = filter_step(prob);
    SampleStep step;
    step.t = static_cast<long>(t);
    step.u_l = u_l;
    step.status = fo.status;
    step.objective = fo.objective;

    Vec u_apply(m, 0.0);
    if (fo.ok) {
      u_apply = fo.safe_input;
      run.backups.push_back(fo.backup);
      last_backup = std::move(fo.backup);
      have_backup = true;
      backup_shift = 0;
      consecutive_fail = 0;
    } else {
      ++run.failures;
      ++consecutive_fail;
      step.fallback = true;
      ++backup_shift;
      const std::size_t idx = T_ini + backup_shift;
      if (have_backup && idx < last_backup.inputs.size()) u_apply = last_backup.inputs[idx];
    }

    step.u_safe = u_apply;
    step.y = loop.step(u_apply);
    history.pop_front();
    history.emplace_back(u_apply, step.y);

    if (consecutive_fail >= 3) {
      reset();
      have_backup = false;
      backup_shift = 0;
      consecutive_fail = 0;
      ++run.restarts;
      step.restarted = true;
    }
    run.log.push_back(std::move(step));
  }
  return run;
}

}  // namespace stpc
