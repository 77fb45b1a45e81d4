// SPDX-License-Identifier: Apache-2.0
#include "stpc/control.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace stpc {

namespace {

struct Layout {
  std::size_t na, m, p, L, T_ini, N;
  std::size_t off_u, off_y, off_lam;
};

Layout layout_of(const DataArchive& ar) {
  Layout lo;
  // Windows are parameterized by span-basis coefficients, not raw Hankel
  // columns: the basis is orthonormal and only rank-many wide, where the
  // column count is ~20x larger and flat in every null direction.
  lo.na = ar.rank;
  lo.m = ar.m;
  lo.p = ar.p;
  lo.L = ar.L;
  lo.T_ini = ar.T_ini;
  lo.N = ar.N;
  lo.off_u = lo.na;
  lo.off_y = lo.na + lo.m * lo.L;
  lo.off_lam = lo.off_y + lo.p * lo.L;
  return lo;
}

void append_common_rows(const DataArchive& ar, const Layout& lo, const ControllerState& state,
                        const ConstraintBoxes& boxes, SparseMat& aeq, Vec& beq, SparseMat& gin,
                        Vec& hin) {
  // Window consistency against the recorded data.
  const std::size_t nwin = (lo.m + lo.p) * lo.L;
  for (std::size_t r = 0; r < nwin; ++r) {
    std::vector<std::pair<std::size_t, double>> row;
    row.reserve(lo.na + 1);
    for (std::size_t j = 0; j < lo.na; ++j) {
      const double v = ar.span_basis(r, j);
      if (v != 0.0) row.emplace_back(j, v);
    }
    row.emplace_back(r < lo.m * lo.L ? lo.off_u + r : lo.off_y + (r - lo.m * lo.L), -1.0);
    aeq.append_row(row);
    beq.push_back(0.0);
  }
  // History pinning.
  std::size_t k = 0;
  for (const auto& [u, y] : state.history) {
    for (std::size_t c = 0; c < lo.m; ++c) {
      aeq.append_row({{lo.off_u + k * lo.m + c, 1.0}});
      beq.push_back(u[c]);
    }
    for (std::size_t c = 0; c < lo.p; ++c) {
      aeq.append_row({{lo.off_y + k * lo.p + c, 1.0}});
      beq.push_back(y[c]);
    }
    ++k;
  }
  // Boxes on the planned slots.
  for (std::size_t s = lo.T_ini; s < lo.L; ++s) {
    for (std::size_t c = 0; c < lo.m; ++c) {
      const std::size_t v = lo.off_u + s * lo.m + c;
      gin.append_row({{v, 1.0}});
      hin.push_back(boxes.u_hi[c]);
      gin.append_row({{v, -1.0}});
      hin.push_back(-boxes.u_lo[c]);
    }
    for (std::size_t c = 0; c < lo.p; ++c) {
      const std::size_t v = lo.off_y + s * lo.p + c;
      gin.append_row({{v, 1.0}});
      hin.push_back(boxes.y_hi[c]);
      gin.append_row({{v, -1.0}});
      hin.push_back(-boxes.y_lo[c]);
    }
  }
}

void fill_cost(const Layout& lo, const ControllerWeights& w, QuadraticProgram& qp) {
  for (std::size_t s = lo.T_ini; s < lo.L; ++s) {
    for (std::size_t i = 0; i < lo.m; ++i)
      for (std::size_t j = 0; j < lo.m; ++j)
        qp.P(lo.off_u + s * lo.m + i, lo.off_u + s * lo.m + j) += 2.0 * w.Q_u(i, j);
    for (std::size_t i = 0; i < lo.p; ++i)
      for (std::size_t j = 0; j < lo.p; ++j)
        qp.P(lo.off_y + s * lo.p + i, lo.off_y + s * lo.p + j) += 2.0 * w.Q_y(i, j);
  }
}

void check_state(const DataArchive& ar, const ControllerState& state) {
  if (state.history.size() != ar.T_ini)
    throw std::invalid_argument("controller: history must hold exactly T_ini pairs");
  for (const auto& [u, y] : state.history)
    if (u.size() != ar.m || y.size() != ar.p)
      throw std::invalid_argument("controller: history sample dimensions mismatch");
}

void check_weights(const DataArchive& ar, const ControllerWeights& w) {
  if (w.Q_y.rows != ar.p || w.Q_y.cols != ar.p || w.Q_u.rows != ar.m || w.Q_u.cols != ar.m)
    throw std::invalid_argument("controller: weight dimensions must be p x p and m x m");
}

}  // namespace

ExtendedState ControllerState::extended(std::size_t m, std::size_t p, std::size_t T_ini) const {
  ExtendedState xi;
  xi.m = m;
  xi.p = p;
  xi.T_ini = T_ini;
  for (const auto& [u, y] : history) xi.flat.insert(xi.flat.end(), u.begin(), u.end());
  for (const auto& [u, y] : history) xi.flat.insert(xi.flat.end(), y.begin(), y.end());
  return xi;
}

QuadraticProgram assemble_stddpc_qp(const DataArchive& archive, const NestedFamily& family,
                                    const ControllerState& state, const ControllerWeights& weights,
                                    const ConstraintBoxes& boxes) {
  check_state(archive, state);
  check_weights(archive, weights);
  if (state.l < 1) throw std::invalid_argument("controller: level 0 holds the equilibrium input");
  if (state.l >= family.size())
    throw std::invalid_argument("controller: level exceeds the family");
  if (state.w < 1 || state.w > archive.N - 1)
    throw std::invalid_argument("controller: window must lie in 1 ... N-1");

  const Layout lo = layout_of(archive);
  const std::size_t d = (lo.m + lo.p) * lo.T_ini;

  // Lambda block offsets for the constrained steps k = 1 ... N.
  std::vector<const VRepSet*> targets(lo.N + 1, nullptr);
  for (std::size_t k = 1; k <= lo.N; ++k)
    targets[k] = k < state.w ? &family.levels[state.l] : &family.levels[state.l - 1];
  std::vector<std::size_t> lam_off(lo.N + 1, 0);
  std::size_t z = lo.off_lam;
  for (std::size_t k = 1; k <= lo.N; ++k) {
    lam_off[k] = z;
    z += targets[k]->count();
  }

  QuadraticProgram qp;
  qp.z = z;
  qp.q.assign(z, 0.0);
  qp.P = Mat(z, z);
  fill_cost(lo, weights, qp);

  SparseMat aeq(0, z);
  Vec beq;
  SparseMat gin(0, z);
  Vec hin;
  append_common_rows(archive, lo, state, boxes, aeq, beq, gin, hin);

  for (std::size_t k = 1; k <= lo.N; ++k) {
    const VRepSet& tgt = *targets[k];
    // Window at step k equals a convex combination of the target vertices.
    for (std::size_t c = 0; c < d; ++c) {
      std::vector<std::pair<std::size_t, double>> row;
      row.reserve(tgt.count() + 1);
      std::size_t slot;
      if (c < lo.m * lo.T_ini) {
        const std::size_t j = c / lo.m, comp = c % lo.m;
        slot = lo.off_u + (k + j) * lo.m + comp;
      } else {
        const std::size_t cc = c - lo.m * lo.T_ini;
        const std::size_t j = cc / lo.p, comp = cc % lo.p;
        slot = lo.off_y + (k + j) * lo.p + comp;
      }
      row.emplace_back(slot, 1.0);
      for (std::size_t v = 0; v < tgt.count(); ++v)
        row.emplace_back(lam_off[k] + v, -tgt.vertices[v][c]);
      aeq.append_row(row);
      beq.push_back(0.0);
    }
    std::vector<std::pair<std::size_t, double>> sum_row;
    for (std::size_t v = 0; v < tgt.count(); ++v) sum_row.emplace_back(lam_off[k] + v, 1.0);
    aeq.append_row(sum_row);
    beq.push_back(1.0);
    for (std::size_t v = 0; v < tgt.count(); ++v) {
      gin.append_row({{lam_off[k] + v, -1.0}});
      hin.push_back(0.0);
    }
    // See kLamCurv: keeps the weight blocks strictly convex.
    for (std::size_t v = 0; v < tgt.count(); ++v)
      qp.P(lam_off[k] + v, lam_off[k] + v) += kLamCurv;
  }

  qp.Aeq = std::move(aeq);
  qp.beq = std::move(beq);
  qp.Gin = std::move(gin);
  qp.hin = std::move(hin);
  return qp;
}

QuadraticProgram assemble_ddpc_qp(const DataArchive& archive, const ControllerState& state,
                                  const ControllerWeights& weights, const ConstraintBoxes& boxes) {
  check_state(archive, state);
  check_weights(archive, weights);
  const Layout lo = layout_of(archive);
  QuadraticProgram qp;
  qp.z = lo.off_lam;
  qp.q.assign(qp.z, 0.0);
  qp.P = Mat(qp.z, qp.z);
  fill_cost(lo, weights, qp);
  SparseMat aeq(0, qp.z);
  Vec beq;
  SparseMat gin(0, qp.z);
  Vec hin;
  append_common_rows(archive, lo, state, boxes, aeq, beq, gin, hin);
  qp.Aeq = std::move(aeq);
  qp.beq = std::move(beq);
  qp.Gin = std::move(gin);
  qp.hin = std::move(hin);
  return qp;
}

StepDiagnostics plan_stddpc(const DataArchive& archive, const NestedFamily& family,
                            const ControllerState& state, const ControllerWeights& weights,
                            const ConstraintBoxes& boxes, Vec& u_out, const QpSettings& settings) {
  StepDiagnostics diag;
  const Layout lo = layout_of(archive);
  const auto t0 = std::chrono::steady_clock::now();
  QuadraticProgram qp = assemble_stddpc_qp(archive, family, state, weights, boxes);
  QpSolution sol = solve(qp, settings);
  diag.solve_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  diag.status = sol.status;
  diag.objective = sol.objective;
  u_out.assign(lo.m, 0.0);
  if (sol.status == QpStatus::optimal)
    for (std::size_t c = 0; c < lo.m; ++c) u_out[c] = sol.z[lo.off_u + lo.T_ini * lo.m + c];
  return diag;
}

void update_after_measurement(ControllerState& state, const NestedFamily& family, const Vec& u,
                              const Vec& y, StepDiagnostics& diag) {
  state.history.pop_front();
  state.history.emplace_back(u, y);
  const ExtendedState xi = state.extended(family.m, family.p, family.T_ini);
  const std::size_t old_l = state.l;
  auto lvl = family.smallest_level(xi.flat);
  // Membership can only improve along the closed loop; a miss here is
  // numerical noise at the set boundary, so the level is kept.
  if (lvl.has_value() && *lvl < state.l) state.l = *lvl;
  diag.level_decreased = state.l < old_l;
  const std::size_t N = family.N;
  if (state.w <= 1 || diag.level_decreased)
    state.w = N - 1;
  else
    state.w -= 1;
}

std::deque<std::pair<Vec, Vec>> synthesize_history(const PlantSpec& plant, const Vec& x0,
                                                   std::size_t T_ini) {
  if (x0.size() != plant.n())
    throw std::invalid_argument("history synthesis: x0 dimension mismatch");
  Lu alu = lu_factor(plant.A);
  if (!alu.ok)
    throw std::invalid_argument(
        "history synthesis: state matrix is singular; supply an explicit history");
  Vec x_pre = x0;
  for (std::size_t k = 0; k < T_ini; ++k) x_pre = alu.solve(x_pre);
  std::deque<std::pair<Vec, Vec>> hist;
  Vec x = x_pre;
  for (std::size_t k = 0; k < T_ini; ++k) {
    Vec y = matvec(plant.C, x);
    hist.emplace_back(Vec(plant.m(), 0.0), y);
    x = matvec(plant.A, x);
  }
  return hist;
}

namespace {

RunResult run_loop(const PlantSpec& plant, const DataArchive& archive, const NestedFamily* family,
                   const Vec& x0, const ControllerWeights& weights, const ConstraintBoxes& boxes,
                   const RunOptions& opt) {
  RunResult res;
  const std::size_t m = archive.m, p = archive.p, T_ini = archive.T_ini, N = archive.N;

  ControllerState state;
  state.history = synthesize_history(plant, x0, T_ini);
  PlantLoop loop{plant, x0};

  long max_steps = opt.max_steps;
  if (family != nullptr) {
    const ExtendedState xi0 = state.extended(m, p, T_ini);
    auto l0 = family->smallest_level(xi0.flat);
    if (!l0.has_value()) {
      res.failure_reason = "outside region of attraction";
      res.min_level_reached = -1;
      return res;
    }
    state.l = *l0;
    state.w = N - 1;
    res.min_level_reached = static_cast<long>(*l0);
    if (max_steps <= 0) max_steps = std::max<long>(static_cast<long>(*l0 * N), 1);
  } else {
    state.l = 0;
    state.w = N - 1;
    res.min_level_reached = -1;
    if (max_steps <= 0) max_steps = static_cast<long>(5 * N);
  }

  auto xi_norm = [&] {
    const ExtendedState xi = state.extended(m, p, T_ini);
    return norm_inf(xi.flat);
  };
  bool converged = xi_norm() <= opt.eps_conv;
  if (converged) {
    res.converged = true;
    res.steps = 0;
    if (family != nullptr) res.min_level_reached = 0;
  }

  for (long t = 0; t < max_steps; ++t) {
    LogRow row;
    row.t = t;
    // Log the level and window the planner saw at this step.
    row.level = family != nullptr ? static_cast<long>(state.l) : -1;
    row.w = static_cast<long>(state.w);
    Vec u(m, 0.0);
    StepDiagnostics diag;
    const bool hold = converged || (family != nullptr && state.l == 0);
    if (hold) {
      row.status = "hold";
    } else if (family != nullptr) {
      diag = plan_stddpc(archive, *family, state, weights, boxes, u);
      row.status = to_string(diag.status);
      row.objective = diag.objective;
      row.solve_ms = diag.solve_ms;
      if (diag.status != QpStatus::optimal) {
        res.any_infeasible = true;
        u.assign(m, 0.0);
      }
    } else {
      const auto t0 = std::chrono::steady_clock::now();
      QuadraticProgram qp = assemble_ddpc_qp(archive, state, weights, boxes);
      QpSolution sol = solve(qp, {});
      diag.solve_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      row.status = to_string(sol.status);
      row.objective = sol.objective;
      row.solve_ms = diag.solve_ms;
      if (sol.status == QpStatus::optimal) {
        const Layout lo = layout_of(archive);
        for (std::size_t c = 0; c < m; ++c) u[c] = sol.z[lo.off_u + T_ini * m + c];
      } else {
        res.any_infeasible = true;
      }
    }

    Vec y = loop.step(u);
    if (family != nullptr && !hold) {
      update_after_measurement(state, *family, u, y, diag);
      res.min_level_reached = std::min(res.min_level_reached, static_cast<long>(state.l));
    } else {
      state.history.pop_front();
      state.history.emplace_back(u, y);
    }

    row.u = u;
    row.y = y;
    for (double v : u) res.max_abs_u = std::max(res.max_abs_u, std::fabs(v));
    for (double v : y) res.max_abs_y = std::max(res.max_abs_y, std::fabs(v));
    res.log.push_back(std::move(row));

    if (!converged && xi_norm() <= opt.eps_conv) {
      converged = true;
      res.converged = true;
      res.steps = t + 1;
      if (family != nullptr) {
        state.l = 0;
        res.min_level_reached = 0;
      }
    }
  }
  if (!res.converged) res.steps = static_cast<long>(res.log.size());
  return res;
}

}  // namespace

RunResult run_closed_loop(const PlantSpec& plant, const DataArchive& archive,
                          const NestedFamily& family, const Vec& x0,
                          const ControllerWeights& weights, const ConstraintBoxes& boxes,
                          const RunOptions& opt) {
  return run_loop(plant, archive, &family, x0, weights, boxes, opt);
}

RunResult run_ddpc_baseline(const PlantSpec& plant, const DataArchive& archive, const Vec& x0,
                            const ControllerWeights& weights, const ConstraintBoxes& boxes,
                            const RunOptions& opt) {
  return run_loop(plant, archive, nullptr, x0, weights, boxes, opt);
}

}  // namespace stpc
