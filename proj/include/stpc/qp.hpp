// SPDX-License-Identifier: Apache-2.0
#pragma once
#include <utility>
#include <vector>

#include "stpc/linalg.hpp"

namespace stpc {

// Row-list sparse matrix: one (column, coefficient) list per row. Built by
// the QP assemblers; the solver packs it into whatever it needs.
struct SparseMat {
  std::size_t rows = 0, cols = 0;
  std::vector<std::vector<std::pair<std::size_t, double>>> row;
  SparseMat() = default;
  SparseMat(std::size_t r, std::size_t c) : rows(r), cols(c), row(r) {}
  void add(std::size_t i, std::size_t j, double v) { row[i].emplace_back(j, v); }
  std::size_t append_row() {
    row.emplace_back();
    return rows++;
  }
  std::size_t append_row(std::vector<std::pair<std::size_t, double>> entries) {
    row.push_back(std::move(entries));
    return rows++;
  }
  static SparseMat from_dense(const Mat& m, double drop = 0.0);
  Vec multiply(const Vec& x) const;
  void multiply_t_acc(const Vec& y, Vec& out) const;  // out += A^T y
};

enum class QpStatus { optimal, infeasible, max_iter };
const char* to_string(QpStatus s);

// min 1/2 z'Pz + q'z  s.t.  Aeq z = beq,  Gin z <= hin.
struct QuadraticProgram {
  std::size_t z = 0;
  Mat P;  // z x z symmetric PSD; empty means P = 0
  Vec q;
  SparseMat Aeq;
  Vec beq;
  SparseMat Gin;
  Vec hin;
};

struct QpSettings {
  double eps_eq = 1e-8;    // max equality violation accepted as optimal
  double eps_in = 1e-8;    // max inequality violation accepted as optimal
  double eps_stat = 1e-6;  // max stationarity residual accepted as optimal
  // Added to diag(P) before solving. Hankel-coefficient blocks carry entries
  // of order 1e4-1e5 (the equilibrated columns of an exploding trajectory are
  // nearly parallel, so representations need large cancelling weights); the
  // ridge has to sit far below 1/|alpha|^2 or it visibly tilts the objective.
  double ridge = 1e-13;
  int max_iter = 200000;   // total ADMM iteration budget
  double admm_eps = 1e-5;  // interior tolerance that triggers a polish attempt
};

struct QpSolution {
  Vec z;
  QpStatus status = QpStatus::max_iter;
  double objective = 0.0;        // 1/2 z'Pz + q'z at z, without the ridge
  double primal_residual = 0.0;  // max(||Aeq z - beq||_inf, max(Gin z - hin)+)
  double dual_residual = 0.0;    // ||(P + ridge I) z + q + Aeq' y_eq + Gin' y_in||_inf
  int iters = 0;
  bool polished = false;
  Vec y_eq, y_in;  // multipliers (diagnostic)
};

// Operator-splitting solve with an active-set polish; `optimal` is granted
// only when the true unscaled KKT residuals meet the settings.
QpSolution solve(const QuadraticProgram& qp, const QpSettings& s = {});

QpSolution solve_lp(const Vec& q, const SparseMat& aeq, const Vec& beq, const SparseMat& gin,
                    const Vec& hin, const QpSettings& s = {});

}  // namespace stpc
