// SPDX-License-Identifier: Apache-2.0
//
// Operator-splitting QP solver. The ADMM core follows the usual
// split  min 1/2 x'Px + q'x  s.t.  l <= Ax <= u  with per-row penalties;
// rows with a single nonzero are folded into variable bounds so the
// x-update matrix is diagonal-plus-low-rank and solves through a small
// Woodbury factorization. The loop runs at a moderate internal tolerance;
// an active-set polish (regularized KKT + iterative refinement, with
// wrong-sign drops and violated-row adds) then drives the candidate to
// machine precision. `optimal` is granted only on true unscaled residuals,
// never on the solver's internal stopping test.
#include "stpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "stpc/kernels.hpp"

namespace stpc {

SparseMat SparseMat::from_dense(const Mat& m, double drop) {
  SparseMat s(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j)
      if (std::fabs(m(i, j)) > drop) s.add(i, j, m(i, j));
  return s;
}

Vec SparseMat::multiply(const Vec& x) const {
  Vec y(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (const auto& [j, v] : row[i]) acc += v * x[j];
    y[i] = acc;
  }
  return y;
}

void SparseMat::multiply_t_acc(const Vec& y, Vec& out) const {
  for (std::size_t i = 0; i < rows; ++i) {
    const double w = y[i];
    if (w == 0.0) continue;
    for (const auto& [j, v] : row[i]) out[j] += v * w;
  }
}

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::max_iter: return "max_iter";
  }
  return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct GenRow {
  std::vector<std::pair<std::size_t, double>> e;
  double lo = -kInf, hi = kInf;
  double scale = 1.0;  // original row = scale * stored row
  int kind = 0;        // 0 = equality source, 1 = inequality source
  std::size_t orig = 0;
};

struct VarBound {
  double lo = -kInf, hi = kInf;
  int lo_kind = -1, hi_kind = -1;  // provenance for multiplier mapping
  std::size_t lo_idx = 0, hi_idx = 0;
  double lo_coef = 1.0, hi_coef = 1.0;
  bool finite() const { return lo > -kInf || hi < kInf; }
};

void validate_program(const QuadraticProgram& qp) {
  const std::size_t z = qp.z;
  if (qp.q.size() != z) throw std::invalid_argument("qp: q length must equal z");
  if (!qp.P.empty()) {
    if (qp.P.rows != z || qp.P.cols != z) throw std::invalid_argument("qp: P must be z x z");
    for (std::size_t i = 0; i < z; ++i) {
      for (std::size_t j = i + 1; j < z; ++j) {
        const double d = std::fabs(qp.P(i, j) - qp.P(j, i));
        if (d > 1e-12 * std::max({1.0, std::fabs(qp.P(i, j)), std::fabs(qp.P(j, i))}))
          throw std::invalid_argument("qp: P not symmetric");
      }
      if (qp.P(i, i) < -1e-10) throw std::invalid_argument("qp: P not positive semidefinite");
    }
    if (z <= 64) {
      Vec ev = sym_eigenvalues(qp.P);
      const double scale = std::max(1.0, std::fabs(ev.empty() ? 0.0 : ev.back()));
      if (!ev.empty() && ev.front() < -1e-10 * scale)
        throw std::invalid_argument("qp: P not positive semidefinite");
    }
  }
  if (qp.Aeq.rows != qp.beq.size()) throw std::invalid_argument("qp: Aeq/beq row mismatch");
  if (qp.Gin.rows != qp.hin.size()) throw std::invalid_argument("qp: Gin/hin row mismatch");
  if (qp.Aeq.rows > 0 && qp.Aeq.cols != z) throw std::invalid_argument("qp: Aeq column mismatch");
  if (qp.Gin.rows > 0 && qp.Gin.cols != z) throw std::invalid_argument("qp: Gin column mismatch");
}

class Solver {
 public:
  Solver(const QuadraticProgram& qp, const QpSettings& st) : qp_(qp), s_(st), z_(qp.z) {
    pdiag0_.assign(z_, 0.0);
    is_diag_ = true;
    if (!qp.P.empty()) {
      for (std::size_t i = 0; i < z_; ++i) pdiag0_[i] = qp.P(i, i);
      for (std::size_t i = 0; i < z_ && is_diag_; ++i)
        for (std::size_t j = 0; j < z_; ++j)
          if (i != j && qp.P(i, j) != 0.0) { is_diag_ = false; break; }
    }
    vb_.resize(z_);
    const double feas_tol = std::min(s_.eps_eq, s_.eps_in);
    for (std::size_t i = 0; i < qp.Aeq.rows && !trivially_infeasible_; ++i)
      add_row(qp.Aeq.row[i], qp.beq[i], qp.beq[i], 0, i);
    for (std::size_t i = 0; i < qp.Gin.rows && !trivially_infeasible_; ++i)
      add_row(qp.Gin.row[i], -kInf, qp.hin[i], 1, i);
    for (std::size_t j = 0; j < z_ && !trivially_infeasible_; ++j) {
      if (vb_[j].lo > vb_[j].hi) {
        if (vb_[j].lo - vb_[j].hi <= feas_tol) {
          const double mid = 0.5 * (vb_[j].lo + vb_[j].hi);
          vb_[j].lo = vb_[j].hi = mid;
        } else {
          trivially_infeasible_ = true;
        }
      }
    }
    for (std::size_t j = 0; j < z_; ++j)
      if (vb_[j].finite()) bvars_.push_back(j);
    nrows_ = grows_.size() + bvars_.size();
  }

  QpSolution run() {
    QpSolution out;
    out.z.assign(z_, 0.0);
    out.y_eq.assign(qp_.Aeq.rows, 0.0);
    out.y_in.assign(qp_.Gin.rows, 0.0);
    if (trivially_infeasible_) {
      out.status = QpStatus::infeasible;
      return out;
    }
    if (nrows_ == 0) return unconstrained();
    return admm();
  }

 private:
  const QuadraticProgram& qp_;
  QpSettings s_;
  std::size_t z_;
  Vec pdiag0_;
  bool is_diag_ = true;
  std::vector<GenRow> grows_;
  std::vector<VarBound> vb_;
  std::vector<std::size_t> bvars_;
  std::size_t nrows_ = 0;
  bool trivially_infeasible_ = false;

  // ADMM state
  Vec rho_;           // per row (general first, then bound rows)
  double rho_base_ = 0.1;
  static constexpr double kSigma = 1e-6;
  static constexpr double kAlpha = 1.6;
  Vec dvec_;          // diagonal of the x-update matrix
  Cholesky gchol_;    // Woodbury inner factor (general rows)
  Cholesky mdense_;   // dense path factor
  Vec x_, svec_, yvec_;

  void add_row(const std::vector<std::pair<std::size_t, double>>& raw, double lo, double hi,
               int kind, std::size_t orig) {
    // compress duplicates, drop zeros
    std::vector<std::pair<std::size_t, double>> e;
    for (const auto& [j, v] : raw) {
      if (v == 0.0) continue;
      bool merged = false;
      for (auto& [ej, ev] : e)
        if (ej == j) { ev += v; merged = true; break; }
      if (!merged) e.emplace_back(j, v);
    }
    std::erase_if(e, [](const auto& t) { return t.second == 0.0; });
    std::sort(e.begin(), e.end());
    if (e.empty()) {
      const double feas_tol = std::min(s_.eps_eq, s_.eps_in);
      if (lo > feas_tol || hi < -feas_tol) trivially_infeasible_ = true;
      return;
    }
    if (e.size() == 1) {
      const auto [j, c] = e[0];
      double nl = (c > 0 ? lo : hi) / c;
      double nh = (c > 0 ? hi : lo) / c;
      VarBound& b = vb_[j];
      if (nl > b.lo) { b.lo = nl; b.lo_kind = kind; b.lo_idx = orig; b.lo_coef = c; }
      if (nh < b.hi) { b.hi = nh; b.hi_kind = kind; b.hi_idx = orig; b.hi_coef = c; }
      return;
    }
    GenRow r;
    double mx = 0.0;
    for (const auto& [j, v] : e) mx = std::max(mx, std::fabs(v));
    r.scale = mx;
    r.e = std::move(e);
    for (auto& [j, v] : r.e) v /= mx;
    r.lo = lo > -kInf ? lo / mx : -kInf;
    r.hi = hi < kInf ? hi / mx : kInf;
    r.kind = kind;
    r.orig = orig;
    grows_.push_back(std::move(r));
  }

  double ptilde_diag(std::size_t i) const { return pdiag0_[i] + s_.ridge; }

  // st = (P + ridge I) x + q
  Vec stationarity_base(const Vec& x) const {
    Vec st(z_);
    if (is_diag_) {
      for (std::size_t i = 0; i < z_; ++i) st[i] = ptilde_diag(i) * x[i] + qp_.q[i];
    } else {
      kernels::gemv(qp_.P.a.data(), z_, z_, x.data(), st.data());
      for (std::size_t i = 0; i < z_; ++i) st[i] += s_.ridge * x[i] + qp_.q[i];
    }
    return st;
  }

  double objective_at(const Vec& x) const {
    double obj = dot(qp_.q, x);
    if (!qp_.P.empty()) {
      if (is_diag_) {
        for (std::size_t i = 0; i < z_; ++i) obj += 0.5 * pdiag0_[i] * x[i] * x[i];
      } else {
        Vec px = matvec(qp_.P, x);
        obj += 0.5 * dot(px, x);
      }
    }
    return obj;
  }

  // True residuals against the original program; multipliers must already be
  // mapped back to the original rows.
  void true_residuals(const Vec& x, const Vec& y_eq, const Vec& y_in, double& r_eq, double& r_in,
                      double& r_st) const {
    r_eq = 0.0;
    Vec ax = qp_.Aeq.multiply(x);
    for (std::size_t i = 0; i < ax.size(); ++i) r_eq = std::max(r_eq, std::fabs(ax[i] - qp_.beq[i]));
    r_in = 0.0;
    Vec gx = qp_.Gin.multiply(x);
    for (std::size_t i = 0; i < gx.size(); ++i) r_in = std::max(r_in, gx[i] - qp_.hin[i]);
    r_in = std::max(r_in, 0.0);
    Vec st = stationarity_base(x);
    qp_.Aeq.multiply_t_acc(y_eq, st);
    qp_.Gin.multiply_t_acc(y_in, st);
    r_st = norm_inf(st);
  }

  // Map internal multipliers (general rows yg, bound rows mu) to original rows.
  void map_multipliers(const Vec& yg, const Vec& mu, Vec& y_eq, Vec& y_in) const {
    y_eq.assign(qp_.Aeq.rows, 0.0);
    y_in.assign(qp_.Gin.rows, 0.0);
    for (std::size_t i = 0; i < grows_.size(); ++i) {
      const GenRow& r = grows_[i];
      const double y = yg[i] / r.scale;
      if (r.kind == 0) y_eq[r.orig] += y;
      else y_in[r.orig] += y;
    }
    for (std::size_t b = 0; b < bvars_.size(); ++b) {
      const VarBound& vb = vb_[bvars_[b]];
      const double m = mu[b];
      if (m == 0.0) continue;
      // An equality pin absorbs either sign; otherwise the sign picks a side.
      if (vb.lo == vb.hi && vb.lo_kind == 0) {
        y_eq[vb.lo_idx] += m / vb.lo_coef;
      } else if (vb.lo == vb.hi && vb.hi_kind == 0) {
        y_eq[vb.hi_idx] += m / vb.hi_coef;
      } else if (m > 0.0 && vb.hi_kind >= 0) {
        if (vb.hi_kind == 0) y_eq[vb.hi_idx] += m / vb.hi_coef;
        else y_in[vb.hi_idx] += m / vb.hi_coef;
      } else if (m < 0.0 && vb.lo_kind >= 0) {
        if (vb.lo_kind == 0) y_eq[vb.lo_idx] += m / vb.lo_coef;
        else y_in[vb.lo_idx] += m / vb.lo_coef;
      }
    }
  }

  QpSolution package(const Vec& x, const Vec& yg, const Vec& mu, int iters, bool polished) const {
    QpSolution out;
    out.z = x;
    out.iters = iters;
    out.polished = polished;
    map_multipliers(yg, mu, out.y_eq, out.y_in);
    double r_eq, r_in, r_st;
    true_residuals(x, out.y_eq, out.y_in, r_eq, r_in, r_st);
    out.primal_residual = std::max(r_eq, r_in);
    out.dual_residual = r_st;
    out.objective = objective_at(x);
    out.status = (r_eq <= s_.eps_eq && r_in <= s_.eps_in && r_st <= s_.eps_stat)
                     ? QpStatus::optimal
                     : QpStatus::max_iter;
    return out;
  }

  QpSolution unconstrained() {
    Vec x(z_, 0.0);
    if (is_diag_) {
      for (std::size_t i = 0; i < z_; ++i) x[i] = -qp_.q[i] / ptilde_diag(i);
    } else {
      Mat m = qp_.P;
      for (std::size_t i = 0; i < z_; ++i) m(i, i) += s_.ridge;
      Cholesky c = llt_factor(m);
      if (!c.ok) throw std::runtime_error("qp: regularized P factorization failed");
      Vec nq(z_);
      for (std::size_t i = 0; i < z_; ++i) nq[i] = -qp_.q[i];
      x = c.solve(nq);
    }
    return package(x, Vec(grows_.size(), 0.0), Vec(bvars_.size(), 0.0), 0, false);
  }

  bool row_is_eq(std::size_t r) const {
    if (r < grows_.size()) return grows_[r].lo == grows_[r].hi;
    const VarBound& b = vb_[bvars_[r - grows_.size()]];
    return b.lo == b.hi;
  }
  double row_lo(std::size_t r) const {
    return r < grows_.size() ? grows_[r].lo : vb_[bvars_[r - grows_.size()]].lo;
  }
  double row_hi(std::size_t r) const {
    return r < grows_.size() ? grows_[r].hi : vb_[bvars_[r - grows_.size()]].hi;
  }
  double row_dot(std::size_t r, const Vec& x) const {
    if (r < grows_.size()) {
      double acc = 0.0;
      for (const auto& [j, v] : grows_[r].e) acc += v * x[j];
      return acc;
    }
    return x[bvars_[r - grows_.size()]];
  }
  void row_scatter(std::size_t r, double w, Vec& out) const {
    if (w == 0.0) return;
    if (r < grows_.size()) {
      for (const auto& [j, v] : grows_[r].e) out[j] += v * w;
    } else {
      out[bvars_[r - grows_.size()]] += w;
    }
  }

  void assign_rho() {
    rho_.assign(nrows_, 0.0);
    for (std::size_t r = 0; r < nrows_; ++r)
      rho_[r] = row_is_eq(r) ? 1e3 * rho_base_ : rho_base_;
  }

  void factorize() {
    assign_rho();
    const std::size_t g = grows_.size();
    if (is_diag_) {
      dvec_.assign(z_, 0.0);
      for (std::size_t i = 0; i < z_; ++i) dvec_[i] = ptilde_diag(i) + kSigma;
      for (std::size_t b = 0; b < bvars_.size(); ++b) dvec_[bvars_[b]] += rho_[g + b];
      if (g > 0) {
        Mat gm(g, g);
        Vec buf(z_);
        for (std::size_t i = 0; i < g; ++i) {
          std::fill(buf.begin(), buf.end(), 0.0);
          for (const auto& [j, v] : grows_[i].e) buf[j] = v / dvec_[j];
          for (std::size_t k = i; k < g; ++k) {
            double acc = 0.0;
            for (const auto& [j, v] : grows_[k].e) acc += v * buf[j];
            gm(i, k) = acc;
            gm(k, i) = acc;
          }
          gm(i, i) += 1.0 / rho_[i];
        }
        gchol_ = llt_factor(gm);
        if (!gchol_.ok) throw std::runtime_error("qp: Woodbury factorization failed");
      }
    } else {
      Mat m = qp_.P;
      for (std::size_t i = 0; i < z_; ++i) m(i, i) += s_.ridge + kSigma;
      for (std::size_t r = 0; r < nrows_; ++r) {
        if (r < g) {
          for (const auto& [j1, v1] : grows_[r].e)
            for (const auto& [j2, v2] : grows_[r].e) m(j1, j2) += rho_[r] * v1 * v2;
        } else {
          const std::size_t j = bvars_[r - g];
          m(j, j) += rho_[r];
        }
      }
      mdense_ = llt_factor(m);
      if (!mdense_.ok) throw std::runtime_error("qp: x-update factorization failed");
    }
  }

  Vec woodbury(const Vec& rhs) const {
    const std::size_t g = grows_.size();
    Vec t(z_);
    for (std::size_t i = 0; i < z_; ++i) t[i] = rhs[i] / dvec_[i];
    if (g == 0) return t;
    Vec u(g);
    for (std::size_t i = 0; i < g; ++i) u[i] = row_dot(i, t);
    Vec w = gchol_.solve(u);
    Vec corr(z_, 0.0);
    for (std::size_t i = 0; i < g; ++i) row_scatter(i, w[i], corr);
    for (std::size_t i = 0; i < z_; ++i) t[i] -= corr[i] / dvec_[i];
    return t;
  }

  Vec xsolve(const Vec& rhs) const {
    if (!is_diag_) return mdense_.solve(rhs);
    const std::size_t g = grows_.size();
    Vec x = woodbury(rhs);
    // The inner Gram system carries 1/d factors of order 1/sigma, so its
    // backward error lands multiplied by 1e6; refine against the true
    // operator or the dual residual floors out around that noise level.
    const double rn0 = norm_inf(rhs);
    for (int ref = 0; ref < 3; ++ref) {
      Vec r(z_);
      for (std::size_t i = 0; i < z_; ++i) r[i] = dvec_[i] * x[i];
      for (std::size_t i = 0; i < g; ++i) row_scatter(i, rho_[i] * row_dot(i, x), r);
      double rn = 0.0;
      for (std::size_t i = 0; i < z_; ++i) {
        r[i] = rhs[i] - r[i];
        rn = std::max(rn, std::fabs(r[i]));
      }
      if (!std::isfinite(rn) || rn <= 1e-14 * (1.0 + rn0)) break;
      Vec dx = woodbury(r);
      for (std::size_t i = 0; i < z_; ++i) x[i] += dx[i];
    }
    return x;
  }

  struct Candidate {
    Vec x, yg, mu;
  };

  QpSolution admm() {
    factorize();
    x_.assign(z_, 0.0);
    svec_.assign(nrows_, 0.0);
    yvec_.assign(nrows_, 0.0);
    for (std::size_t r = 0; r < nrows_; ++r)
      svec_[r] = std::clamp(0.0, row_lo(r), row_hi(r));

    const std::size_t g = grows_.size();
    double admm_eps = s_.admm_eps;
    Vec y_prev = yvec_;
    int cert_hits = 0;
    int resets = 0;
    Vec rhs(z_), axt(nrows_);

    int iter = 0;
    QpSolution best;
    bool have_best = false;
    double best_score = kInf;
    // Best raw iterate seen at any checkpoint, kept for a final polish: when
    // the iteration later diverges (pathological scaling), the last healthy
    // iterate still carries a usable active-set guess.
    Candidate best_cand;
    bool have_cand = false;
    double cand_score = kInf;
    double polished_at = kInf;

    while (iter < s_.max_iter) {
      ++iter;
      // x-update: (P~ + sigma I + A' R A) xt = sigma x - q + A'(R s - y)
      for (std::size_t i = 0; i < z_; ++i) rhs[i] = kSigma * x_[i] - qp_.q[i];
      for (std::size_t r = 0; r < nrows_; ++r) row_scatter(r, rho_[r] * svec_[r] - yvec_[r], rhs);
      Vec xt = xsolve(rhs);
      for (std::size_t r = 0; r < nrows_; ++r) axt[r] = row_dot(r, xt);
      for (std::size_t r = 0; r < nrows_; ++r) {
        const double v = kAlpha * axt[r] + (1.0 - kAlpha) * svec_[r];
        const double sn = std::clamp(v + yvec_[r] / rho_[r], row_lo(r), row_hi(r));
        yvec_[r] += rho_[r] * (v - sn);
        svec_[r] = sn;
      }
      for (std::size_t i = 0; i < z_; ++i) x_[i] = kAlpha * xt[i] + (1.0 - kAlpha) * x_[i];

      if (iter % 25 != 0 && iter != s_.max_iter) continue;

      // residuals of the splitting
      double rp = 0.0, ax_norm = 0.0;
      for (std::size_t r = 0; r < nrows_; ++r) {
        const double ax = row_dot(r, x_);
        rp = std::max(rp, std::fabs(ax - svec_[r]));
        ax_norm = std::max(ax_norm, std::fabs(ax));
      }
      Vec st = stationarity_base(x_);
      for (std::size_t r = 0; r < nrows_; ++r) row_scatter(r, yvec_[r], st);
      const double rd = norm_inf(st);
      const double s_norm = norm_inf(svec_);
      const double q_norm = norm_inf(qp_.q);

      if (!std::isfinite(rp) || rp > 1e13 || norm_inf(x_) > 1e13) {
        if (++resets > 3) break;
        x_.assign(z_, 0.0);
        yvec_.assign(nrows_, 0.0);
        for (std::size_t r = 0; r < nrows_; ++r) svec_[r] = std::clamp(0.0, row_lo(r), row_hi(r));
        rho_base_ = std::min(rho_base_ * 10.0, 1e3);
        factorize();
        y_prev = yvec_;
        continue;
      }

      // primal infeasibility certificate
      {
        Vec dy(nrows_);
        double ndy = 0.0;
        for (std::size_t r = 0; r < nrows_; ++r) {
          dy[r] = yvec_[r] - y_prev[r];
          ndy = std::max(ndy, std::fabs(dy[r]));
        }
        y_prev = yvec_;
        if (ndy > 1e-14 * std::max(1.0, norm_inf(yvec_))) {
          for (std::size_t r = 0; r < nrows_; ++r) dy[r] /= ndy;
          bool valid = true;
          double support = 0.0;
          for (std::size_t r = 0; r < nrows_ && valid; ++r) {
            if (dy[r] > 0.0) {
              if (row_hi(r) == kInf) { if (dy[r] > 1e-10) valid = false; }
              else support += row_hi(r) * dy[r];
            } else if (dy[r] < 0.0) {
              if (row_lo(r) == -kInf) { if (dy[r] < -1e-10) valid = false; }
              else support += row_lo(r) * dy[r];
            }
          }
          Vec atd(z_, 0.0);
          for (std::size_t r = 0; r < nrows_; ++r) row_scatter(r, dy[r], atd);
          if (valid && norm_inf(atd) <= 1e-8 && support <= -1e-8) {
            if (++cert_hits >= 2) {
              QpSolution out;
              out.z = x_;
              out.status = QpStatus::infeasible;
              out.iters = iter;
              out.y_eq.assign(qp_.Aeq.rows, 0.0);
              out.y_in.assign(qp_.Gin.rows, 0.0);
              return out;
            }
          } else {
            cert_hits = 0;
          }
        }
      }

      const double score = std::max(rp, rd * 1e-3);
      if (!have_cand || score < cand_score) {
        best_cand = Candidate{x_, Vec(yvec_.begin(), yvec_.begin() + g),
                              Vec(yvec_.begin() + g, yvec_.end())};
        have_cand = true;
        cand_score = score;
      }

      const double eps_pri = admm_eps * (1.0 + std::max(ax_norm, s_norm));
      const double eps_dua = admm_eps * (1.0 + q_norm + norm_inf(x_));
      if ((rp <= eps_pri && rd <= eps_dua) || iter >= s_.max_iter) {
        Vec yg(yvec_.begin(), yvec_.begin() + g);
        Vec mu(yvec_.begin() + g, yvec_.end());
        Candidate cand{x_, yg, mu};
        Candidate pol;
        bool pol_ok = polish(cand, pol);
        polished_at = score;
        if (pol_ok) {
          QpSolution out = package(pol.x, pol.yg, pol.mu, iter, true);
          if (out.status == QpStatus::optimal) return out;
          score_best(out, best, have_best, best_score);
        }
        QpSolution raw = package(cand.x, cand.yg, cand.mu, iter, false);
        if (raw.status == QpStatus::optimal) return raw;
        score_best(raw, best, have_best, best_score);
        if (iter >= s_.max_iter) break;
        admm_eps = std::max(admm_eps / 20.0, 1e-11);
      } else if (iter % 500 == 0 && have_cand && cand_score < 0.2 * polished_at) {
        // The tolerance gate tightens twentyfold after every failed polish,
        // so on slow tails it stops firing long before the iterate stops
        // improving. Retry whenever the best candidate has clearly moved.
        Candidate pol;
        polished_at = cand_score;
        if (polish(best_cand, pol)) {
          QpSolution out = package(pol.x, pol.yg, pol.mu, iter, true);
          if (out.status == QpStatus::optimal) return out;
          score_best(out, best, have_best, best_score);
        }
      }

      // adaptive penalty
      const double rp_rel = rp / std::max({ax_norm, s_norm, 1e-10});
      const double rd_rel = rd / std::max({q_norm, norm_inf(x_), 1e-10});
      if (rp_rel > 1e-14 && rd_rel > 1e-14) {
        const double ratio = std::sqrt(rp_rel / rd_rel);
        if (ratio > 5.0 || ratio < 0.2) {
          // Upper clamp: equality rows run at 1e3*rho_base, and beyond
          // rho ~ 1e6 the x-update loses enough digits (1/sigma scale in the
          // reduced system) that refinement stops containing the error.
          rho_base_ = std::clamp(rho_base_ * ratio, 1e-6, 1e3);
          const Vec s_old = svec_;
          factorize();
          svec_ = s_old;
        }
      }
    }

    if (have_cand) {
      Candidate pol;
      if (polish(best_cand, pol)) {
        QpSolution out = package(pol.x, pol.yg, pol.mu, iter, true);
        if (out.status == QpStatus::optimal) return out;
        score_best(out, best, have_best, best_score);
      }
      QpSolution raw = package(best_cand.x, best_cand.yg, best_cand.mu, iter, false);
      if (raw.status == QpStatus::optimal) return raw;
      score_best(raw, best, have_best, best_score);
    }
    if (have_best) return best;
    Vec yg(yvec_.begin(), yvec_.begin() + static_cast<long>(g));
    Vec mu(yvec_.begin() + static_cast<long>(g), yvec_.end());
    return package(x_, yg, mu, iter, false);
  }

  static void score_best(const QpSolution& cand, QpSolution& best, bool& have, double& best_score) {
    const double score = std::max(cand.primal_residual, cand.dual_residual * 1e-3);
    if (!have || score < best_score) {
      best = cand;
      have = true;
      best_score = score;
    }
  }

  // Active-set polish. Fixes variables at active bounds, solves the reduced
  // regularized KKT system for the rest, refines against the unregularized
  // system, then drops wrong-sign multipliers / adds violated rows.
  bool polish(const Candidate& warm, Candidate& out) const {
    const std::size_t g = grows_.size();
    const std::size_t nb = bvars_.size();
    constexpr double kDelta = 1e-9;
    constexpr double kDualTol = 1e-9;
    constexpr double kActTol = 1e-6;

    std::vector<int> gact(g, 0);  // 0 inactive, +1 upper, -1 lower, 2 equality
    for (std::size_t i = 0; i < g; ++i) {
      const GenRow& r = grows_[i];
      if (r.lo == r.hi) { gact[i] = 2; continue; }
      const double ax = row_dot(i, warm.x);
      if (r.hi < kInf && (warm.yg[i] > kDualTol || r.hi - ax < kActTol * (1.0 + std::fabs(r.hi))))
        gact[i] = 1;
      else if (r.lo > -kInf && (warm.yg[i] < -kDualTol || ax - r.lo < kActTol * (1.0 + std::fabs(r.lo))))
        gact[i] = -1;
    }
    std::vector<int> bact(nb, 0);
    for (std::size_t b = 0; b < nb; ++b) {
      const VarBound& vb = vb_[bvars_[b]];
      if (vb.lo == vb.hi) { bact[b] = 2; continue; }
      const double xv = warm.x[bvars_[b]];
      if (vb.hi < kInf && (warm.mu[b] > kDualTol || vb.hi - xv < kActTol * (1.0 + std::fabs(vb.hi))))
        bact[b] = 1;
      else if (vb.lo > -kInf && (warm.mu[b] < -kDualTol || xv - vb.lo < kActTol * (1.0 + std::fabs(vb.lo))))
        bact[b] = -1;
    }

    Vec x(z_), yg(g), mu(nb);
    std::vector<std::size_t> bidx_of_var(z_, SIZE_MAX);
    for (std::size_t b = 0; b < nb; ++b) bidx_of_var[bvars_[b]] = b;

    // Single-change bookkeeping. A constraint whose drop is answered by an
    // immediate re-add is degenerate (its multiplier came out of a rank-
    // deficient system); freeze it for the rest of the call.
    std::vector<char> gdropped(g, 0), bdropped(nb, 0), gtabu(g, 0), btabu(nb, 0);

    for (int pass = 0; pass < 100; ++pass) {
      std::vector<char> fixed(z_, 0);
      Vec fixval(z_, 0.0);
      for (std::size_t b = 0; b < nb; ++b) {
        if (bact[b] == 0) continue;
        const VarBound& vb = vb_[bvars_[b]];
        fixed[bvars_[b]] = 1;
        fixval[bvars_[b]] = bact[b] == 1 ? vb.hi : (bact[b] == -1 ? vb.lo : vb.lo);
      }
      std::vector<std::size_t> freev;
      freev.reserve(z_);
      std::vector<std::size_t> pos(z_, SIZE_MAX);
      for (std::size_t j = 0; j < z_; ++j)
        if (!fixed[j]) { pos[j] = freev.size(); freev.push_back(j); }

      std::vector<std::size_t> act;
      for (std::size_t i = 0; i < g; ++i)
        if (gact[i] != 0) act.push_back(i);

      // Rows whose free support vanished must already be satisfied by the
      // fixed values; otherwise this active set is wrong.
      std::vector<std::size_t> act_used;
      for (std::size_t i : act) {
        bool has_free = false;
        for (const auto& [j, v] : grows_[i].e)
          if (!fixed[j] && v != 0.0) { has_free = true; break; }
        if (has_free) { act_used.push_back(i); continue; }
        double ax = 0.0;
        for (const auto& [j, v] : grows_[i].e) ax += v * fixval[j];
        const double tgt = gact[i] == 1 ? grows_[i].hi : grows_[i].lo;
        if (std::fabs(ax - tgt) > 1e-6 * (1.0 + std::fabs(tgt))) return false;
      }

      const std::size_t nf = freev.size(), na = act_used.size();
      const std::size_t dim = nf + na;
      if (dim == 0) {
        x = fixval;
        std::fill(yg.begin(), yg.end(), 0.0);
      } else {
        Mat kreg(dim, dim), k0(dim, dim);
        Vec rhs(dim, 0.0);
        for (std::size_t fi = 0; fi < nf; ++fi) {
          const std::size_t j = freev[fi];
          if (is_diag_) {
            k0(fi, fi) = ptilde_diag(j);
            rhs[fi] = -qp_.q[j];
          } else {
            for (std::size_t fj = 0; fj < nf; ++fj)
              k0(fi, fj) = qp_.P(j, freev[fj]) + (fi == fj ? s_.ridge : 0.0);
            double acc = -qp_.q[j];
            for (std::size_t j2 = 0; j2 < z_; ++j2)
              if (fixed[j2]) acc -= qp_.P(j, j2) * fixval[j2];
            rhs[fi] = acc;
          }
        }
        for (std::size_t ai = 0; ai < na; ++ai) {
          const std::size_t i = act_used[ai];
          double b = gact[i] == 1 ? grows_[i].hi : grows_[i].lo;
          for (const auto& [j, v] : grows_[i].e) {
            if (fixed[j]) { b -= v * fixval[j]; continue; }
            k0(pos[j], nf + ai) = v;
            k0(nf + ai, pos[j]) = v;
          }
          rhs[nf + ai] = b;
        }
        kreg = k0;
        for (std::size_t i = 0; i < nf; ++i) kreg(i, i) += kDelta;
        for (std::size_t i = nf; i < dim; ++i) kreg(i, i) -= kDelta;
        Lu fac = lu_factor(kreg);
        if (!fac.ok) return false;
        Vec sol = fac.solve(rhs);
        // Refine against the unregularized system, but monotonically: a
        // degenerate active set makes k0 singular, and blind refinement then
        // pumps null-space components up by 1/kDelta per pass.
        Vec best_sol = sol;
        double best_rn = kInf;
        for (int ref = 0; ref < 10; ++ref) {
          Vec res = matvec(k0, sol);
          double rn = 0.0;
          for (std::size_t i = 0; i < dim; ++i) {
            res[i] = rhs[i] - res[i];
            rn = std::max(rn, std::fabs(res[i]));
          }
          if (std::isfinite(rn) && rn < best_rn) {
            best_rn = rn;
            best_sol = sol;
          } else if (ref > 0) {
            break;
          }
          if (rn <= 1e-13 * (1.0 + norm_inf(rhs))) break;
          Vec d = fac.solve(res);
          for (std::size_t i = 0; i < dim; ++i) sol[i] += d[i];
        }
        sol = std::move(best_sol);
        x = fixval;
        for (std::size_t fi = 0; fi < nf; ++fi) x[freev[fi]] = sol[fi];
        std::fill(yg.begin(), yg.end(), 0.0);
        for (std::size_t ai = 0; ai < na; ++ai) yg[act_used[ai]] = sol[nf + ai];
      }

      // Recover bound multipliers from stationarity on the fixed variables.
      Vec st = stationarity_base(x);
      for (std::size_t i = 0; i < g; ++i)
        if (yg[i] != 0.0)
          for (const auto& [j, v] : grows_[i].e) st[j] += v * yg[i];
      std::fill(mu.begin(), mu.end(), 0.0);
      for (std::size_t b = 0; b < nb; ++b)
        if (bact[b] != 0) mu[b] = -st[bvars_[b]];

      // The refinement guard can exit on an inconsistent system without the
      // add/drop scan noticing: it only looks at inactive rows. Check the
      // active ones directly; when they fail, the fixed set over-constrains
      // the problem (typically too many weights pinned at zero), and the
      // variable "fighting" hardest -- largest recovered multiplier -- is the
      // one to release.
      double act_resid = 0.0;
      for (std::size_t i = 0; i < g; ++i) {
        if (gact[i] == 0) continue;
        const double tgt = gact[i] == -1 ? grows_[i].lo : grows_[i].hi;
        act_resid = std::max(act_resid, std::fabs(row_dot(i, x) - tgt));
      }
      if (act_resid > 1e-7) {
        std::size_t wb = SIZE_MAX;
        double wmu = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
          if ((bact[b] != 1 && bact[b] != -1) || btabu[b]) continue;
          if (std::fabs(mu[b]) > wmu) { wmu = std::fabs(mu[b]); wb = b; }
        }
        if (wb == SIZE_MAX) return false;
        bact[wb] = 0;
        bdropped[wb] = 1;
        continue;
      }

      bool changed = false;
      if (pass < 8) {
        for (std::size_t i = 0; i < g; ++i) {
          if (gact[i] == 1 && yg[i] < -kDualTol) { gact[i] = 0; changed = true; }
          else if (gact[i] == -1 && yg[i] > kDualTol) { gact[i] = 0; changed = true; }
        }
        for (std::size_t b = 0; b < nb; ++b) {
          if (bact[b] == 1 && mu[b] < -kDualTol) { bact[b] = 0; changed = true; }
          else if (bact[b] == -1 && mu[b] > kDualTol) { bact[b] = 0; changed = true; }
        }
        for (std::size_t i = 0; i < g; ++i) {
          if (gact[i] != 0) continue;
          const double ax = row_dot(i, x);
          if (grows_[i].hi < kInf && ax > grows_[i].hi + 1e-9) { gact[i] = 1; changed = true; }
          else if (grows_[i].lo > -kInf && ax < grows_[i].lo - 1e-9) { gact[i] = -1; changed = true; }
        }
        for (std::size_t b = 0; b < nb; ++b) {
          if (bact[b] != 0) continue;
          const VarBound& vb = vb_[bvars_[b]];
          const double xv = x[bvars_[b]];
          if (vb.hi < kInf && xv > vb.hi + 1e-9) { bact[b] = 1; changed = true; }
          else if (vb.lo > -kInf && xv < vb.lo - 1e-9) { bact[b] = -1; changed = true; }
        }
      } else {
        // Wholesale exchanges can cycle on degenerate sets (dependent rows,
        // flat curvature). Switch to one change per pass: restore primal
        // feasibility first, then release the most wrong-signed multiplier.
        double worst = 1e-9;
        std::size_t wi = SIZE_MAX;
        int wkind = 0;  // +-1 general row, +-2 bound
        for (std::size_t i = 0; i < g; ++i) {
          if (gact[i] != 0) continue;
          const double ax = row_dot(i, x);
          if (grows_[i].hi < kInf && ax - grows_[i].hi > worst) {
            worst = ax - grows_[i].hi; wi = i; wkind = 1;
          }
          if (grows_[i].lo > -kInf && grows_[i].lo - ax > worst) {
            worst = grows_[i].lo - ax; wi = i; wkind = -1;
          }
        }
        for (std::size_t b = 0; b < nb; ++b) {
          if (bact[b] != 0) continue;
          const VarBound& vb = vb_[bvars_[b]];
          const double xv = x[bvars_[b]];
          if (vb.hi < kInf && xv - vb.hi > worst) { worst = xv - vb.hi; wi = b; wkind = 2; }
          if (vb.lo > -kInf && vb.lo - xv > worst) { worst = vb.lo - xv; wi = b; wkind = -2; }
        }
        if (wi != SIZE_MAX) {
          if (wkind == 1 || wkind == -1) {
            gact[wi] = wkind;
            if (gdropped[wi]) gtabu[wi] = 1;
          } else {
            bact[wi] = wkind == 2 ? 1 : -1;
            if (bdropped[wi]) btabu[wi] = 1;
          }
          changed = true;
        } else {
          double wrong = kDualTol;
          wi = SIZE_MAX;
          bool is_bound = false;
          for (std::size_t i = 0; i < g; ++i) {
            if (gtabu[i]) continue;
            const double w = gact[i] == 1 ? -yg[i] : (gact[i] == -1 ? yg[i] : -kInf);
            if (w > wrong) { wrong = w; wi = i; is_bound = false; }
          }
          for (std::size_t b = 0; b < nb; ++b) {
            if (btabu[b]) continue;
            const double w = bact[b] == 1 ? -mu[b] : (bact[b] == -1 ? mu[b] : -kInf);
            if (w > wrong) { wrong = w; wi = b; is_bound = true; }
          }
          if (wi != SIZE_MAX) {
            if (is_bound) { bact[wi] = 0; bdropped[wi] = 1; }
            else { gact[wi] = 0; gdropped[wi] = 1; }
            changed = true;
          }
        }
      }
      if (!changed) {
        out.x = std::move(x);
        out.yg = std::move(yg);
        out.mu = std::move(mu);
        return true;
      }
    }
    return false;
  }
};

}  // namespace

QpSolution solve(const QuadraticProgram& qp, const QpSettings& s) {
  validate_program(qp);
  Solver sv(qp, s);
  return sv.run();
}

QpSolution solve_lp(const Vec& q, const SparseMat& aeq, const Vec& beq, const SparseMat& gin,
                    const Vec& hin, const QpSettings& s) {
  QuadraticProgram qp;
  qp.z = q.size();
  qp.q = q;
  qp.Aeq = aeq;
  qp.beq = beq;
  qp.Gin = gin;
  qp.hin = hin;
  return solve(qp, s);
}

}  // namespace stpc
