// SPDX-License-Identifier: Apache-2.0
#include "stpc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "stpc/qp.hpp"

namespace stpc {

namespace {

// Cheap rejections before paying for an LP: empty set, exact vertex hit,
// bounding-box exclusion, singleton comparison.
bool bbox_excludes(const VRepSet& set, const Vec& p, double tol) {
  const std::size_t d = set.dim();
  for (std::size_t c = 0; c < d; ++c) {
    double lo = set.vertices[0][c], hi = lo;
    for (const Vec& v : set.vertices) {
      lo = std::min(lo, v[c]);
      hi = std::max(hi, v[c]);
    }
    if (p[c] < lo - tol || p[c] > hi + tol) return true;
  }
  return false;
}

double point_gap_inf(const Vec& a, const Vec& b) {
  double g = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) g = std::max(g, std::fabs(a[i] - b[i]));
  return g;
}

// Away-step Frank-Wolfe on f(lambda) = 1/2 ||V'lambda - p||^2 over the
// simplex. Settles the bulk of membership queries far cheaper than the LP:
// a witness with ||V'lambda - p||_inf <= tol proves membership outright, and
// the FW duality gap lower-bounds the Euclidean distance, so
// sqrt(2*(f - gap)) > tol*sqrt(d) proves the optimal infinity-norm mismatch
// exceeds tol. Near-tie queries stay undecided and fall through to the LP.
struct FwProbe {
  bool decided = false;
  bool member = false;
  double residual = 0.0;
  Vec lambda;
};

FwProbe fw_probe(const VRepSet& set, const Vec& p, double tol) {
  FwProbe out;
  const std::size_t nv = set.count(), d = set.dim();
  const double sqrt_d = std::sqrt(static_cast<double>(d));

  std::size_t start = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < nv; ++k) {
    double e = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double t = set.vertices[k][c] - p[c];
      e += t * t;
    }
    if (e < best) { best = e; start = k; }
  }
  Vec lam(nv, 0.0);
  lam[start] = 1.0;
  Vec x = set.vertices[start];

  constexpr int kMaxIter = 2000;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    if (iter > 0 && iter % 128 == 0) {  // counter drift: rebuild x = V'lambda
      double s = 0.0;
      for (double l : lam) s += l;
      x.assign(d, 0.0);
      for (std::size_t k = 0; k < nv; ++k) {
        if (lam[k] <= 0.0) continue;
        lam[k] /= s;
        for (std::size_t c = 0; c < d; ++c) x[c] += lam[k] * set.vertices[k][c];
      }
    }
    Vec r(d);
    double rinf = 0.0, f = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      r[c] = x[c] - p[c];
      rinf = std::max(rinf, std::fabs(r[c]));
      f += 0.5 * r[c] * r[c];
    }
    if (rinf <= tol) {
      out.decided = true;
      out.member = true;
      out.residual = rinf;
      out.lambda = std::move(lam);
      return out;
    }
    double s_fw = std::numeric_limits<double>::infinity();
    double s_aw = -std::numeric_limits<double>::infinity();
    std::size_t i_fw = 0, i_aw = nv;
    for (std::size_t k = 0; k < nv; ++k) {
      double sc = 0.0;
      for (std::size_t c = 0; c < d; ++c) sc += set.vertices[k][c] * r[c];
      if (sc < s_fw) { s_fw = sc; i_fw = k; }
      if (lam[k] > 0.0 && sc > s_aw) { s_aw = sc; i_aw = k; }
    }
    double xr = 0.0;
    for (std::size_t c = 0; c < d; ++c) xr += x[c] * r[c];
    const double gap_fw = xr - s_fw;
    const double lower = f - gap_fw;
    if (lower > 0.0 && std::sqrt(2.0 * lower) > tol * sqrt_d * (1.0 + 1e-9)) {
      out.decided = true;
      out.member = false;
      out.residual = rinf;  // >= optimal mismatch > tol by the bound above
      out.lambda = std::move(lam);
      return out;
    }
    const double gap_aw = i_aw < nv ? s_aw - xr : 0.0;
    const bool away = gap_aw > gap_fw;
    Vec dir(d);
    double gmax;
    if (away) {
      for (std::size_t c = 0; c < d; ++c) dir[c] = x[c] - set.vertices[i_aw][c];
      const double la = lam[i_aw];
      if (la >= 1.0) break;  // support is a single vertex; nothing to move away from
      gmax = la / (1.0 - la);
    } else {
      for (std::size_t c = 0; c < d; ++c) dir[c] = set.vertices[i_fw][c] - x[c];
      gmax = 1.0;
    }
    double slope = 0.0, denom = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      slope += r[c] * dir[c];
      denom += dir[c] * dir[c];
    }
    if (denom <= 1e-300 || slope >= 0.0) break;  // no usable descent; let the LP decide
    const double g = std::min(gmax, -slope / denom);
    if (away) {
      for (std::size_t k = 0; k < nv; ++k) lam[k] *= 1.0 + g;
      lam[i_aw] -= g;
      if (lam[i_aw] < 1e-15) lam[i_aw] = 0.0;
      for (std::size_t c = 0; c < d; ++c) x[c] += g * dir[c];
    } else {
      for (std::size_t k = 0; k < nv; ++k) lam[k] *= 1.0 - g;
      lam[i_fw] += g;
      for (std::size_t c = 0; c < d; ++c) x[c] += g * dir[c];
    }
  }
  return out;
}

}  // namespace

MembershipWitness membership_witness(const VRepSet& set, const Vec& p, double tol) {
  MembershipWitness w;
  if (set.empty()) return w;
  if (p.size() != set.dim()) throw std::invalid_argument("membership: dimension mismatch");
  const std::size_t nv = set.count();
  const std::size_t d = set.dim();

  for (std::size_t k = 0; k < nv; ++k) {
    const double gap = point_gap_inf(set.vertices[k], p);
    if (gap <= tol) {
      w.member = true;
      w.residual = gap;
      w.lambda.assign(nv, 0.0);
      w.lambda[k] = 1.0;
      return w;
    }
  }
  if (nv == 1) {
    w.residual = point_gap_inf(set.vertices[0], p);
    w.member = w.residual <= tol;
    w.lambda.assign(1, 1.0);
    return w;
  }
  if (bbox_excludes(set, p, tol)) {
    w.residual = 1.0;  // definite non-member; exact distance not needed
    return w;
  }

  FwProbe fw = fw_probe(set, p, tol);
  if (fw.decided) {
    w.member = fw.member;
    w.residual = fw.residual;
    w.lambda = std::move(fw.lambda);
    return w;
  }

  // Variables: [lambda_0..lambda_{nv-1}, s].
  const std::size_t z = nv + 1;
  Vec q(z, 0.0);
  q[nv] = 1.0;
  SparseMat aeq(1, z);
  for (std::size_t k = 0; k < nv; ++k) aeq.add(0, k, 1.0);
  Vec beq{1.0};
  SparseMat gin(2 * d + nv, z);
  Vec hin(2 * d + nv, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t k = 0; k < nv; ++k) {
      gin.add(c, k, set.vertices[k][c]);
      gin.add(d + c, k, -set.vertices[k][c]);
    }
    gin.add(c, nv, -1.0);
    gin.add(d + c, nv, -1.0);
    hin[c] = p[c];
    hin[d + c] = -p[c];
  }
  for (std::size_t k = 0; k < nv; ++k) {
    gin.add(2 * d + k, k, -1.0);
    hin[2 * d + k] = 0.0;
  }
  QpSettings st;
  QpSolution sol = solve_lp(q, aeq, beq, gin, hin, st);
  if (sol.status == QpStatus::infeasible) {
    // The feasible set (a simplex crossed with s large) is never empty, so a
    // certificate means solver breakdown; answer conservatively.
    w.member = false;
    w.residual = std::numeric_limits<double>::infinity();
    return w;
  }
  // Evaluate the true mismatch at the returned weights; this keeps the
  // decision meaningful even when the solver stopped at max_iter.
  double resid = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    double acc = -p[c];
    for (std::size_t k = 0; k < nv; ++k) acc += sol.z[k] * set.vertices[k][c];
    resid = std::max(resid, std::fabs(acc));
  }
  double lam_neg = 0.0, lam_sum = 0.0;
  for (std::size_t k = 0; k < nv; ++k) {
    lam_neg = std::min(lam_neg, sol.z[k]);
    lam_sum += sol.z[k];
  }
  resid = std::max(resid, -lam_neg);
  resid = std::max(resid, std::fabs(lam_sum - 1.0));
  w.residual = resid;
  w.member = resid <= tol;
  w.lambda.assign(sol.z.begin(), sol.z.begin() + static_cast<long>(nv));
  return w;
}

bool membership(const VRepSet& set, const Vec& p, double tol) {
  return membership_witness(set, p, tol).member;
}

VRepSet prune_redundant(const VRepSet& set, double tol) {
  VRepSet out;
  if (set.empty()) return out;
  // Drop exact (near-) duplicates first.
  std::vector<Vec> kept;
  for (const Vec& v : set.vertices) {
    bool dup = false;
    for (const Vec& k : kept)
      if (point_gap_inf(v, k) <= tol) { dup = true; break; }
    if (!dup) kept.push_back(v);
  }
  if (kept.size() <= 2) {
    out.vertices = std::move(kept);
    return out;
  }
  // Greedy sequential elimination: a vertex expressible by the others goes.
  std::vector<char> alive(kept.size(), 1);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    VRepSet rest;
    for (std::size_t j = 0; j < kept.size(); ++j)
      if (j != i && alive[j]) rest.vertices.push_back(kept[j]);
    if (rest.count() < 2) continue;
    if (membership(rest, kept[i], tol)) alive[i] = 0;
  }
  for (std::size_t i = 0; i < kept.size(); ++i)
    if (alive[i]) out.vertices.push_back(kept[i]);
  return out;
}

VRepSet hull_union(const VRepSet& a, const VRepSet& b, double tol) {
  VRepSet joined;
  joined.vertices = a.vertices;
  joined.vertices.insert(joined.vertices.end(), b.vertices.begin(), b.vertices.end());
  if (!a.empty() && !b.empty() && a.dim() != b.dim())
    throw std::invalid_argument("hull_union: dimension mismatch");
  return prune_redundant(joined, tol);
}

void bounding_box(const VRepSet& set, Vec& lo, Vec& hi) {
  const std::size_t d = set.dim();
  lo.assign(d, 0.0);
  hi.assign(d, 0.0);
  if (set.empty()) return;
  lo = set.vertices[0];
  hi = set.vertices[0];
  for (const Vec& v : set.vertices)
    for (std::size_t c = 0; c < d; ++c) {
      lo[c] = std::min(lo[c], v[c]);
      hi[c] = std::max(hi[c], v[c]);
    }
}

std::optional<std::size_t> NestedFamily::smallest_level(const Vec& p, double tol) const {
  for (std::size_t l = 0; l < levels.size(); ++l)
    if (membership(levels[l], p, tol)) return l;
  return std::nullopt;
}

std::optional<std::size_t> nestedness_violation(const NestedFamily& f, double tol) {
  for (std::size_t l = 1; l < f.levels.size(); ++l)
    for (const Vec& v : f.levels[l - 1].vertices)
      if (!membership(f.levels[l], v, tol)) return l;
  return std::nullopt;
}

std::vector<std::array<double, 2>> project_hull_2d(const VRepSet& set, std::size_t i,
                                                   std::size_t j) {
  std::vector<std::array<double, 2>> pts;
  pts.reserve(set.count());
  for (const Vec& v : set.vertices) pts.push_back({v[i], v[j]});
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const std::size_t n = pts.size();
  if (n <= 2) return pts;
  auto cross = [](const std::array<double, 2>& o, const std::array<double, 2>& a,
                  const std::array<double, 2>& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<std::array<double, 2>> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t t = 0; t < n; ++t) {  // lower chain
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[t]) <= 0) --k;
    hull[k++] = pts[t];
  }
  const std::size_t lower = k + 1;
  for (std::size_t t = n - 1; t-- > 0;) {  // upper chain
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[t]) <= 0) --k;
    hull[k++] = pts[t];
  }
  hull.resize(k - 1);  // last point equals the first
  return hull;
}

}  // namespace stpc
