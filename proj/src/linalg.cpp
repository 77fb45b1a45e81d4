// SPDX-License-Identifier: Apache-2.0
#include "stpc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "stpc/kernels.hpp"

namespace stpc {

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat transpose(const Mat& m) {
  Mat t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  return t;
}

Mat matmul(const Mat& x, const Mat& y) {
  if (x.cols != y.rows) throw std::invalid_argument("matmul: inner dimensions differ");
  Mat r(x.rows, y.cols);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t k = 0; k < x.cols; ++k) {
      double v = x(i, k);
      if (v != 0.0) kernels::active().axpy(v, y.row(k), r.row(i), y.cols);
    }
  return r;
}

Vec matvec(const Mat& m, const Vec& v) {
  if (m.cols != v.size()) throw std::invalid_argument("matvec: dimension mismatch");
  Vec y(m.rows);
  kernels::gemv(m.a.data(), m.rows, m.cols, v.data(), y.data());
  return y;
}

Vec matvec_t(const Mat& m, const Vec& v) {
  if (m.rows != v.size()) throw std::invalid_argument("matvec_t: dimension mismatch");
  Vec y(m.cols, 0.0);
  kernels::gemv_t_acc(m.a.data(), m.rows, m.cols, v.data(), y.data());
  return y;
}

double dot(const Vec& x, const Vec& y) {
  if (x.size() != y.size()) throw std::invalid_argument("dot: dimension mismatch");
  return kernels::active().dot(x.data(), y.data(), x.size());
}

double norm_inf(const Vec& v) { return kernels::active().max_abs(v.data(), v.size()); }

double norm2(const Vec& v) { return std::sqrt(std::max(0.0, dot(v, v))); }

Lu lu_factor(const Mat& m) {
  if (m.rows != m.cols) throw std::invalid_argument("lu_factor: matrix not square");
  const std::size_t n = m.rows;
  Lu f;
  f.lu = m;
  f.piv.resize(n);
  std::iota(f.piv.begin(), f.piv.end(), 0);
  f.ok = true;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t best = k;
    double bv = std::fabs(f.lu(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      double v = std::fabs(f.lu(i, k));
      if (v > bv) { bv = v; best = i; }
    }
    if (bv < 1e-300) { f.ok = false; return f; }
    if (best != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(f.lu(k, j), f.lu(best, j));
      std::swap(f.piv[k], f.piv[best]);
    }
    const double inv = 1.0 / f.lu(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      double l = f.lu(i, k) * inv;
      f.lu(i, k) = l;
      if (l != 0.0) kernels::active().axpy(-l, f.lu.row(k) + k + 1, f.lu.row(i) + k + 1, n - k - 1);
    }
  }
  return f;
}

Vec Lu::solve(const Vec& b) const {
  const std::size_t n = lu.rows;
  if (!ok) throw std::runtime_error("Lu::solve: singular factorization");
  if (b.size() != n) throw std::invalid_argument("Lu::solve: dimension mismatch");
  Vec x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[piv[i]];
  for (std::size_t i = 1; i < n; ++i)
    x[i] -= kernels::active().dot(lu.row(i), x.data(), i);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii] - kernels::active().dot(lu.row(ii) + ii + 1, x.data() + ii + 1, n - ii - 1);
    x[ii] = s / lu(ii, ii);
  }
  return x;
}

Cholesky llt_factor(const Mat& m) {
  if (m.rows != m.cols) throw std::invalid_argument("llt_factor: matrix not square");
  const std::size_t n = m.rows;
  Cholesky c;
  c.l = Mat(n, n);
  c.ok = true;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = m(i, j) - kernels::active().dot(c.l.row(i), c.l.row(j), j);
      if (i == j) {
        if (s <= 0.0 || !std::isfinite(s)) { c.ok = false; return c; }
        c.l(i, i) = std::sqrt(s);
      } else {
        c.l(i, j) = s / c.l(j, j);
      }
    }
  }
  return c;
}

Vec Cholesky::solve(const Vec& b) const {
  const std::size_t n = l.rows;
  if (!ok) throw std::runtime_error("Cholesky::solve: failed factorization");
  if (b.size() != n) throw std::invalid_argument("Cholesky::solve: dimension mismatch");
  Vec x = b;
  for (std::size_t i = 0; i < n; ++i)
    x[i] = (x[i] - kernels::active().dot(l.row(i), x.data(), i)) / l(i, i);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t i = ii + 1; i < n; ++i) s -= l(i, ii) * x[i];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

Svd svd_jacobi(const Mat& a, bool want_basis, int max_sweeps) {
  if (a.empty()) return {};
  const bool wide = a.rows < a.cols;
  // Work on a tall copy; for wide inputs the accumulated rotation matrix is
  // exactly the basis of the original column space.
  Mat w = wide ? transpose(a) : a;
  const std::size_t r = w.rows, c = w.cols;
  const bool need_v = want_basis && wide;
  Mat v = need_v ? Mat::identity(c) : Mat();

  Vec colw(r);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < c; ++p) {
      for (std::size_t q = p + 1; q < c; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t i = 0; i < r; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          app += wp * wp;
          aqq += wq * wq;
          apq += wp * wq;
        }
        if (app == 0.0 || aqq == 0.0) continue;
        if (std::fabs(apq) <= 1e-15 * std::sqrt(app * aqq)) continue;
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (std::size_t i = 0; i < r; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = cs * wp - sn * wq;
          w(i, q) = sn * wp + cs * wq;
        }
        if (need_v)
          for (std::size_t i = 0; i < c; ++i) {
            const double vp = v(i, p), vq = v(i, q);
            v(i, p) = cs * vp - sn * vq;
            v(i, q) = sn * vp + cs * vq;
          }
      }
    }
    if (!rotated) break;
  }

  Vec sigma(c);
  for (std::size_t j = 0; j < c; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < r; ++i) s += w(i, j) * w(i, j);
    sigma[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

  Svd out;
  out.sigma.resize(c);
  for (std::size_t j = 0; j < c; ++j) out.sigma[j] = sigma[order[j]];
  if (want_basis) {
    if (wide) {
      out.col_basis = Mat(c, c);
      for (std::size_t j = 0; j < c; ++j)
        for (std::size_t i = 0; i < c; ++i) out.col_basis(i, j) = v(i, order[j]);
    } else {
      out.col_basis = Mat(r, c);
      for (std::size_t j = 0; j < c; ++j) {
        const std::size_t src = order[j];
        if (sigma[src] > 0.0) {
          const double inv = 1.0 / sigma[src];
          for (std::size_t i = 0; i < r; ++i) out.col_basis(i, j) = w(i, src) * inv;
        }
      }
    }
  }
  return out;
}

std::size_t numerical_rank(const Vec& sigma, double rel_tol) {
  if (sigma.empty() || sigma[0] <= 0.0) return 0;
  const double cut = rel_tol * sigma[0];
  std::size_t r = 0;
  while (r < sigma.size() && sigma[r] > cut) ++r;
  return r;
}

Vec qr_least_squares(const Mat& a, const Vec& b) {
  if (a.rows < a.cols) throw std::invalid_argument("qr_least_squares: needs rows >= cols");
  if (a.rows != b.size()) throw std::invalid_argument("qr_least_squares: dimension mismatch");
  Mat r = a;
  Vec y = b;
  const std::size_t mr = r.rows, nc = r.cols;
  Vec v(mr);
  for (std::size_t k = 0; k < nc; ++k) {
    double nrm = 0.0;
    for (std::size_t i = k; i < mr; ++i) nrm += r(i, k) * r(i, k);
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) throw std::runtime_error("qr_least_squares: rank deficient");
    double alpha = r(k, k) >= 0.0 ? -nrm : nrm;
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < mr; ++i) {
      v[i] = r(i, k);
      if (i == k) v[i] -= alpha;
      vnorm2 += v[i] * v[i];
    }
    if (vnorm2 == 0.0) continue;
    const double beta = 2.0 / vnorm2;
    for (std::size_t j = k; j < nc; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < mr; ++i) s += v[i] * r(i, j);
      s *= beta;
      for (std::size_t i = k; i < mr; ++i) r(i, j) -= s * v[i];
    }
    double s = 0.0;
    for (std::size_t i = k; i < mr; ++i) s += v[i] * y[i];
    s *= beta;
    for (std::size_t i = k; i < mr; ++i) y[i] -= s * v[i];
  }
  Vec x(nc);
  for (std::size_t ii = nc; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t j = ii + 1; j < nc; ++j) s -= r(ii, j) * x[j];
    if (r(ii, ii) == 0.0) throw std::runtime_error("qr_least_squares: rank deficient");
    x[ii] = s / r(ii, ii);
  }
  return x;
}

Vec sym_eigenvalues(const Mat& m, int max_sweeps) {
  if (m.rows != m.cols) throw std::invalid_argument("sym_eigenvalues: matrix not square");
  Mat a = m;
  const std::size_t n = a.rows;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off = std::max(off, std::fabs(a(i, j)));
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) diag = std::max(diag, std::fabs(a(i, i)));
    if (off <= 1e-14 * std::max(1.0, diag)) break;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a(p, q)) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(1.0 + theta * theta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = cs * aip - sn * aiq;
          a(i, q) = sn * aip + cs * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a(p, i), aqi = a(q, i);
          a(p, i) = cs * api - sn * aqi;
          a(q, i) = sn * api + cs * aqi;
        }
      }
  }
  Vec ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

}  // namespace stpc
