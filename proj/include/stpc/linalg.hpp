// SPDX-License-Identifier: Apache-2.0
#pragma once
#include <cstddef>
#include <vector>

namespace stpc {

using Vec = std::vector<double>;

// Dense row-major matrix. Heavy math lives in the free functions below.
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;
  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}
  static Mat identity(std::size_t n);
  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
  double* row(std::size_t i) { return a.data() + i * cols; }
  const double* row(std::size_t i) const { return a.data() + i * cols; }
  bool empty() const { return rows == 0 || cols == 0; }
};

Mat transpose(const Mat& m);
Mat matmul(const Mat& x, const Mat& y);
Vec matvec(const Mat& m, const Vec& v);
Vec matvec_t(const Mat& m, const Vec& v);
double dot(const Vec& x, const Vec& y);
double norm_inf(const Vec& v);
double norm2(const Vec& v);

// LU with partial pivoting (square). ok=false on numerical singularity.
struct Lu {
  Mat lu;
  std::vector<int> piv;
  bool ok = false;
  Vec solve(const Vec& b) const;
};
Lu lu_factor(const Mat& m);

// Cholesky LL^T for SPD matrices. ok=false when a pivot is not positive.
struct Cholesky {
  Mat l;
  bool ok = false;
  Vec solve(const Vec& b) const;
};
Cholesky llt_factor(const Mat& m);

// Thin SVD via one-sided Jacobi. sigma holds min(rows, cols) singular
// values in descending order. col_basis (when requested) is rows x
// #sigma with orthonormal columns; column i spans the direction paired
// with sigma[i], so the leading `rank` columns span the column space.
struct Svd {
  Vec sigma;
  Mat col_basis;
};
Svd svd_jacobi(const Mat& a, bool want_basis = false, int max_sweeps = 60);

std::size_t numerical_rank(const Vec& sigma, double rel_tol);

// Least squares min ||A x - b||_2 by Householder QR (rows >= cols, full
// column rank).
Vec qr_least_squares(const Mat& a, const Vec& b);

// Eigenvalues of a symmetric matrix by cyclic Jacobi, ascending order.
Vec sym_eigenvalues(const Mat& m, int max_sweeps = 60);

}  // namespace stpc
