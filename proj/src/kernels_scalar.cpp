// SPDX-License-Identifier: Apache-2.0
#include "stpc/kernels.hpp"

#include <cmath>

namespace stpc::kernels {
namespace {

double dot_s(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_s(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scal_s(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double max_abs_s(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(x[i]));
  return m;
}

void clamp_s(double* x, const double* lo, const double* hi, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double v = x[i];
    if (v < lo[i]) v = lo[i];
    if (v > hi[i]) v = hi[i];
    x[i] = v;
  }
}

}  // namespace

const Ops& scalar() {
  static const Ops ops{"scalar", dot_s, axpy_s, scal_s, max_abs_s, clamp_s};
  return ops;
}

void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  const Ops& o = active();
  for (std::size_t i = 0; i < rows; ++i) y[i] = o.dot(a + i * cols, x, cols);
}

void gemv_t_acc(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  const Ops& o = active();
  for (std::size_t i = 0; i < rows; ++i)
    if (x[i] != 0.0) o.axpy(x[i], a + i * cols, y, cols);
}

}  // namespace stpc::kernels
