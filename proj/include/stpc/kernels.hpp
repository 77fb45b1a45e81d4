// SPDX-License-Identifier: Apache-2.0
#pragma once
#include <cstddef>

namespace stpc::kernels {

// Hot inner loops shared by the dense linear algebra and the ADMM solver.
// Two implementations exist: a portable scalar reference and an AVX2+FMA
// variant. active() picks one at runtime from cpuid; setting
// STPC_FORCE_SCALAR=1 in the environment pins the scalar path (the
// equivalence tests exercise both).
struct Ops {
  const char* name;
  double (*dot)(const double* x, const double* y, std::size_t n);
  void (*axpy)(double a, const double* x, double* y, std::size_t n);  // y += a*x
  void (*scal)(double a, double* x, std::size_t n);
  double (*max_abs)(const double* x, std::size_t n);
  void (*clamp)(double* x, const double* lo, const double* hi, std::size_t n);
};

const Ops& scalar();
const Ops* avx2();  // nullptr when the cpu (or compiler) lacks AVX2+FMA
const Ops& active();

// Row-major mat-vec helpers layered on the dispatched primitives.
void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);        // y = A x
void gemv_t_acc(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);  // y += A^T x

}  // namespace stpc::kernels
