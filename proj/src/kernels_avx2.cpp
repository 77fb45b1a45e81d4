// SPDX-License-Identifier: Apache-2.0
#include "stpc/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

#include <cmath>

namespace stpc::kernels {
namespace {

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double dot_v(const double* x, const double* y, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
  }
  if (i + 4 <= n) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    i += 4;
  }
  double acc = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_v(double a, const double* x, double* y, std::size_t n) {
  __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d r = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, r);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scal_v(double a, double* x, std::size_t n) {
  __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

double max_abs_v(const double* x, std::size_t n) {
  const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  __m256d vm = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    vm = _mm256_max_pd(vm, _mm256_and_pd(mask, _mm256_loadu_pd(x + i)));
  __m128d lo = _mm256_castpd256_pd128(vm);
  __m128d hi = _mm256_extractf128_pd(vm, 1);
  lo = _mm_max_pd(lo, hi);
  double m = _mm_cvtsd_f64(_mm_max_sd(lo, _mm_unpackhi_pd(lo, lo)));
  for (; i < n; ++i) m = std::max(m, std::fabs(x[i]));
  return m;
}

void clamp_v(double* x, const double* lo, const double* hi, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    v = _mm256_max_pd(v, _mm256_loadu_pd(lo + i));
    v = _mm256_min_pd(v, _mm256_loadu_pd(hi + i));
    _mm256_storeu_pd(x + i, v);
  }
  for (; i < n; ++i) {
    double v = x[i];
    if (v < lo[i]) v = lo[i];
    if (v > hi[i]) v = hi[i];
    x[i] = v;
  }
}

}  // namespace

const Ops* avx2_impl();
const Ops* avx2_impl() {
  static const Ops ops{"avx2", dot_v, axpy_v, scal_v, max_abs_v, clamp_v};
  return &ops;
}

}  // namespace stpc::kernels

#else

namespace stpc::kernels {
const Ops* avx2_impl();
const Ops* avx2_impl() { return nullptr; }
}  // namespace stpc::kernels

#endif
