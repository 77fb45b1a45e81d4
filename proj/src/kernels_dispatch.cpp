// SPDX-License-Identifier: Apache-2.0
#include "stpc/kernels.hpp"

#include <cstdlib>

namespace stpc::kernels {

const Ops* avx2_impl();  // defined in kernels_avx2.cpp (may return nullptr)

const Ops* avx2() {
  static const Ops* cached = []() -> const Ops* {
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return avx2_impl();
#endif
    return nullptr;
  }();
  return cached;
}

const Ops& active() {
  static const Ops& chosen = []() -> const Ops& {
    if (const char* f = std::getenv("STPC_FORCE_SCALAR"); f && f[0] == '1') return scalar();
    if (const Ops* v = avx2()) return *v;
    return scalar();
  }();
  return chosen;
}

}  // namespace stpc::kernels
