// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>

namespace mctse::detail {

// Row-major C[m x n] (+)= op(A) * op(B), where op(A) is m x k and op(B) is
// k x n. Honors the global GemmPrecision.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate);

// Single-precision kernel, independent of the global setting.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const float* a, const float* b, float* c, bool accumulate);

}  // namespace mctse::detail
