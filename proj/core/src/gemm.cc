// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "gemm.h"

#include <Eigen/Core>
#include <algorithm>
#include <vector>

#include "mctse/tensor.h"

namespace mctse::detail {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
void gemm_impl(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
               const T* a, const T* b, T* c, bool accumulate) {
  using Map = Eigen::Map<const RowMat<T>>;
  Eigen::Map<RowMat<T>> cm(c, m, n);
  const Map am(a, trans_a ? k : m, trans_a ? m : k);
  const Map bm(b, trans_b ? n : k, trans_b ? k : n);
  if (!accumulate) cm.setZero();
  if (!trans_a && !trans_b) {
    cm.noalias() += am * bm;
  } else if (trans_a && !trans_b) {
    cm.noalias() += am.transpose() * bm;
  } else if (!trans_a && trans_b) {
    cm.noalias() += am * bm.transpose();
  } else {
    cm.noalias() += am.transpose() * bm.transpose();
  }
}

void to_float(const double* src, std::size_t n, std::vector<float>& dst) {
  dst.resize(n);
  for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<float>(src[i]);
}

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) std::fill(c, c + m * n, 0.0);
    return;
  }
  if (gemm_precision() == GemmPrecision::kDouble) {
    gemm_impl(trans_a, trans_b, m, n, k, a, b, c, accumulate);
    return;
  }
  thread_local std::vector<float> fa, fb, fc;
  to_float(a, m * k, fa);
  to_float(b, k * n, fb);
  fc.resize(m * n);
  gemm_impl(trans_a, trans_b, m, n, k, fa.data(), fb.data(), fc.data(), false);
  if (accumulate) {
    for (std::size_t i = 0; i < m * n; ++i) c[i] += fc[i];
  } else {
    for (std::size_t i = 0; i < m * n; ++i) c[i] = fc[i];
  }
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const float* a, const float* b, float* c, bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) std::fill(c, c + m * n, 0.0f);
    return;
  }
  gemm_impl(trans_a, trans_b, m, n, k, a, b, c, accumulate);
}

}  // namespace mctse::detail
