// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <span>
#include <utility>
#include <vector>

#include "gemm.h"
#include "mctse/errors.h"
#include "mctse/ops.h"

namespace mctse {

using detail::grad_buffer;
using detail::make_result;

namespace {

struct Geometry {
  std::size_t channels, h, w;  // the un-patched image
  std::size_t kh, kw, sh, sw, ph, pw;
  std::size_t oh, ow;  // patch grid
  std::size_t rows() const { return channels * kh * kw; }
  std::size_t cols() const { return oh * ow; }
};

// Range of output columns ox whose source column ox*sw + j - pw lies in [0, w).
std::pair<std::size_t, std::size_t> valid_cols(const Geometry& g, std::size_t j) {
  const std::size_t lo = j >= g.pw ? 0 : (g.pw - j + g.sw - 1) / g.sw;
  if (g.w + g.pw <= j) return {lo, lo};
  const std::size_t hi = std::min(g.ow, (g.w - 1 + g.pw - j) / g.sw + 1);
  return {std::min(lo, hi), hi};
}

// cols[(c*kh+i)*kw+j][oy*ow+ox] = img[c][oy*sh-ph+i][ox*sw-pw+j] (0 outside)
template <typename T>
void im2col(const double* img, const Geometry& g, T* cols) {
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        T* dst = cols + ((c * g.kh + i) * g.kw + j) * g.cols();
        const auto [lo, hi] = valid_cols(g, j);
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          T* d = dst + oy * g.ow;
          const long iy = static_cast<long>(oy * g.sh + i) - static_cast<long>(g.ph);
          if (iy < 0 || iy >= static_cast<long>(g.h)) {
            std::fill(d, d + g.ow, T(0));
            continue;
          }
          std::fill(d, d + lo, T(0));
          std::fill(d + hi, d + g.ow, T(0));
          const double* src = img + (c * g.h + static_cast<std::size_t>(iy)) * g.w + j - g.pw;
          for (std::size_t ox = lo; ox < hi; ++ox) d[ox] = static_cast<T>(src[ox * g.sw]);
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds patches back into img.
template <typename T>
void col2im(const T* cols, const Geometry& g, double* img) {
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* src = cols + ((c * g.kh + i) * g.kw + j) * g.cols();
        const auto [lo, hi] = valid_cols(g, j);
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const long iy = static_cast<long>(oy * g.sh + i) - static_cast<long>(g.ph);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          const T* s = src + oy * g.ow;
          double* dst = img + (c * g.h + static_cast<std::size_t>(iy)) * g.w + j - g.pw;
          for (std::size_t ox = lo; ox < hi; ++ox) dst[ox * g.sw] += s[ox];
        }
      }
    }
  }
}

template <typename T>
std::vector<T> cast_copy(std::span<const double> v) {
  return std::vector<T>(v.begin(), v.end());
}

template <typename T>
void add_into(const std::vector<T>& src, std::span<double> dst) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

// Forward and backward for both ops run at the precision selected when the
// forward pass was recorded.
template <typename T>
Tensor conv2d_impl(const Tensor& x, const Tensor& kernel, const Geometry& g, std::size_t cout) {
  std::vector<T> cols(g.rows() * g.cols());
  im2col(x.values().data(), g, cols.data());
  const std::vector<T> k = cast_copy<T>(kernel.values());
  std::vector<T> y(cout * g.cols());
  detail::gemm(false, false, cout, g.cols(), g.rows(), k.data(), cols.data(), y.data(), false);
  return make_result(
      {cout, g.oh, g.ow}, std::vector<double>(y.begin(), y.end()), {x, kernel},
      [x, kernel, g, cout](std::span<const double> gy) {
        const std::vector<T> gt = cast_copy<T>(gy);
        std::vector<T> buf;
        if (kernel.requires_grad()) {
          buf.resize(g.rows() * g.cols());
          im2col(x.values().data(), g, buf.data());
          std::vector<T> dk(cout * g.rows());
          detail::gemm(false, true, cout, g.rows(), g.cols(), gt.data(), buf.data(), dk.data(),
                       false);
          add_into(dk, grad_buffer(kernel));
        }
        if (x.requires_grad()) {
          const std::vector<T> k = cast_copy<T>(kernel.values());
          buf.resize(g.rows() * g.cols());
          detail::gemm(true, false, g.rows(), g.cols(), cout, k.data(), gt.data(), buf.data(),
                       false);
          col2im(buf.data(), g, grad_buffer(x).data());
        }
      });
}

template <typename T>
Tensor conv2d_transpose_impl(const Tensor& x, const Tensor& kernel, const Geometry& g,
                             std::size_t cx) {
  const std::vector<T> k = cast_copy<T>(kernel.values());
  const std::vector<T> xt = cast_copy<T>(x.values());
  std::vector<T> cols(g.rows() * g.cols());
  detail::gemm(true, false, g.rows(), g.cols(), cx, k.data(), xt.data(), cols.data(), false);
  std::vector<double> y(g.channels * g.h * g.w, 0.0);
  col2im(cols.data(), g, y.data());
  return make_result(
      {g.channels, g.h, g.w}, std::move(y), {x, kernel},
      [x, kernel, g, cx](std::span<const double> gy) {
        std::vector<T> gcols(g.rows() * g.cols());
        im2col(gy.data(), g, gcols.data());
        if (x.requires_grad()) {
          const std::vector<T> k = cast_copy<T>(kernel.values());
          std::vector<T> dx(cx * g.cols());
          detail::gemm(false, false, cx, g.cols(), g.rows(), k.data(), gcols.data(), dx.data(),
                       false);
          add_into(dx, grad_buffer(x));
        }
        if (kernel.requires_grad()) {
          const std::vector<T> xt = cast_copy<T>(x.values());
          std::vector<T> dk(cx * g.rows());
          detail::gemm(false, true, cx, g.rows(), g.cols(), xt.data(), gcols.data(), dk.data(),
                       false);
          add_into(dk, grad_buffer(kernel));
        }
      });
}

bool single_precision() { return gemm_precision() == GemmPrecision::kSingle; }

void check_rank(const Tensor& x, const Tensor& k, const char* op) {
  if (x.rank() != 3) {
    throw DimensionError(std::string(op) + ": input must be [C x H x W], got " +
                         to_string(x.shape()));
  }
  if (k.rank() != 4) {
    throw DimensionError(std::string(op) + ": kernel must be rank 4, got " + to_string(k.shape()));
  }
}

void check_stride(const Conv2dGeometry& geom, const char* op) {
  if (geom.stride.first == 0 || geom.stride.second == 0) {
    throw DimensionError(std::string(op) + ": stride must be positive");
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Conv2dGeometry& geom,
              const std::optional<Tensor>& bias) {
  check_rank(x, kernel, "conv2d");
  check_stride(geom, "conv2d");
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != cin) {
    throw DimensionError("conv2d: kernel " + to_string(kernel.shape()) + " expects " +
                         std::to_string(kernel.dim(1)) + " input channels, input is " +
                         to_string(x.shape()));
  }
  const auto [sh, sw] = geom.stride;
  const auto [ph, pw] = geom.padding;
  if (h + 2 * ph < kh || w + 2 * pw < kw) {
    throw DimensionError("conv2d: kernel " + to_string(kernel.shape()) +
                         " larger than padded input " + to_string(x.shape()));
  }
  Geometry g{cin, h, w, kh, kw, sh, sw, ph, pw, (h + 2 * ph - kh) / sh + 1,
             (w + 2 * pw - kw) / sw + 1};
  const Tensor out = single_precision() ? conv2d_impl<float>(x, kernel, g, cout)
                                        : conv2d_impl<double>(x, kernel, g, cout);
  return bias ? bias_add(out, *bias, 0) : out;
}

Tensor conv2d_transpose(const Tensor& x, const Tensor& kernel, const Conv2dGeometry& geom,
                        const std::optional<Tensor>& bias) {
  check_rank(x, kernel, "conv2d_transpose");
  check_stride(geom, "conv2d_transpose");
  const std::size_t cx = x.dim(0), hx = x.dim(1), wx = x.dim(2);
  const std::size_t cy = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(0) != cx) {
    throw DimensionError("conv2d_transpose: kernel " + to_string(kernel.shape()) + " expects " +
                         std::to_string(kernel.dim(0)) + " input channels, input is " +
                         to_string(x.shape()));
  }
  const auto [sh, sw] = geom.stride;
  const auto [ph, pw] = geom.padding;
  const long hy = static_cast<long>((hx - 1) * sh + kh) - 2 * static_cast<long>(ph);
  const long wy = static_cast<long>((wx - 1) * sw + kw) - 2 * static_cast<long>(pw);
  if (hy < 1 || wy < 1) {
    throw DimensionError("conv2d_transpose: kernel " + to_string(kernel.shape()) +
                         " with padding yields empty output for input " + to_string(x.shape()));
  }
  Geometry g{cy, static_cast<std::size_t>(hy), static_cast<std::size_t>(wy), kh, kw, sh, sw, ph,
             pw, hx, wx};
  const Tensor out = single_precision() ? conv2d_transpose_impl<float>(x, kernel, g, cx)
                                        : conv2d_transpose_impl<double>(x, kernel, g, cx);
  return bias ? bias_add(out, *bias, 0) : out;
}

}  // namespace mctse
