// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Differentiable tensor operations. Every function here records a backward
// rule on the active tape when one of its inputs requires a gradient.
//
// Broadcasting is limited to scalar-vs-tensor (one operand with a single
// element) and equal shapes; bias_add covers the per-row / per-channel case.

#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "mctse/tensor.h"

namespace mctse {

// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor neg(const Tensor& x);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
// relu'(0) = 0.
Tensor relu(const Tensor& x);
// Leaky rectifier with a learnable single-element slope.
Tensor prelu(const Tensor& x, const Tensor& slope);
// abs'(0) = 0.
Tensor abs(const Tensor& x);
// Throws DomainError on nonpositive entries.
Tensor log10(const Tensor& x);
Tensor square(const Tensor& x);
// max(x, floor) elementwise; gradient is zero where the floor is active.
Tensor clamp_min(const Tensor& x, double floor);

// Adds `bias` (length x.dim(axis)) along `axis`, e.g. axis 1 for [L x D]
// rows or axis 0 for [C x H x W] channels.
Tensor bias_add(const Tensor& x, const Tensor& bias, std::size_t axis);

// Sum of all entries -> shape [1].
Tensor sum(const Tensor& x);
// Sum over one axis; the axis is removed (rank-1 inputs give shape [1]).
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);
// 2-D transpose.
Tensor transpose(const Tensor& x);
// General axis permutation: out.dim(i) = x.dim(perm[i]).
Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm);
// Repeats a [1 x D] (or [D]) row `times` times -> [times x D].
Tensor tile(const Tensor& row, std::size_t times);
// out[r] = x[indices[r]] along axis 0; gradient scatter-adds.
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& indices);

// Numerically stable softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);
// Softmax along the last axis where `key_mask[j] == false` columns get
// exactly zero weight. At least one column must be unmasked.
Tensor masked_softmax(const Tensor& x, const std::vector<bool>& key_mask);

// Row-wise normalization of [L x D] followed by per-column affine.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

struct Conv2dGeometry {
  std::pair<std::size_t, std::size_t> stride{1, 1};
  std::pair<std::size_t, std::size_t> padding{0, 0};
};

// Cross-correlation. x: [Cin x H x W], kernel: [Cout x Cin x kh x kw],
// optional bias: [Cout].
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Conv2dGeometry& geom,
              const std::optional<Tensor>& bias = std::nullopt);

// Adjoint of conv2d with respect to its input. x: [Cx x Hx x Wx], kernel:
// [Cx x Cy x kh x kw] (the same tensor a conv2d mapping Cy -> Cx would use),
// output: [Cy x (Hx-1)*sh - 2*ph + kh x (Wx-1)*sw - 2*pw + kw].
Tensor conv2d_transpose(const Tensor& x, const Tensor& kernel, const Conv2dGeometry& geom,
                        const std::optional<Tensor>& bias = std::nullopt);

}  // namespace mctse
