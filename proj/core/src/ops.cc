// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mctse/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gemm.h"
#include "mctse/errors.h"

namespace mctse {

using detail::grad_buffer;
using detail::make_result;

namespace {

bool needs(const Tensor& t) { return t.requires_grad(); }

// Shape of a broadcast binary op (scalar-vs-tensor or equal shapes).
Shape broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return a.shape();
  if (b.numel() == 1) return a.shape();
  if (a.numel() == 1) return b.shape();
  throw DimensionError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) +
                       " and " + to_string(b.shape()));
}

// Accumulates g into t's grad, reducing to a scalar when t was broadcast.
void accumulate_broadcast(const Tensor& t, std::span<const double> g,
                          const std::vector<double>& factor, bool use_factor) {
  if (!needs(t)) return;
  auto buf = grad_buffer(t);
  if (buf.size() == g.size()) {
    if (use_factor) {
      for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i] * factor[i];
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
    }
  } else {
    double s = 0.0;
    if (use_factor) {
      for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * factor[i];
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) s += g[i];
    }
    buf[0] += s;
  }
}

std::vector<double> expand(const Tensor& t, std::size_t n) {
  auto v = t.values();
  if (v.size() == n) return {v.begin(), v.end()};
  return std::vector<double>(n, v[0]);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: shape mismatch " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> c(m * n);
  detail::gemm(false, false, m, n, k, a.values().data(), b.values().data(), c.data(), false);
  return make_result({m, n}, std::move(c), {a, b}, [a, b, m, k, n](std::span<const double> g) {
    if (needs(a)) {
      detail::gemm(false, true, m, k, n, g.data(), b.values().data(), grad_buffer(a).data(), true);
    }
    if (needs(b)) {
      detail::gemm(true, false, k, n, m, a.values().data(), g.data(), grad_buffer(b).data(), true);
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  auto shape = broadcast_shape(a, b, "add");
  const auto n = numel_of(shape);
  auto av = expand(a, n), bv = expand(b, n);
  for (std::size_t i = 0; i < n; ++i) av[i] += bv[i];
  return make_result(std::move(shape), std::move(av), {a, b}, [a, b](std::span<const double> g) {
    accumulate_broadcast(a, g, {}, false);
    accumulate_broadcast(b, g, {}, false);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  auto shape = broadcast_shape(a, b, "sub");
  const auto n = numel_of(shape);
  auto av = expand(a, n), bv = expand(b, n);
  for (std::size_t i = 0; i < n; ++i) av[i] -= bv[i];
  return make_result(std::move(shape), std::move(av), {a, b}, [a, b](std::span<const double> g) {
    accumulate_broadcast(a, g, {}, false);
    if (needs(b)) {
      std::vector<double> ng(g.begin(), g.end());
      for (auto& v : ng) v = -v;
      accumulate_broadcast(b, ng, {}, false);
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  auto shape = broadcast_shape(a, b, "mul");
  const auto n = numel_of(shape);
  auto av = expand(a, n), bv = expand(b, n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = av[i] * bv[i];
  return make_result(std::move(shape), std::move(y), {a, b},
                     [a, b, av = std::move(av), bv = std::move(bv)](std::span<const double> g) {
                       accumulate_broadcast(a, g, bv, true);
                       accumulate_broadcast(b, g, av, true);
                     });
}

Tensor scale(const Tensor& x, double factor) {
  auto xv = x.values();
  std::vector<double> y(xv.begin(), xv.end());
  for (auto& v : y) v *= factor;
  return make_result(x.shape(), std::move(y), {x}, [x, factor](std::span<const double> g) {
    auto buf = grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += factor * g[i];
  });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

namespace {

// Elementwise op whose derivative is a function of input and output value.
template <typename F, typename DF>
Tensor pointwise(const Tensor& x, F f, DF df) {
  auto xv = x.values();
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  std::vector<double> d;
  if (detail::tracks(x)) {
    d.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) d[i] = df(xv[i], y[i]);
  }
  return make_result(x.shape(), std::move(y), {x},
                     [x, d = std::move(d)](std::span<const double> g) {
                       auto buf = grad_buffer(x);
                       for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i] * d[i];
                     });
}

}  // namespace

Tensor sigmoid(const Tensor& x) {
  return pointwise(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return pointwise(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return pointwise(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor prelu(const Tensor& x, const Tensor& slope) {
  if (slope.numel() != 1) throw DimensionError("prelu: slope must have one element");
  const double a = slope.item();
  auto xv = x.values();
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] > 0.0 ? xv[i] : a * xv[i];
  return make_result(x.shape(), std::move(y), {x, slope}, [x, slope, a](std::span<const double> g) {
    auto xv = x.values();
    if (needs(x)) {
      auto buf = grad_buffer(x);
      for (std::size_t i = 0; i < g.size(); ++i) buf[i] += xv[i] > 0.0 ? g[i] : a * g[i];
    }
    if (needs(slope)) {
      double s = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (xv[i] <= 0.0) s += g[i] * xv[i];
      }
      grad_buffer(slope)[0] += s;
    }
  });
}

Tensor abs(const Tensor& x) {
  return pointwise(
      x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor log10(const Tensor& x) {
  for (double v : x.values()) {
    if (!(v > 0.0)) throw DomainError("log10 of nonpositive value " + std::to_string(v));
  }
  return pointwise(
      x, [](double v) { return std::log10(v); },
      [](double v, double) { return 1.0 / (v * std::log(10.0)); });
}

Tensor square(const Tensor& x) {
  return pointwise(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor clamp_min(const Tensor& x, double floor) {
  return pointwise(
      x, [floor](double v) { return v < floor ? floor : v; },
      [floor](double v, double) { return v < floor ? 0.0 : 1.0; });
}

Tensor bias_add(const Tensor& x, const Tensor& bias, std::size_t axis) {
  const auto& s = x.shape();
  if (axis >= s.size()) throw DimensionError("bias_add: axis out of range for " + to_string(s));
  if (bias.numel() != s[axis]) {
    throw DimensionError("bias_add: bias " + to_string(bias.shape()) + " does not match axis " +
                         std::to_string(axis) + " of " + to_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  auto xv = x.values();
  auto bv = bias.values();
  std::vector<double> y(xv.begin(), xv.end());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < inner; ++i) y[(o * n + j) * inner + i] += bv[j];
  return make_result(s, std::move(y), {x, bias},
                     [x, bias, outer, n, inner](std::span<const double> g) {
                       if (needs(x)) {
                         auto buf = grad_buffer(x);
                         for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
                       }
                       if (needs(bias)) {
                         auto buf = grad_buffer(bias);
                         for (std::size_t o = 0; o < outer; ++o)
                           for (std::size_t j = 0; j < n; ++j)
                             for (std::size_t i = 0; i < inner; ++i)
                               buf[j] += g[(o * n + j) * inner + i];
                       }
                     });
}

Tensor sum(const Tensor& x) {
  auto xv = x.values();
  const double s = std::accumulate(xv.begin(), xv.end(), 0.0);
  return make_result({1}, {s}, {x}, [x](std::span<const double> g) {
    auto buf = grad_buffer(x);
    for (auto& v : buf) v += g[0];
  });
}

Tensor sum(const Tensor& x, std::size_t axis) {
  const auto& s = x.shape();
  if (axis >= s.size()) throw DimensionError("sum: axis out of range for " + to_string(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out_shape.push_back(s[i]);
  if (out_shape.empty()) out_shape = {1};
  auto xv = x.values();
  std::vector<double> y(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < inner; ++i) y[o * inner + i] += xv[(o * n + j) * inner + i];
  return make_result(std::move(out_shape), std::move(y), {x},
                     [x, outer, n, inner](std::span<const double> g) {
                       auto buf = grad_buffer(x);
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t j = 0; j < n; ++j)
                           for (std::size_t i = 0; i < inner; ++i)
                             buf[(o * n + j) * inner + i] += g[o * inner + i];
                     });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) throw DimensionError("concat: axis out of range for " + to_string(s0));
  std::size_t total = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == s0[i];
    if (!ok) {
      throw DimensionError("concat: incompatible shapes " + to_string(s0) + " and " +
                           to_string(s) + " on axis " + std::to_string(axis));
    }
    total += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];
  for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
  Shape out_shape = s0;
  out_shape[axis] = total;
  std::vector<double> y(numel_of(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t n = p.dim(axis);
    auto pv = p.values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.begin() + o * n * inner, n * inner, y.begin() + (o * total + off) * inner);
    }
    off += n;
  }
  return make_result(std::move(out_shape), std::move(y), parts,
                     [parts, offsets, axis, outer, inner, total](std::span<const double> g) {
                       for (std::size_t k = 0; k < parts.size(); ++k) {
                         if (!needs(parts[k])) continue;
                         const std::size_t n = parts[k].dim(axis);
                         auto buf = grad_buffer(parts[k]);
                         for (std::size_t o = 0; o < outer; ++o)
                           for (std::size_t i = 0; i < n * inner; ++i)
                             buf[o * n * inner + i] += g[(o * total + offsets[k]) * inner + i];
                       }
                     });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto& s = x.shape();
  if (axis >= s.size()) throw DimensionError("slice: axis out of range for " + to_string(s));
  if (begin >= end || end > s[axis]) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for axis " + std::to_string(axis) + " of " + to_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis], m = end - begin;
  Shape out_shape = s;
  out_shape[axis] = m;
  auto xv = x.values();
  std::vector<double> y(outer * m * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.begin() + (o * n + begin) * inner, m * inner, y.begin() + o * m * inner);
  }
  return make_result(std::move(out_shape), std::move(y), {x},
                     [x, outer, n, m, inner, begin](std::span<const double> g) {
                       auto buf = grad_buffer(x);
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t i = 0; i < m * inner; ++i)
                           buf[(o * n + begin) * inner + i] += g[o * m * inner + i];
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " +
                         to_string(shape));
  }
  auto xv = x.values();
  return make_result(std::move(shape), {xv.begin(), xv.end()}, {x},
                     [x](std::span<const double> g) {
                       auto buf = grad_buffer(x);
                       for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
                     });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("transpose: expected 2-D, got " + to_string(x.shape()));
  return permute(x, {1, 0});
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
  const auto& s = x.shape();
  const std::size_t r = s.size();
  if (perm.size() != r) throw DimensionError("permute: rank mismatch for " + to_string(s));
  std::vector<bool> seen(r, false);
  for (auto p : perm) {
    if (p >= r || seen[p]) throw DimensionError("permute: invalid axis permutation");
    seen[p] = true;
  }
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = s[perm[i]];
  // in_strides[a] = stride of input axis a
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * s[i];
  const std::size_t n = x.numel();
  // src[i] = input flat index of output flat index i
  std::vector<std::size_t> src(n);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t off = 0;
    for (std::size_t a = 0; a < r; ++a) off += idx[a] * in_strides[perm[a]];
    src[i] = off;
    for (std::size_t a = r; a-- > 0;) {
      if (++idx[a] < out_shape[a]) break;
      idx[a] = 0;
    }
  }
  auto xv = x.values();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = xv[src[i]];
  return make_result(std::move(out_shape), std::move(y), {x},
                     [x, src = std::move(src)](std::span<const double> g) {
                       auto buf = grad_buffer(x);
                       for (std::size_t i = 0; i < g.size(); ++i) buf[src[i]] += g[i];
                     });
}

Tensor tile(const Tensor& row, std::size_t times) {
  if (times == 0) throw DimensionError("tile: times must be positive");
  const bool is_row = (row.rank() == 2 && row.dim(0) == 1) || row.rank() == 1;
  if (!is_row) throw DimensionError("tile: expected a [1 x D] row, got " + to_string(row.shape()));
  const std::size_t d = row.numel();
  return gather_rows(reshape(row, {1, d}), std::vector<std::size_t>(times, 0));
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& indices) {
  if (x.rank() != 2) throw DimensionError("gather_rows: expected 2-D, got " + to_string(x.shape()));
  if (indices.empty()) throw DimensionError("gather_rows: no indices");
  const std::size_t rows = x.dim(0), d = x.dim(1);
  for (auto i : indices) {
    if (i >= rows) throw DimensionError("gather_rows: index " + std::to_string(i) + " >= " +
                                        std::to_string(rows));
  }
  auto xv = x.values();
  std::vector<double> y(indices.size() * d);
  for (std::size_t r = 0; r < indices.size(); ++r)
    std::copy_n(xv.begin() + indices[r] * d, d, y.begin() + r * d);
  return make_result({indices.size(), d}, std::move(y), {x},
                     [x, indices, d](std::span<const double> g) {
                       auto buf = grad_buffer(x);
                       for (std::size_t r = 0; r < indices.size(); ++r)
                         for (std::size_t j = 0; j < d; ++j) buf[indices[r] * d + j] += g[r * d + j];
                     });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto& s = x.shape();
  if (axis >= s.size()) throw DimensionError("softmax: axis out of range for " + to_string(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  auto xv = x.values();
  std::vector<double> y(xv.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, xv[(o * n + j) * inner + i]);
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = (o * n + j) * inner + i;
        y[k] = std::exp(xv[k] - mx);
        z += y[k];
      }
      for (std::size_t j = 0; j < n; ++j) y[(o * n + j) * inner + i] /= z;
    }
  }
  std::vector<double> yc = y;
  return make_result(s, std::move(y), {x},
                     [x, yc = std::move(yc), outer, n, inner](std::span<const double> g) {
                       auto buf = grad_buffer(x);
                       for (std::size_t o = 0; o < outer; ++o) {
                         for (std::size_t i = 0; i < inner; ++i) {
                           double dot = 0.0;
                           for (std::size_t j = 0; j < n; ++j) {
                             const std::size_t k = (o * n + j) * inner + i;
                             dot += g[k] * yc[k];
                           }
                           for (std::size_t j = 0; j < n; ++j) {
                             const std::size_t k = (o * n + j) * inner + i;
                             buf[k] += yc[k] * (g[k] - dot);
                           }
                         }
                       }
                     });
}

Tensor masked_softmax(const Tensor& x, const std::vector<bool>& key_mask) {
  const auto& s = x.shape();
  const std::size_t n = s.back();
  if (key_mask.size() != n) {
    throw DimensionError("masked_softmax: mask length " + std::to_string(key_mask.size()) +
                         " != last dim " + std::to_string(n));
  }
  if (std::none_of(key_mask.begin(), key_mask.end(), [](bool b) { return b; })) {
    throw ContractError("masked_softmax: every key is masked");
  }
  const std::size_t rows = x.numel() / n;
  auto xv = x.values();
  std::vector<double> y(xv.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (key_mask[j]) mx = std::max(mx, xv[r * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!key_mask[j]) continue;
      y[r * n + j] = std::exp(xv[r * n + j] - mx);
      z += y[r * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) y[r * n + j] /= z;
  }
  std::vector<double> yc = y;
  return make_result(s, std::move(y), {x}, [x, yc = std::move(yc), rows, n](std::span<const double> g) {
    auto buf = grad_buffer(x);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * yc[r * n + j];
      for (std::size_t j = 0; j < n; ++j) buf[r * n + j] += yc[r * n + j] * (g[r * n + j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.rank() != 2) throw DimensionError("layer_norm: expected [L x D], got " + to_string(x.shape()));
  const std::size_t rows = x.dim(0), d = x.dim(1);
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm: gain/bias must have " + std::to_string(d) + " entries");
  }
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
  auto xv = x.values();
  auto gv = gain.values();
  auto bv = bias.values();
  std::vector<double> xhat(xv.size()), inv_std(rows), y(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xv[r * d + j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xv[r * d + j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (xv[r * d + j] - mu) * inv_std[r];
      y[r * d + j] = xhat[r * d + j] * gv[j] + bv[j];
    }
  }
  return make_result(x.shape(), std::move(y), {x, gain, bias},
                     [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), rows,
                      d](std::span<const double> g) {
                       auto gv = gain.values();
                       if (needs(gain)) {
                         auto buf = grad_buffer(gain);
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < d; ++j) buf[j] += g[r * d + j] * xhat[r * d + j];
                       }
                       if (needs(bias)) {
                         auto buf = grad_buffer(bias);
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < d; ++j) buf[j] += g[r * d + j];
                       }
                       if (needs(x)) {
                         auto buf = grad_buffer(x);
                         const double inv_d = 1.0 / static_cast<double>(d);
                         for (std::size_t r = 0; r < rows; ++r) {
                           double sum_g = 0.0, sum_gx = 0.0;
                           for (std::size_t j = 0; j < d; ++j) {
                             const double gh = g[r * d + j] * gv[j];
                             sum_g += gh;
                             sum_gx += gh * xhat[r * d + j];
                           }
                           for (std::size_t j = 0; j < d; ++j) {
                             const double gh = g[r * d + j] * gv[j];
                             buf[r * d + j] += inv_std[r] *
                                               (gh - inv_d * sum_g - xhat[r * d + j] * inv_d * sum_gx);
                           }
                         }
                       }
                     });
}

}  // namespace mctse
