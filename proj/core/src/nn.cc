// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mctse/nn.h"

#include <Eigen/Core>
#include <cmath>

#include "gemm.h"
#include "mctse/errors.h"

namespace mctse {

using detail::grad_buffer;
using detail::make_result;

Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = uniform(rng, -bound, bound);
  return Tensor(std::move(shape), std::move(v), true);
}

Linear Linear::create(std::size_t in, std::size_t out, Rng& rng) {
  return {init_uniform({in, out}, in, rng), Tensor::zeros({out}, true)};
}

Tensor Linear::operator()(const Tensor& x) const { return linear(x, weight, bias); }

void Linear::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(0)) {
    throw DimensionError("linear: input " + to_string(x.shape()) + " does not match weight " +
                         to_string(weight.shape()));
  }
  return bias_add(matmul(x, weight), bias, 1);
}

LstmParams LstmParams::create(std::size_t input_size, std::size_t hidden, std::size_t num_layers,
                              bool bidirectional, Rng& rng) {
  if (input_size == 0 || hidden == 0 || num_layers == 0) {
    throw ConfigError("lstm: sizes must be positive");
  }
  LstmParams p;
  p.input_size = input_size;
  p.hidden = hidden;
  p.num_layers = num_layers;
  p.bidirectional = bidirectional;
  for (std::size_t layer = 0; layer < num_layers; ++layer) {
    const std::size_t in = layer == 0 ? input_size : p.output_size();
    for (std::size_t d = 0; d < p.directions(); ++d) {
      LstmCell c;
      c.w_ih = init_uniform({in, 4 * hidden}, in, rng);
      c.w_hh = init_uniform({hidden, 4 * hidden}, hidden, rng);
      std::vector<double> b(4 * hidden, 0.0);
      for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
      c.bias = Tensor({4 * hidden}, std::move(b), true);
      p.cells.push_back(std::move(c));
    }
  }
  return p;
}

void LstmParams::collect(const std::string& prefix, NamedTensors& out) const {
  for (std::size_t layer = 0; layer < num_layers; ++layer) {
    for (std::size_t d = 0; d < directions(); ++d) {
      const auto& c = cells[layer * directions() + d];
      const std::string name =
          prefix + ".l" + std::to_string(layer) + (d == 0 ? ".fwd" : ".bwd");
      out.emplace_back(name + ".w_ih", c.w_ih);
      out.emplace_back(name + ".w_hh", c.w_hh);
      out.emplace_back(name + ".bias", c.bias);
    }
  }
}

namespace {
inline double sigm(double v) { return 1.0 / (1.0 + std::exp(-v)); }

using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
}  // namespace

Tensor lstm_layer(const Tensor& x, const LstmCell& cell, bool reverse) {
  if (x.rank() != 2) throw InputError("lstm: input must be [T x D], got " + to_string(x.shape()));
  const std::size_t steps = x.dim(0), in = x.dim(1);
  const std::size_t h4 = cell.bias.numel(), hid = h4 / 4;
  if (cell.w_ih.shape() != Shape{in, h4} || cell.w_hh.shape() != Shape{hid, h4} || h4 % 4 != 0) {
    throw DimensionError("lstm: input " + to_string(x.shape()) + " inconsistent with w_ih " +
                         to_string(cell.w_ih.shape()) + " / w_hh " + to_string(cell.w_hh.shape()));
  }
  // Pre-activations: x W_ih + b, then the recurrent term per step.
  std::vector<double> pre(steps * h4);
  detail::gemm(false, false, steps, h4, in, x.values().data(), cell.w_ih.values().data(),
               pre.data(), false);
  auto bv = cell.bias.values();
  auto whh = cell.w_hh.values();
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t j = 0; j < h4; ++j) pre[t * h4 + j] += bv[j];

  // act rows: [i f g o] activations; cstate, tanh_c, h per time index.
  std::vector<double> act(steps * h4), cstate(steps * hid), tanh_c(steps * hid), hout(steps * hid);
  std::vector<double> h_prev(hid, 0.0), c_prev(hid, 0.0), acc(h4);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    VecMap(acc.data(), h4) = ConstVecMap(pre.data() + t * h4, h4) +
                              ConstMatMap(whh.data(), hid, h4).transpose() *
                                  ConstVecMap(h_prev.data(), hid);
    double* a = act.data() + t * h4;
    for (std::size_t j = 0; j < hid; ++j) {
      a[j] = sigm(acc[j]);
      a[hid + j] = sigm(acc[hid + j]);
      a[2 * hid + j] = std::tanh(acc[2 * hid + j]);
      a[3 * hid + j] = sigm(acc[3 * hid + j]);
      const double c = a[hid + j] * c_prev[j] + a[j] * a[2 * hid + j];
      cstate[t * hid + j] = c;
      tanh_c[t * hid + j] = std::tanh(c);
      hout[t * hid + j] = a[3 * hid + j] * tanh_c[t * hid + j];
    }
    std::copy_n(cstate.begin() + t * hid, hid, c_prev.begin());
    std::copy_n(hout.begin() + t * hid, hid, h_prev.begin());
  }
  std::vector<double> y = hout;
  const Tensor w_ih = cell.w_ih, w_hh = cell.w_hh, bias = cell.bias;
  return make_result(
      {steps, hid}, std::move(y), {x, w_ih, w_hh, bias},
      [x, w_ih, w_hh, bias, act = std::move(act), cstate = std::move(cstate),
       tanh_c = std::move(tanh_c), hout = std::move(hout), steps, in, hid, h4,
       reverse](std::span<const double> gy) {
        std::vector<double> dgates(steps * h4, 0.0), hprev_rows(steps * hid, 0.0);
        std::vector<double> dh_next(hid, 0.0), dc_next(hid, 0.0);
        auto whh = w_hh.values();
        for (std::size_t s = steps; s-- > 0;) {
          const std::size_t t = reverse ? steps - 1 - s : s;
          const bool first = (s == 0);
          const std::size_t tp = reverse ? t + 1 : t - 1;  // previous processed index
          const double* a = act.data() + t * h4;
          double* dg = dgates.data() + t * h4;
          for (std::size_t j = 0; j < hid; ++j) {
            const double dh = gy[t * hid + j] + dh_next[j];
            const double i = a[j], f = a[hid + j], g = a[2 * hid + j], o = a[3 * hid + j];
            const double tc = tanh_c[t * hid + j];
            const double dc = dh * o * (1.0 - tc * tc) + dc_next[j];
            const double cp = first ? 0.0 : cstate[tp * hid + j];
            dg[j] = dc * g * i * (1.0 - i);
            dg[hid + j] = dc * cp * f * (1.0 - f);
            dg[2 * hid + j] = dc * i * (1.0 - g * g);
            dg[3 * hid + j] = dh * tc * o * (1.0 - o);
            dc_next[j] = dc * f;
            if (!first) hprev_rows[t * hid + j] = hout[tp * hid + j];
          }
          VecMap(dh_next.data(), hid).noalias() =
              ConstMatMap(whh.data(), hid, h4) * ConstVecMap(dg, h4);
        }
        if (x.requires_grad()) {
          detail::gemm(false, true, steps, in, h4, dgates.data(), w_ih.values().data(),
                       grad_buffer(x).data(), true);
        }
        if (w_ih.requires_grad()) {
          detail::gemm(true, false, in, h4, steps, x.values().data(), dgates.data(),
                       grad_buffer(w_ih).data(), true);
        }
        if (w_hh.requires_grad()) {
          detail::gemm(true, false, hid, h4, steps, hprev_rows.data(), dgates.data(),
                       grad_buffer(w_hh).data(), true);
        }
        if (bias.requires_grad()) {
          auto buf = grad_buffer(bias);
          for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t j = 0; j < h4; ++j) buf[j] += dgates[t * h4 + j];
        }
      });
}

Tensor lstm_forward(const Tensor& x, const LstmParams& params) {
  if (x.rank() != 2 || x.dim(1) != params.input_size) {
    throw DimensionError("lstm: expected [T x " + std::to_string(params.input_size) + "], got " +
                         to_string(x.shape()));
  }
  Tensor h = x;
  for (std::size_t layer = 0; layer < params.num_layers; ++layer) {
    const auto* cells = params.cells.data() + layer * params.directions();
    if (params.bidirectional) {
      h = concat({lstm_layer(h, cells[0], false), lstm_layer(h, cells[1], true)}, 1);
    } else {
      h = lstm_layer(h, cells[0], false);
    }
  }
  return h;
}

namespace {

void check_complex(const ComplexFeature& f, const char* what) {
  if (f.real.shape() != f.imag.shape()) {
    throw DimensionError(std::string(what) + ": real " + to_string(f.real.shape()) +
                         " and imag " + to_string(f.imag.shape()) + " differ");
  }
}

ComplexFeature add_complex_bias(const ComplexFeature& y, const std::optional<ComplexFeature>& bias) {
  if (!bias) return y;
  return {bias_add(y.real, bias->real, 0), bias_add(y.imag, bias->imag, 0)};
}

}  // namespace

ComplexFeature complex_conv2d(const ComplexFeature& x, const ComplexFeature& kernel,
                              const Conv2dGeometry& geom,
                              const std::optional<ComplexFeature>& bias) {
  check_complex(x, "complex_conv2d input");
  check_complex(kernel, "complex_conv2d kernel");
  // Block form: [yr; yi] = [[kr, -ki], [ki, kr]] * [xr; xi]
  const Tensor xs = concat({x.real, x.imag}, 0);
  const Tensor ks = concat({concat({kernel.real, neg(kernel.imag)}, 1),
                            concat({kernel.imag, kernel.real}, 1)},
                           0);
  const Tensor y = conv2d(xs, ks, geom);
  const std::size_t cout = kernel.real.dim(0);
  return add_complex_bias({slice(y, 0, 0, cout), slice(y, 0, cout, 2 * cout)}, bias);
}

ComplexFeature complex_conv2d_transpose(const ComplexFeature& x, const ComplexFeature& kernel,
                                        const Conv2dGeometry& geom,
                                        const std::optional<ComplexFeature>& bias) {
  check_complex(x, "complex_conv2d_transpose input");
  check_complex(kernel, "complex_conv2d_transpose kernel");
  // Kernel rows index input channels: xr feeds (kr | ki), xi feeds (-ki | kr).
  const Tensor xs = concat({x.real, x.imag}, 0);
  const Tensor ks = concat({concat({kernel.real, kernel.imag}, 1),
                            concat({neg(kernel.imag), kernel.real}, 1)},
                           0);
  const Tensor y = conv2d_transpose(xs, ks, geom);
  const std::size_t cy = kernel.real.dim(1);
  return add_complex_bias({slice(y, 0, 0, cy), slice(y, 0, cy, 2 * cy)}, bias);
}

ComplexFeature complex_lstm_enhance(const ComplexFeature& y, const Tensor& clue,
                                    const SequenceMap& real_branch,
                                    const SequenceMap& imag_branch) {
  check_complex(y, "complex_lstm_enhance features");
  if (y.real.rank() != 2 || clue.shape() != y.real.shape()) {
    const auto& s = y.real.shape();
    throw ContractError("complex_lstm_enhance: clue " + to_string(clue.shape()) +
                        " must match features T=" + std::to_string(s.empty() ? 0 : s[0]) +
                        " D=" + std::to_string(s.size() > 1 ? s[1] : 0));
  }
  const Tensor yr = add(y.real, clue);
  const Tensor yi = add(y.imag, clue);
  const Tensor f_rr = real_branch(yr);
  const Tensor f_ir = real_branch(yi);
  const Tensor f_ri = imag_branch(yr);
  const Tensor f_ii = imag_branch(yi);
  return {sub(f_rr, f_ii), add(f_ri, f_ir)};
}

EnhanceParams EnhanceParams::create(std::size_t dim, std::size_t hidden, std::size_t num_layers,
                                    Rng& rng) {
  EnhanceParams p;
  p.lstm_real = LstmParams::create(dim, hidden, num_layers, true, rng);
  p.lstm_imag = LstmParams::create(dim, hidden, num_layers, true, rng);
  p.proj_real = Linear::create(p.lstm_real.output_size(), dim, rng);
  p.proj_imag = Linear::create(p.lstm_imag.output_size(), dim, rng);
  return p;
}

void EnhanceParams::collect(const std::string& prefix, NamedTensors& out) const {
  lstm_real.collect(prefix + ".lstm_real", out);
  lstm_imag.collect(prefix + ".lstm_imag", out);
  proj_real.collect(prefix + ".proj_real", out);
  proj_imag.collect(prefix + ".proj_imag", out);
}

ComplexFeature complex_lstm_enhance(const ComplexFeature& y, const Tensor& clue,
                                    const EnhanceParams& params) {
  const SequenceMap real_branch = [&params](const Tensor& x) {
    return params.proj_real(lstm_forward(x, params.lstm_real));
  };
  const SequenceMap imag_branch = [&params](const Tensor& x) {
    return params.proj_imag(lstm_forward(x, params.lstm_imag));
  };
  return complex_lstm_enhance(y, clue, real_branch, imag_branch);
}

MhaParams MhaParams::create(std::size_t dim, std::size_t heads, Rng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("attention dim " + std::to_string(dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  MhaParams p;
  p.heads = heads;
  p.dim = dim;
  p.query = Linear::create(dim, dim, rng);
  p.key = init_uniform({dim, dim}, dim, rng);
  p.value = Linear::create(dim, dim, rng);
  p.output = Linear::create(dim, dim, rng);
  return p;
}

void MhaParams::collect(const std::string& prefix, NamedTensors& out) const {
  query.collect(prefix + ".query", out);
  out.emplace_back(prefix + ".key.weight", key);
  value.collect(prefix + ".value", out);
  output.collect(prefix + ".output", out);
}

AttentionOutput multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                     const MhaParams& params, const std::vector<bool>& key_mask) {
  const std::size_t d = params.dim;
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.dim(1) != d || k.dim(1) != d ||
      v.dim(1) != d || k.dim(0) != v.dim(0)) {
    throw DimensionError("attention: Q " + to_string(q.shape()) + ", K " + to_string(k.shape()) +
                         ", V " + to_string(v.shape()) + " incompatible with D=" +
                         std::to_string(d));
  }
  const std::size_t tq = q.dim(0), tk = k.dim(0), h = params.heads, dh = d / h;
  if (!key_mask.empty() && key_mask.size() != tk) {
    throw DimensionError("attention: key mask length " + std::to_string(key_mask.size()) +
                         " != " + std::to_string(tk) + " keys");
  }
  const Tensor qp = params.query(q);
  const Tensor kp = matmul(k, params.key);
  const Tensor vp = params.value(v);
  const double s = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> contexts;
  std::vector<double> weights;
  weights.reserve(h * tq * tk);
  for (std::size_t head = 0; head < h; ++head) {
    const Tensor qh = slice(qp, 1, head * dh, (head + 1) * dh);
    const Tensor kh = slice(kp, 1, head * dh, (head + 1) * dh);
    const Tensor vh = slice(vp, 1, head * dh, (head + 1) * dh);
    const Tensor scores = scale(matmul(qh, transpose(kh)), s);
    const Tensor attn = key_mask.empty() ? softmax(scores, 1) : masked_softmax(scores, key_mask);
    auto av = attn.values();
    weights.insert(weights.end(), av.begin(), av.end());
    contexts.push_back(matmul(attn, vh));
  }
  const Tensor ctx = h == 1 ? contexts[0] : concat(contexts, 1);
  return {params.output(ctx), Tensor({h, tq, tk}, std::move(weights))};
}

}  // namespace mctse
