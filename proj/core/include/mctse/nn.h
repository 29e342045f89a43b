// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Parameterized layers. Parameter structs are plain aggregates of Tensors;
// `create` draws weights from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) and
// zeroes biases (LSTM forget-gate bias starts at 1).

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mctse/ops.h"
#include "mctse/random.h"
#include "mctse/tensor.h"

namespace mctse {

Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng);

// Named view of a parameter for checkpointing and optimizers.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  static Linear create(std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, NamedTensors& out) const;
};

// x W + b for x: [L x in].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// One direction of one LSTM layer. Gate column order: input, forget, cell,
// output.
struct LstmCell {
  Tensor w_ih;  // [in x 4H]
  Tensor w_hh;  // [H x 4H]
  Tensor bias;  // [4H]
};

struct LstmParams {
  std::size_t input_size = 0;
  std::size_t hidden = 0;
  std::size_t num_layers = 0;
  bool bidirectional = true;
  std::vector<LstmCell> cells;  // index: layer * directions + direction

  static LstmParams create(std::size_t input_size, std::size_t hidden, std::size_t num_layers,
                           bool bidirectional, Rng& rng);
  std::size_t directions() const { return bidirectional ? 2 : 1; }
  std::size_t output_size() const { return hidden * directions(); }
  void collect(const std::string& prefix, NamedTensors& out) const;
};

// Single-direction recurrence over x: [T x in] -> [T x H], fused into one
// tape entry with an explicit backpropagation-through-time rule. Zero
// initial state.
Tensor lstm_layer(const Tensor& x, const LstmCell& cell, bool reverse);

// Stacked (optionally bidirectional) LSTM: [T x in] -> [T x output_size()].
Tensor lstm_forward(const Tensor& x, const LstmParams& params);

struct ComplexFeature {
  Tensor real;
  Tensor imag;

  const Shape& shape() const { return real.shape(); }
};

// real = conv(xr, kr) - conv(xi, ki); imag = conv(xr, ki) + conv(xi, kr).
// Kernel parts are [Cout x Cin x kh x kw]; bias parts [Cout].
ComplexFeature complex_conv2d(const ComplexFeature& x, const ComplexFeature& kernel,
                              const Conv2dGeometry& geom,
                              const std::optional<ComplexFeature>& bias = std::nullopt);

// Transposed analog with the same complex combination rule. Kernel parts
// are [Cx x Cy x kh x kw].
ComplexFeature complex_conv2d_transpose(const ComplexFeature& x, const ComplexFeature& kernel,
                                        const Conv2dGeometry& geom,
                                        const std::optional<ComplexFeature>& bias = std::nullopt);

using SequenceMap = std::function<Tensor(const Tensor&)>;

// Clue-conditioned complex recurrence:
//   F_rr = R(Y_r + c)   F_ir = R(Y_i + c)
//   F_ri = I(Y_r + c)   F_ii = I(Y_i + c)
//   out  = (F_rr - F_ii) + i (F_ri + F_ir)
// where R and I are the real- and imaginary-branch sequence maps.
ComplexFeature complex_lstm_enhance(const ComplexFeature& y, const Tensor& clue,
                                    const SequenceMap& real_branch,
                                    const SequenceMap& imag_branch);

// Each branch is an LSTM followed by a linear projection back to D.
struct EnhanceParams {
  LstmParams lstm_real;
  LstmParams lstm_imag;
  Linear proj_real;
  Linear proj_imag;

  static EnhanceParams create(std::size_t dim, std::size_t hidden, std::size_t num_layers,
                              Rng& rng);
  void collect(const std::string& prefix, NamedTensors& out) const;
};

ComplexFeature complex_lstm_enhance(const ComplexFeature& y, const Tensor& clue,
                                    const EnhanceParams& params);

struct MhaParams {
  std::size_t heads = 4;
  std::size_t dim = 0;
  Linear query;
  Tensor key;  // [D x D], bias-free
  Linear value, output;

  static MhaParams create(std::size_t dim, std::size_t heads, Rng& rng);
  void collect(const std::string& prefix, NamedTensors& out) const;
};

struct AttentionOutput {
  Tensor out;      // [Tq x D]
  Tensor weights;  // [heads x Tq x Tk], detached
};

// Scaled dot-product attention with 1/sqrt(D/h) scaling and no positional
// encoding. `key_mask` (empty = all keys live) marks which key rows take
// part; masked keys receive exactly zero weight.
AttentionOutput multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                     const MhaParams& params,
                                     const std::vector<bool>& key_mask = {});

}  // namespace mctse
