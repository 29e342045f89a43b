// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Dense row-major tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a cheap handle onto shared storage. Values are immutable once
// an op has produced them; only the gradient accumulator and (between
// optimizer steps) parameter values are written. Ops record themselves onto
// the thread's active Tape when at least one input requires a gradient, so
// forward passes without a TapeScope build no graph at all.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mctse {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string to_string(const Shape& shape);

// Precision used inside the matrix-product kernels (matmul, conv, LSTM).
// Storage is always double; kSingle rounds GEMM operands to float, which is
// roughly 3x faster on AVX hardware and adequate for training. Gradient
// checks must run with kDouble.
enum class GemmPrecision { kDouble, kSingle };
void set_gemm_precision(GemmPrecision precision);
GemmPrecision gemm_precision();

// RAII guard that restores the previous GEMM precision.
class GemmPrecisionScope {
 public:
  explicit GemmPrecisionScope(GemmPrecision precision);
  ~GemmPrecisionScope();
  GemmPrecisionScope(const GemmPrecisionScope&) = delete;
  GemmPrecisionScope& operator=(const GemmPrecisionScope&) = delete;

 private:
  GemmPrecision previous_;
};

namespace detail {
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  bool leaf = true;
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  // 2-D tensor from nested rows; all rows must have equal length.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  // Writable view for optimizers and initializers. Never call while a tape
  // that references this tensor is still alive.
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t i, std::size_t j) const;
  double at(std::size_t i, std::size_t j, std::size_t k) const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();
  // Gradient as a tensor of the same shape (zeros when absent).
  Tensor grad_tensor() const;

  // Value copy with no gradient tracking.
  Tensor detach() const;

  const void* id() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Ordered record of differentiable operations.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const double> out_grad)>;

  void record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and walks the tape in exact reverse order.
  // Intermediate gradients are recomputed from scratch on every call; leaf
  // gradients accumulate across calls.
  void backward(const Tensor& loss);

  // True if any recorded op consumed `t`.
  bool touches(const Tensor& t) const;
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
};

// Makes `tape` the active tape for the current thread for the scope's
// lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

// Runs backward on the active tape. Throws ContractError without one.
void backward(const Tensor& loss);

namespace detail {

// True when `t` participates in gradient computation under the active tape.
bool tracks(const Tensor& t);

// Builds an op result. When a tape is active and any input tracks
// gradients, the result requires grad and `backward` is recorded.
Tensor make_result(Shape shape, std::vector<double> value,
                   const std::vector<Tensor>& inputs, Tape::BackwardFn backward);

// Gradient buffer of `t`, zero-allocated on first use. Only valid for
// tensors that require grad.
std::span<double> grad_buffer(const Tensor& t);

}  // namespace detail
}  // namespace mctse
