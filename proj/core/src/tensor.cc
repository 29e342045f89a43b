// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mctse/tensor.h"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "mctse/errors.h"

namespace mctse {

namespace {
std::atomic<GemmPrecision> g_gemm_precision{GemmPrecision::kDouble};
thread_local Tape* t_active_tape = nullptr;
}  // namespace

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void set_gemm_precision(GemmPrecision precision) { g_gemm_precision = precision; }
GemmPrecision gemm_precision() { return g_gemm_precision; }

GemmPrecisionScope::GemmPrecisionScope(GemmPrecision precision)
    : previous_(gemm_precision()) {
  set_gemm_precision(precision);
}
GemmPrecisionScope::~GemmPrecisionScope() { set_gemm_precision(previous_); }

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dims must be positive, got " + to_string(shape));
  }
  if (numel_of(shape) != values.size()) {
    throw DimensionError("shape " + to_string(shape) + " needs " +
                         std::to_string(numel_of(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = numel_of(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = numel_of(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      bool requires_grad) {
  if (rows.size() == 0) throw DimensionError("matrix needs at least one row");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> v;
  v.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw DimensionError("ragged matrix rows");
    v.insert(v.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(v), requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return numel_of(shape()); }

std::span<const double> Tensor::values() const {
  shape();
  return node_->value;
}

std::span<double> Tensor::mutable_values() {
  shape();
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t i) const { return values()[i]; }

double Tensor::at(std::size_t i, std::size_t j) const {
  return values()[i * dim(1) + j];
}

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  return values()[(i * dim(1) + j) * dim(2) + k];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_ && node_->leaf; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  shape();
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  shape();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::grad_tensor() const {
  if (!has_grad()) return zeros(shape());
  return Tensor(shape(), node_->grad);
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->value); }

void Tape::record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward) {
  entries_.push_back({std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward needs a scalar loss, got " +
                        (loss.defined() ? to_string(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward: loss does not depend on any tensor that requires grad");
  }
  for (auto& e : entries_) e.output.node()->grad.clear();
  auto& seed = loss.node()->grad;
  if (seed.empty()) seed.assign(1, 0.0);
  seed[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    const auto& g = it->output.node()->grad;
    if (g.empty()) continue;
    it->backward(g);
  }
}

bool Tape::touches(const Tensor& t) const {
  for (const auto& e : entries_) {
    for (const auto& in : e.inputs) {
      if (in.id() == t.id()) return true;
    }
  }
  return false;
}

TapeScope::TapeScope(Tape& tape) : previous_(t_active_tape) { t_active_tape = &tape; }
TapeScope::~TapeScope() { t_active_tape = previous_; }

Tape* active_tape() { return t_active_tape; }

void backward(const Tensor& loss) {
  Tape* tape = active_tape();
  if (!tape) throw ContractError("backward called without an active tape");
  tape->backward(loss);
}

namespace detail {

bool tracks(const Tensor& t) {
  return t_active_tape != nullptr && t.requires_grad();
}

Tensor make_result(Shape shape, std::vector<double> value,
                   const std::vector<Tensor>& inputs, Tape::BackwardFn backward) {
  Tensor out(std::move(shape), std::move(value));
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return tracks(t); });
  if (any) {
    out.node()->requires_grad = true;
    out.node()->leaf = false;
    t_active_tape->record(inputs, out, std::move(backward));
  }
  return out;
}

std::span<double> grad_buffer(const Tensor& t) {
  auto& g = t.node()->grad;
  if (g.empty()) g.assign(t.node()->value.size(), 0.0);
  return g;
}

}  // namespace detail
}  // namespace mctse
