// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "earlydrop/tensor.hpp"

namespace earlydrop {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode tape over dense tensors.
///
/// Every operation evaluates eagerly and records a closure that pushes the
/// output gradient back to its inputs. backward() may run once; a second call
/// throws. Closures capture node ids only, so a Tape is freely movable.
///
/// The operation set is deliberately small: matmul, bias-add, elementwise
/// add/mul, ReLU, GELU (tanh approximation), layer normalization,
/// softmax cross-entropy, and a constant mask multiply used for dropout and
/// stochastic depth.
class Tape {
public:
  Tape() = default;
  Tape(Tape &&) noexcept = default;
  Tape &operator=(Tape &&) noexcept = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  Var constant(Tensor value);
  /// Leaf that accumulates a gradient.
  Var parameter(Tensor value);

  /// x[n,k] * w[k,m]
  Var matmul(Var x, Var w, std::string_view layer);
  /// x[n,m] + b[m] on every row.
  Var add_bias(Var x, Var b, std::string_view layer);
  Var add(Var a, Var b, std::string_view layer = "add");
  Var mul(Var a, Var b, std::string_view layer = "mul");
  /// x * mask where the mask is a constant of x's shape.
  Var mask(Var x, Tensor mask, std::string_view layer);
  Var relu(Var x);
  Var gelu(Var x);
  /// Normalizes each row over its trailing dimension.
  Var layer_norm(Var x, Var gamma, Var beta, std::string_view layer, double eps = 1e-5);
  /// Mean cross-entropy of softmax(logits) against integer labels; a scalar.
  Var softmax_cross_entropy(Var logits, std::span<const std::uint32_t> labels,
                            std::string_view layer);

  const Tensor &value(Var v) const { return nodes_.at(v.id).value; }
  /// Gradient of the loss w.r.t. v; zeros when nothing flowed into it.
  Tensor grad(Var v) const;

  void backward(Var loss);
  bool consumed() const noexcept { return consumed_; }
  std::size_t size() const noexcept { return nodes_.size(); }

private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::function<void(Tape &, std::size_t self)> back;
  };

  Var push(Tensor value, bool needs_grad, std::function<void(Tape &, std::size_t)> back);
  Tensor &grad_ref(std::size_t id);
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

/// Numerical kernels shared by the tape and by direct Tensor callers.
namespace kernels {
double gelu(double x);
double gelu_grad(double x);
} // namespace kernels

} // namespace earlydrop
