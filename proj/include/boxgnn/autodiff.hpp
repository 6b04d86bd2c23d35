#pragma once

// Reverse-mode automatic differentiation over dense 2-D tensors.
//
// A Tape records every operation in creation order. Because an operation can
// only consume nodes that already exist, creation order is a topological
// order, and backward() walks the tape once in reverse.

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "boxgnn/tensor.hpp"

namespace boxgnn::ad {

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  /// Gradient after backward(); zeros when the node was not reached.
  Tensor grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Var leaf(Tensor value);
  /// Input excluded from differentiation.
  Var constant(Tensor value);

  /// Seeds d(root)/d(root) = 1 and propagates to every node that needs a
  /// gradient. Throws ShapeError unless root is 1x1.
  void backward(Var root);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  Tensor grad(std::size_t id) const;
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Tensor value, std::span<const Var> inputs, Backward backward);
  /// Accumulates g into the gradient of node id (no-op for constants).
  void accumulate(std::size_t id, const Tensor& g);
  Tensor& grad_slot(std::size_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool needs_grad = false;
    Backward backward;
  };
  std::deque<Node> nodes_;
};

// Element-wise binary ops require identical shapes; use broadcast() first.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
/// Element-wise max/min. Ties route the gradient to `a`.
Var maximum(Var a, Var b);
Var minimum(Var a, Var b);

Var matmul(Var a, Var b);

/// Expands a 1x1, 1xn or mx1 tensor to rows x cols.
Var broadcast(Var a, std::size_t rows, std::size_t cols);

Var sum(Var a);
Var mean(Var a);
/// Row-wise sum, m x n -> m x 1.
Var sum_cols(Var a);
/// Row-wise product, m x n -> m x 1.
Var prod_cols(Var a);
/// Column-wise sum, m x n -> 1 x n.
Var sum_rows(Var a);
/// Max over all entries; ties route the gradient to the lowest flat index.
Var max_reduce(Var a);

Var softplus(Var a);
/// log(softplus(a)), accurate for large negative inputs.
Var log_softplus(Var a);
Var relu(Var a);
Var abs(Var a);
/// Throws std::domain_error on any non-positive entry.
Var log(Var a);
Var exp(Var a);
Var square(Var a);
/// Euclidean norm of every row, m x n -> m x 1. The gradient at a zero row is 0.
Var row_norm(Var a);

/// Column-wise concatenation.
Var concat(Var a, Var b);
/// Columns [begin, end).
Var slice(Var a, std::size_t begin, std::size_t end);

Var gather_rows(Var a, std::vector<std::size_t> index);
Var scatter_add_rows(Var a, std::vector<std::size_t> index, std::size_t n_rows);
/// Column-wise max over each group of rows. Ties route to the lowest row.
Var segment_max_rows(Var a, const std::vector<std::vector<std::size_t>>& groups);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double c, Var a) { return scale(a, c); }

}  // namespace boxgnn::ad
