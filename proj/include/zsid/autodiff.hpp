// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "zsid/kernels.hpp"
#include "zsid/tensor.hpp"

namespace zsid {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Tape for reverse-mode differentiation. Nodes are appended in creation
/// order, which is a topological order, and backward walks it once in reverse.
class Graph {
 public:
  /// Receives the graph and the gradient flowing into the node's output.
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  explicit Graph(kernels::Exec exec = kernels::Exec::parallel);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Owned leaf that receives a gradient.
  Var variable(Tensor value);
  /// Non-owning leaf bound to external storage (must outlive the graph).
  Var parameter(const Tensor& storage);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  /// Gradient of the last backward() target w.r.t. v; zeros when unreached.
  Tensor grad(Var v) const;
  /// nullptr when nothing flowed into v.
  const Tensor* grad_if_any(Var v) const;

  /// Runs reverse accumulation from a scalar node. Gradients are reset
  /// first, so calling it twice yields identical results.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  kernels::Exec exec() const { return exec_; }

  /// Raise NumericalError as soon as an op produces NaN/Inf.
  void set_check_finite(bool on) { check_finite_ = on; }

  // Op construction (used by the free functions below).
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);
  /// Accumulates delta into the gradient of v if v requires one.
  void accumulate(Var v, const Tensor& delta);
  /// Mutable gradient buffer for v, allocated on first use.
  Tensor& grad_buffer(Var v);

 private:
  struct Node {
    std::optional<Tensor> owned;
    const Tensor* external = nullptr;
    std::vector<Var> inputs;
    BackwardFn backward;
    std::optional<Tensor> grad;
    bool requires_grad = false;

    const Tensor& value() const { return external ? *external : *owned; }
  };

  Node& node(Var v);
  const Node& node(Var v) const;

  std::deque<Node> nodes_;  // stable addresses while appending
  kernels::Exec exec_;
  bool check_finite_;
};

enum class ReduceOp { sum, mean, max, l2norm };
enum class UnaryOp { tanh, relu, sigmoid, square, exp };

// Matrix product. A rank-1 left operand is treated as a row vector and the
// result is rank-1.
Var matmul(Var a, Var b);
Var transpose(Var a);

// Elementwise binaries: equal shapes, or one operand rank-0.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var scale(Var a, double c);
Var shift(Var a, double c);
Var unary(UnaryOp op, Var a);
inline Var tanh(Var a) { return unary(UnaryOp::tanh, a); }
inline Var relu(Var a) { return unary(UnaryOp::relu, a); }
inline Var sigmoid(Var a) { return unary(UnaryOp::sigmoid, a); }
inline Var square(Var a) { return unary(UnaryOp::square, a); }
inline Var exp(Var a) { return unary(UnaryOp::exp, a); }
/// log(max(x, floor)); the gradient is zero where the floor is active.
Var log(Var a, double floor = 1e-12);

/// Softmax of a vector, or of every row of a matrix.
Var softmax(Var x);

/// Reduction along an axis; the reduced axis is dropped. Max routes its
/// gradient to the first maximiser.
Var reduce(ReduceOp op, Var x, std::size_t axis);
/// Sum of all entries (rank-0 result).
Var sum(Var x);
Var dot(Var a, Var b);

Var concat(const std::vector<Var>& parts, std::size_t axis);
/// Rows from equally sized vectors.
Var stack(const std::vector<Var>& rows);
Var row(Var m, std::size_t i);
/// Entries [begin, end) of a vector, or rows [begin, end) of a matrix.
Var slice(Var x, std::size_t begin, std::size_t end);
Var pick(Var v, std::size_t i);
Var reshape(Var x, Shape shape);

/// Adds a length-n bias to every row of an m×n matrix (or to a length-n vector).
Var add_bias(Var x, Var bias);
/// Multiplies row i of m by v[i].
Var scale_rows(Var m, Var v);
/// Sliding windows: row t holds rows t..t+width-1 of x concatenated.
Var unfold(Var x, std::size_t width);

/// v = (|s|²/(1+|s|²)) s/|s| for a vector, or row-wise for a matrix.
Var squash(Var s);

}  // namespace zsid
