// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include "zsid/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include "zsid/errors.hpp"

namespace zsid {

const Tensor& Var::value() const { return graph_->value(*this); }

Graph::Graph(kernels::Exec exec) : exec_(exec) {
#ifdef NDEBUG
  check_finite_ = false;
#else
  check_finite_ = true;
#endif
}

Graph::Node& Graph::node(Var v) {
  if (&v.graph() != this || v.id() >= nodes_.size()) throw std::logic_error("Var from another graph");
  return nodes_[v.id()];
}

const Graph::Node& Graph::node(Var v) const {
  if (&v.graph() != this || v.id() >= nodes_.size()) throw std::logic_error("Var from another graph");
  return nodes_[v.id()];
}

Var Graph::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::variable(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::parameter(const Tensor& storage) {
  Node n;
  n.external = &storage;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

const Tensor& Graph::value(Var v) const { return node(v).value(); }

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

Tensor Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad) return *n.grad;
  return Tensor(n.value().shape());
}

const Tensor* Graph::grad_if_any(Var v) const {
  const Node& n = node(v);
  return n.grad ? &*n.grad : nullptr;
}

Var Graph::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  if (check_finite_ && !value.all_finite()) {
    throw NumericalError("non-finite value produced at graph node " + std::to_string(nodes_.size()));
  }
  Node n;
  n.owned = std::move(value);
  for (const Var& in : inputs) n.requires_grad = n.requires_grad || node(in).requires_grad;
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Tensor& Graph::grad_buffer(Var v) {
  Node& n = node(v);
  if (!n.grad) n.grad = Tensor(n.value().shape());
  return *n.grad;
}

void Graph::accumulate(Var v, const Tensor& delta) {
  if (!node(v).requires_grad) return;
  grad_buffer(v) += delta;
}

void Graph::backward(Var loss) {
  const Node& target = node(loss);
  if (target.value().size() != 1) {
    throw DimensionError("backward needs a scalar loss, got shape " + target.value().shape_string());
  }
  for (auto& n : nodes_) n.grad.reset();
  if (!target.requires_grad) return;
  grad_buffer(loss).fill(1.0);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.grad || !n.backward) continue;
    // Copy: the callback may append to another node's grad, never to its own.
    const Tensor out_grad = *n.grad;
    n.backward(*this, out_grad);
  }
}

namespace {

Graph& same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw std::logic_error("operands live in different graphs");
  return a.graph();
}

bool is_scalar(const Tensor& t) { return t.rank() == 0; }

Shape broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return a.shape();
  if (is_scalar(a)) return b.shape();
  if (is_scalar(b)) return a.shape();
  throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                       b.shape_string());
}

// Gradient w.r.t. an operand that may have been broadcast from a scalar.
Tensor reduce_to(const Tensor& g, const Tensor& operand) {
  if (operand.shape() == g.shape()) return g;
  double s = 0.0;
  for (double v : g.data()) s += v;
  return Tensor::scalar(s);
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const Shape& shape, F f) {
  Tensor out(shape);
  const bool sa = a.size() == 1 && a.shape() != shape;
  const bool sb = b.size() == 1 && b.shape() != shape;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[sa ? 0 : i], b[sb ? 0 : i]);
  return out;
}

Var binary(Var a, Var b, const char* name, double (*f)(double, double),
           void (*df)(double x, double y, double g, double& ga, double& gb)) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Shape shape = broadcast_shape(av, bv, name);
  Tensor out = zip(av, bv, shape, f);
  return g.record(std::move(out), {a, b}, [a, b, shape, df](Graph& g, const Tensor& grad) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const bool sa = av.shape() != shape;
    const bool sb = bv.shape() != shape;
    Tensor ga(shape), gb(shape);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      df(av[sa ? 0 : i], bv[sb ? 0 : i], grad[i], ga[i], gb[i]);
    }
    if (g.requires_grad(a)) g.accumulate(a, reduce_to(ga, av));
    if (g.requires_grad(b)) g.accumulate(b, reduce_to(gb, bv));
  });
}

void check_axis(const Tensor& t, std::size_t axis, const char* op) {
  const std::size_t r = std::max<std::size_t>(t.rank(), 1);
  if (axis >= r || t.rank() > 2) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                         t.shape_string());
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool row_vec = av.rank() == 1;
  const std::size_t m = row_vec ? 1 : av.rows();
  const std::size_t k = row_vec ? av.size() : av.cols();
  if ((av.rank() != 1 && av.rank() != 2) || bv.rank() != 2 || bv.rows() != k) {
    throw DimensionError("matmul: cannot multiply " + av.shape_string() + " by " + bv.shape_string());
  }
  const std::size_t n = bv.cols();
  Tensor out(row_vec ? Shape{n} : Shape{m, n});
  kernels::matmul(g.exec(), av.data(), bv.data(), out.data(), m, k, n);
  return g.record(std::move(out), {a, b}, [a, b, m, k, n](Graph& g, const Tensor& grad) {
    if (g.requires_grad(a)) {
      kernels::matmul_a_bt_acc(g.exec(), grad.data(), b.value().data(), g.grad_buffer(a).data(), m, n,
                               k);
    }
    if (g.requires_grad(b)) {
      kernels::matmul_at_b_acc(g.exec(), a.value().data(), grad.data(), g.grad_buffer(b).data(), k, m,
                               n);
    }
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  if (av.rank() != 2) throw DimensionError("transpose needs a matrix, got " + av.shape_string());
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = av.at(i, j);
  return a.graph().record(std::move(out), {a}, [a, r, c](Graph& g, const Tensor& grad) {
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga.at(i, j) += grad.at(j, i);
  });
}

Var add(Var a, Var b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double g, double& ga, double& gb) {
        ga = g;
        gb = g;
      });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double g, double& ga, double& gb) {
        ga = g;
        gb = -g;
      });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y, double g, double& ga, double& gb) {
        ga = g * y;
        gb = g * x;
      });
}

Var div(Var a, Var b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double x, double y, double g, double& ga, double& gb) {
        ga = g / y;
        gb = -g * x / (y * y);
      });
}

Var scale(Var a, double c) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= c;
  return a.graph().record(std::move(out), {a}, [a, c](Graph& g, const Tensor& grad) {
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < grad.size(); ++i) ga[i] += c * grad[i];
  });
}

Var shift(Var a, double c) {
  Tensor out = a.value();
  for (auto& v : out.data()) v += c;
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Tensor& grad) { g.accumulate(a, grad); });
}

namespace {

double apply_unary(UnaryOp op, double v) {
  switch (op) {
    case UnaryOp::tanh: return std::tanh(v);
    case UnaryOp::relu: return v > 0.0 ? v : 0.0;
    case UnaryOp::sigmoid: return 1.0 / (1.0 + std::exp(-v));
    case UnaryOp::square: return v * v;
    case UnaryOp::exp: return std::exp(v);
  }
  return v;
}

double unary_derivative(UnaryOp op, double x) {
  switch (op) {
    case UnaryOp::tanh: {
      const double y = std::tanh(x);
      return 1.0 - y * y;
    }
    case UnaryOp::relu: return x > 0.0 ? 1.0 : 0.0;
    case UnaryOp::sigmoid: {
      const double y = 1.0 / (1.0 + std::exp(-x));
      return y * (1.0 - y);
    }
    case UnaryOp::square: return 2.0 * x;
    case UnaryOp::exp: return std::exp(x);
  }
  return 0.0;
}

}  // namespace

Var unary(UnaryOp op, Var a) {
  Tensor out = a.value();
  for (auto& v : out.data()) v = apply_unary(op, v);
  return a.graph().record(std::move(out), {a}, [a, op](Graph& g, const Tensor& grad) {
    const Tensor& x = a.value();
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < grad.size(); ++i) ga[i] += unary_derivative(op, x[i]) * grad[i];
  });
}

Var log(Var a, double floor) {
  Tensor out = a.value();
  bool clamped = false;
  for (auto& v : out.data()) {
    if (v < floor) {
      v = floor;
      clamped = true;
    }
    v = std::log(v);
  }
#ifndef NDEBUG
  if (clamped) std::clog << "zsid: log argument clamped at " << floor << '\n';
#else
  (void)clamped;
#endif
  return a.graph().record(std::move(out), {a}, [a, floor](Graph& g, const Tensor& grad) {
    const Tensor& x = a.value();
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (x[i] >= floor) ga[i] += grad[i] / x[i];
    }
  });
}

Var softmax(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 1 && xv.rank() != 2) throw DimensionError("softmax needs rank 1 or 2");
  if (xv.size() == 0) throw DimensionError("softmax of an empty vector");
  const std::size_t rows = xv.rank() == 1 ? 1 : xv.rows();
  const std::size_t n = xv.rank() == 1 ? xv.size() : xv.cols();
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data().data() + r * n;
    double* o = out.data().data() + r * n;
    double mx = in[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, in[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      o[i] = std::exp(in[i] - mx);
      z += o[i];
    }
    for (std::size_t i = 0; i < n; ++i) o[i] /= z;
  }
  Tensor y = out;
  return x.graph().record(std::move(out), {x}, [x, y = std::move(y), rows, n](Graph& g, const Tensor& grad) {
    Tensor& gx = g.grad_buffer(x);
    for (std::size_t r = 0; r < rows; ++r) {
      double inner = 0.0;
      for (std::size_t i = 0; i < n; ++i) inner += y[r * n + i] * grad[r * n + i];
      for (std::size_t i = 0; i < n; ++i) gx[r * n + i] += y[r * n + i] * (grad[r * n + i] - inner);
    }
  });
}

Var reduce(ReduceOp op, Var x, std::size_t axis) {
  const Tensor& xv = x.value();
  check_axis(xv, axis, "reduce");
  // View as outer × len × inner with the reduced axis in the middle.
  std::size_t outer = 1, len = xv.size(), inner = 1;
  Shape out_shape;
  if (xv.rank() == 2) {
    if (axis == 0) {
      len = xv.rows();
      inner = xv.cols();
      out_shape = {inner};
    } else {
      outer = xv.rows();
      len = xv.cols();
      out_shape = {outer};
    }
  }
  if (len == 0) throw DimensionError("reduce over an empty axis");
  Tensor out(out_shape);
  std::vector<std::size_t> argmax(outer * inner, 0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      auto at = [&](std::size_t l) { return xv[(o * len + l) * inner + in]; };
      double acc = 0.0;
      switch (op) {
        case ReduceOp::sum:
        case ReduceOp::mean:
          for (std::size_t l = 0; l < len; ++l) acc += at(l);
          if (op == ReduceOp::mean) acc /= static_cast<double>(len);
          break;
        case ReduceOp::max: {
          std::size_t best = 0;
          for (std::size_t l = 1; l < len; ++l)
            if (at(l) > at(best)) best = l;
          argmax[o * inner + in] = best;
          acc = at(best);
          break;
        }
        case ReduceOp::l2norm:
          for (std::size_t l = 0; l < len; ++l) acc += at(l) * at(l);
          acc = std::sqrt(acc);
          break;
      }
      out[o * inner + in] = acc;
    }
  }
  Tensor result_copy = out;
  return x.graph().record(
      std::move(out), {x},
      [x, op, outer, len, inner, argmax = std::move(argmax), res = std::move(result_copy)](
          Graph& g, const Tensor& grad) {
        const Tensor& xv = x.value();
        Tensor& gx = g.grad_buffer(x);
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t ri = o * inner + in;
            const double gr = grad[ri];
            auto idx = [&](std::size_t l) { return (o * len + l) * inner + in; };
            switch (op) {
              case ReduceOp::sum:
                for (std::size_t l = 0; l < len; ++l) gx[idx(l)] += gr;
                break;
              case ReduceOp::mean:
                for (std::size_t l = 0; l < len; ++l) gx[idx(l)] += gr / static_cast<double>(len);
                break;
              case ReduceOp::max:
                gx[idx(argmax[ri])] += gr;
                break;
              case ReduceOp::l2norm:
                if (res[ri] > 0.0) {
                  for (std::size_t l = 0; l < len; ++l) gx[idx(l)] += gr * xv[idx(l)] / res[ri];
                }
                break;
            }
          }
        }
      });
}

Var sum(Var x) {
  const Tensor& xv = x.value();
  double s = 0.0;
  for (double v : xv.data()) s += v;
  return x.graph().record(Tensor::scalar(s), {x}, [x](Graph& g, const Tensor& grad) {
    Tensor& gx = g.grad_buffer(x);
    const double gr = grad[0];
    for (auto& v : gx.data()) v += gr;
  });
}

Var dot(Var a, Var b) {
  if (a.value().rank() != 1 || a.shape() != b.shape()) {
    throw DimensionError("dot: incompatible shapes " + a.value().shape_string() + " and " +
                         b.value().shape_string());
  }
  return sum(mul(a, b));
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of nothing");
  Graph& g = parts.front().graph();
  const Tensor& first = parts.front().value();
  const std::size_t rank = first.rank();
  if (rank == 0 || rank > 2 || axis >= rank) throw DimensionError("concat: bad axis for " + first.shape_string());
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    same_graph(parts.front(), p);
    if (t.rank() != rank || (rank == 2 && (axis == 0 ? t.cols() != first.cols() : t.rows() != first.rows()))) {
      throw DimensionError("concat: incompatible " + first.shape_string() + " and " + t.shape_string());
    }
    const std::size_t e = rank == 1 ? t.size() : (axis == 0 ? t.rows() : t.cols());
    extents.push_back(e);
    total += e;
  }
  Tensor out;
  if (rank == 1) {
    out = Tensor({total});
  } else if (axis == 0) {
    out = Tensor({total, first.cols()});
  } else {
    out = Tensor({first.rows(), total});
  }
  const std::size_t outer = (rank == 2 && axis == 1) ? first.rows() : 1;
  const std::size_t unit = (rank == 2 && axis == 0) ? first.cols() : 1;
  const std::size_t out_row = total * unit;
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& t = parts[p].value();
    const std::size_t w = extents[p] * unit;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < w; ++i) out[o * out_row + offset + i] = t[o * w + i];
    offset += w;
  }
  return g.record(std::move(out), parts, [parts, extents, outer, unit, out_row](Graph& g, const Tensor& grad) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const std::size_t w = extents[p] * unit;
      if (g.requires_grad(parts[p])) {
        Tensor& gp = g.grad_buffer(parts[p]);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < w; ++i) gp[o * w + i] += grad[o * out_row + offset + i];
      }
      offset += w;
    }
  });
}

Var stack(const std::vector<Var>& rows) {
  if (rows.empty()) throw DimensionError("stack of nothing");
  const std::size_t n = rows.front().value().size();
  for (const Var& r : rows) {
    if (r.value().rank() != 1 || r.value().size() != n) throw DimensionError("stack: rows must be equal-length vectors");
  }
  std::vector<Var> as_rows;
  as_rows.reserve(rows.size());
  for (const Var& r : rows) as_rows.push_back(reshape(r, {1, n}));
  return concat(as_rows, 0);
}

Var row(Var m, std::size_t i) {
  const Tensor& mv = m.value();
  if (mv.rank() != 2 || i >= mv.rows()) throw DimensionError("row " + std::to_string(i) + " of " + mv.shape_string());
  const std::size_t cols = mv.cols();
  return reshape(slice(m, i, i + 1), {cols});
}

Var slice(Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  if (xv.rank() == 0 || xv.rank() > 2 || begin > end || end > xv.rows()) {
    throw DimensionError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") of " + xv.shape_string());
  }
  const std::size_t unit = xv.rank() == 2 ? xv.cols() : 1;
  Shape shape = xv.shape();
  shape[0] = end - begin;
  std::vector<double> data(xv.data().begin() + begin * unit, xv.data().begin() + end * unit);
  return x.graph().record(Tensor(std::move(shape), std::move(data)), {x},
                          [x, begin, unit](Graph& g, const Tensor& grad) {
                            Tensor& gx = g.grad_buffer(x);
                            for (std::size_t i = 0; i < grad.size(); ++i) gx[begin * unit + i] += grad[i];
                          });
}

Var pick(Var v, std::size_t i) {
  const Tensor& t = v.value();
  if (t.rank() != 1 || i >= t.size()) throw DimensionError("pick " + std::to_string(i) + " of " + t.shape_string());
  return reshape(slice(v, i, i + 1), {});
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.graph().record(std::move(out), {x}, [x](Graph& g, const Tensor& grad) {
    Tensor& gx = g.grad_buffer(x);
    for (std::size_t i = 0; i < grad.size(); ++i) gx[i] += grad[i];
  });
}

Var add_bias(Var x, Var bias) {
  Graph& g = same_graph(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  const std::size_t n = xv.rank() == 1 ? xv.size() : xv.cols();
  if (bv.rank() != 1 || bv.size() != n || xv.rank() == 0 || xv.rank() > 2) {
    throw DimensionError("add_bias: " + xv.shape_string() + " with bias " + bv.shape_string());
  }
  Tensor out = xv;
  const std::size_t rows = out.size() / std::max<std::size_t>(n, 1);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bv[j];
  return g.record(std::move(out), {x, bias}, [x, bias, rows, n](Graph& g, const Tensor& grad) {
    g.accumulate(x, grad);
    if (g.requires_grad(bias)) {
      Tensor& gb = g.grad_buffer(bias);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j) gb[j] += grad[r * n + j];
    }
  });
}

Var scale_rows(Var m, Var v) {
  Graph& g = same_graph(m, v);
  const Tensor& mv = m.value();
  const Tensor& vv = v.value();
  if (mv.rank() != 2 || vv.rank() != 1 || vv.size() != mv.rows()) {
    throw DimensionError("scale_rows: " + mv.shape_string() + " by " + vv.shape_string());
  }
  const std::size_t r = mv.rows(), c = mv.cols();
  Tensor out = mv;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) *= vv[i];
  return g.record(std::move(out), {m, v}, [m, v, r, c](Graph& g, const Tensor& grad) {
    const Tensor& mv = m.value();
    const Tensor& vv = v.value();
    if (g.requires_grad(m)) {
      Tensor& gm = g.grad_buffer(m);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gm.at(i, j) += grad.at(i, j) * vv[i];
    }
    if (g.requires_grad(v)) {
      Tensor& gv = g.grad_buffer(v);
      for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += grad.at(i, j) * mv.at(i, j);
        gv[i] += acc;
      }
    }
  });
}

Var unfold(Var x, std::size_t width) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || width == 0 || width > xv.rows()) {
    throw DimensionError("unfold width " + std::to_string(width) + " over " + xv.shape_string());
  }
  const std::size_t t_out = xv.rows() - width + 1;
  const std::size_t d = xv.cols();
  Tensor out({t_out, width * d});
  for (std::size_t t = 0; t < t_out; ++t)
    for (std::size_t w = 0; w < width; ++w)
      for (std::size_t j = 0; j < d; ++j) out.at(t, w * d + j) = xv.at(t + w, j);
  return x.graph().record(std::move(out), {x}, [x, t_out, width, d](Graph& g, const Tensor& grad) {
    Tensor& gx = g.grad_buffer(x);
    for (std::size_t t = 0; t < t_out; ++t)
      for (std::size_t w = 0; w < width; ++w)
        for (std::size_t j = 0; j < d; ++j) gx.at(t + w, j) += grad.at(t, w * d + j);
  });
}

Var squash(Var s) {
  const Tensor& sv = s.value();
  if (sv.rank() != 1 && sv.rank() != 2) throw DimensionError("squash needs rank 1 or 2");
  const std::size_t rows = sv.rank() == 1 ? 1 : sv.rows();
  const std::size_t n = sv.rank() == 1 ? sv.size() : sv.cols();
  Tensor out(sv.shape());
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double n2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) n2 += sv[r * n + i] * sv[r * n + i];
    const double norm = std::sqrt(n2);
    norms[r] = norm;
    const double f = norm / (1.0 + n2);  // |s|²/(1+|s|²) · 1/|s|
    for (std::size_t i = 0; i < n; ++i) out[r * n + i] = f * sv[r * n + i];
  }
  return s.graph().record(std::move(out), {s}, [s, rows, n, norms = std::move(norms)](Graph& g, const Tensor& grad) {
    const Tensor& sv = s.value();
    Tensor& gs = g.grad_buffer(s);
    for (std::size_t r = 0; r < rows; ++r) {
      const double norm = norms[r];
      if (norm == 0.0) continue;
      const double n2 = norm * norm;
      const double f = norm / (1.0 + n2);
      const double fprime = (1.0 - n2) / ((1.0 + n2) * (1.0 + n2));
      double sg = 0.0;
      for (std::size_t i = 0; i < n; ++i) sg += sv[r * n + i] * grad[r * n + i];
      const double c = fprime / norm * sg;
      for (std::size_t i = 0; i < n; ++i) gs[r * n + i] += f * grad[r * n + i] + c * sv[r * n + i];
    }
  });
}

}  // namespace zsid
