// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "zsid/autodiff.hpp"
#include "zsid/tensor.hpp"

namespace zsid {

using Rng = std::mt19937_64;

/// Named trainable tensors in registration order.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor init);
  std::size_t index(std::string_view name) const;
  bool contains(std::string_view name) const;

  Tensor& value(std::size_t i) { return values_.at(i); }
  const Tensor& value(std::size_t i) const { return values_.at(i); }
  Tensor& operator[](std::string_view name) { return values_[index(name)]; }
  const Tensor& operator[](std::string_view name) const { return values_[index(name)]; }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  std::size_t size() const { return values_.size(); }
  std::size_t scalar_count() const;

  std::vector<Tensor> zeros() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

/// Graph leaves for every parameter, indexed like the set.
class Binding {
 public:
  Binding(Graph& graph, const ParameterSet& params);
  Var operator[](std::string_view name) const { return vars_[params_->index(name)]; }
  Var at(std::size_t i) const { return vars_.at(i); }
  std::size_t size() const { return vars_.size(); }
  /// Adds the graph gradients of every bound parameter into grads.
  void accumulate_grads(const Graph& graph, std::vector<Tensor>& grads) const;

 private:
  const ParameterSet* params_;
  std::vector<Var> vars_;
};

/// Uniform in ±1/sqrt(fan_in).
Tensor uniform_init(Rng& rng, Shape shape, std::size_t fan_in);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment gradient descent.
class Adam {
 public:
  Adam(AdamConfig cfg, const ParameterSet& params);
  void step(ParameterSet& params, const std::vector<Tensor>& grads);
  std::uint64_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace zsid
