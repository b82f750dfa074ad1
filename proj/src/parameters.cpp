// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include "zsid/parameters.hpp"

#include <cmath>

#include "zsid/errors.hpp"

namespace zsid {

std::size_t ParameterSet::add(std::string name, Tensor init) {
  if (contains(name)) throw std::logic_error("duplicate parameter " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return values_.size() - 1;
}

std::size_t ParameterSet::index(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  throw std::out_of_range("no parameter named " + std::string(name));
}

bool ParameterSet::contains(std::string_view name) const {
  for (const auto& n : names_)
    if (n == name) return true;
  return false;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

std::vector<Tensor> ParameterSet::zeros() const {
  std::vector<Tensor> out;
  out.reserve(values_.size());
  for (const auto& v : values_) out.push_back(Tensor::zeros_like(v));
  return out;
}

Binding::Binding(Graph& graph, const ParameterSet& params) : params_(&params) {
  vars_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) vars_.push_back(graph.parameter(params.value(i)));
}

void Binding::accumulate_grads(const Graph& graph, std::vector<Tensor>& grads) const {
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (const Tensor* g = graph.grad_if_any(vars_[i])) grads[i] += *g;
  }
}

Tensor uniform_init(Rng& rng, Shape shape, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Adam::Adam(AdamConfig cfg, const ParameterSet& params) : cfg_(cfg), m_(params.zeros()), v_(params.zeros()) {}

void Adam::step(ParameterSet& params, const std::vector<Tensor>& grads) {
  if (grads.size() != params.size()) throw DimensionError("Adam: gradient count mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params.value(i);
    const Tensor& g = grads[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

}  // namespace zsid
