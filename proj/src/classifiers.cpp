// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include "zsid/classifiers.hpp"

#include <string>

#include "zsid/errors.hpp"

namespace zsid {

Var linear_logits(Var hidden, Var weights) {
  if (hidden.value().rank() != 2) throw DimensionError("linear_classify: hidden states must be T×D_H");
  return matmul(reduce(ReduceOp::mean, hidden, 0), weights);
}

Var linear_classify(Var hidden, Var weights) { return softmax(linear_logits(hidden, weights)); }

void init_capsules(ParameterSet& params, Rng& rng, std::size_t heads, std::size_t hidden_dim,
                   std::size_t classes, const CapsuleConfig& cfg) {
  if (heads == 0 || classes == 0 || cfg.capsule_dim == 0 || cfg.iterations == 0)
    throw ConfigError("capsules: heads, classes, capsule_dim and routing iterations must be >= 1");
  params.add("cls.caps.w", uniform_init(rng, {heads * hidden_dim, classes * cfg.capsule_dim}, hidden_dim));
}

Routing dynamic_routing(Var heads, Var weights, std::size_t classes, const CapsuleConfig& cfg) {
  const Tensor& hv = heads.value();
  const Tensor& wv = weights.value();
  if (hv.rank() != 2) throw DimensionError("dynamic_routing: heads must be R×D_H, got " + hv.shape_string());
  const std::size_t R = hv.rows();
  const std::size_t dh = hv.cols();
  const std::size_t dc = cfg.capsule_dim;
  if (wv.rank() != 2 || wv.rows() != R * dh || wv.cols() != classes * dc)
    throw DimensionError("dynamic_routing: weights " + wv.shape_string() + " do not fit R=" + std::to_string(R) +
                         ", D_H=" + std::to_string(dh) + ", K=" + std::to_string(classes) +
                         ", D_C=" + std::to_string(dc));
  if (cfg.iterations == 0) throw ConfigError("dynamic_routing: iterations must be >= 1");
  Graph& g = heads.graph();

  Routing out;
  for (std::size_t r = 0; r < R; ++r) {
    const Var u = matmul(row(heads, r), slice(weights, r * dh, (r + 1) * dh));
    out.predictions.push_back(reshape(u, {classes, dc}));
  }

  std::vector<Var> logits(R, g.constant(Tensor({classes})));
  std::vector<Var> coupling(R);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    Var total;
    for (std::size_t r = 0; r < R; ++r) {
      coupling[r] = softmax(logits[r]);
      const Var part = scale_rows(out.predictions[r], coupling[r]);
      total = r == 0 ? part : add(total, part);
    }
    out.total = total;
    out.activations = squash(total);
    if (it + 1 < cfg.iterations) {
      for (std::size_t r = 0; r < R; ++r)
        logits[r] = add(logits[r], reduce(ReduceOp::sum, mul(out.predictions[r], out.activations), 1));
    }
  }
  out.coupling = stack(coupling);
  out.norms = reduce(ReduceOp::l2norm, out.activations, 1);
  return out;
}

Var compatibility_scores(Var rep, Var label_reps) {
  const Tensor& rv = rep.value();
  const Tensor& lv = label_reps.value();
  if (rv.rank() != 1 || lv.rank() != 2 || lv.cols() != rv.size())
    throw DimensionError("compatibility_scores: " + rv.shape_string() + " vs " + lv.shape_string());
  const Var rn = reduce(ReduceOp::l2norm, rep, 0);
  const Var ln = reduce(ReduceOp::l2norm, label_reps, 1);
  if (rn.value().item() == 0.0) throw NumericalError("compatibility_scores: zero-norm utterance representation");
  for (double n : ln.value().data())
    if (n == 0.0) throw NumericalError("compatibility_scores: zero-norm label representation");
  const Var dots = matmul(label_reps, reshape(rep, {rv.size(), 1}));
  return div(div(reshape(dots, {lv.rows()}), ln), rn);
}

}  // namespace zsid
