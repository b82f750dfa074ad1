// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "zsid/autodiff.hpp"
#include "zsid/parameters.hpp"

namespace zsid {

/// softmax(mean_t(hidden) · weights). hidden: T×D_H, weights: D_H×K.
Var linear_classify(Var hidden, Var weights);
/// Pre-softmax scores mean_t(hidden) · weights.
Var linear_logits(Var hidden, Var weights);

struct CapsuleConfig {
  std::size_t capsule_dim = 16;
  std::size_t iterations = 3;
};

/// Registers "cls.caps.w" of shape (R·D_H)×(K·D_C): rows r·D_H..(r+1)·D_H hold
/// the per-head transforms of every class side by side.
void init_capsules(ParameterSet& params, Rng& rng, std::size_t heads, std::size_t hidden_dim,
                   std::size_t classes, const CapsuleConfig& cfg);

struct Routing {
  std::vector<Var> predictions;  // per head r: K×D_C prediction vectors
  Var coupling;                  // R×K, each row sums to 1
  Var total;                     // K×D_C weighted sums before squashing
  Var activations;               // K×D_C
  Var norms;                     // K
};

/// Dynamic routing of R head features (R×D_H) into K capsules. Routing logits
/// start at zero on every call and gradients flow through every iteration.
Routing dynamic_routing(Var heads, Var weights, std::size_t classes, const CapsuleConfig& cfg);

/// Cosine between rep (D) and each row of label_reps (K×D). Zero-norm
/// vectors raise NumericalError.
Var compatibility_scores(Var rep, Var label_reps);

}  // namespace zsid
