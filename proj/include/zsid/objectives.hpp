// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

#include "zsid/autodiff.hpp"

namespace zsid {

struct LossConfig {
  double alpha = 0.5;         // SUID weight in the cross-entropy and compatibility losses
  double lambda = 0.5;        // weight of absent-class margin terms
  double lambda_prime = 0.5;  // SUID weight in the capsule margin loss
  double m_plus = 0.9;
  double m_minus = 0.1;
  double m_plus_suid = 0.9;
  double m_minus_suid = 0.1;
  double attention_weight = 1e-2;
  double margin_gamma = 0.1;  // compat-dnn hinge margin
  double lmcl_scale = 30.0;
  double lmcl_margin = 0.35;
};

void validate(const LossConfig& cfg);

/// A loss split into its intent, SUID and regularizer contributions. Absent
/// parts stay invalid.
struct LossParts {
  Var intent;
  Var suid;
  Var regularizer;

  Var total() const;
};

enum class SuidMode { linear_prob, capsule_norm, compat_binary_softmax };

/// Vector (P_seen, P_unseen) from per-class scores; the first `seen` entries
/// are seen classes, the next `unseen` unseen ones.
Var suid_aggregate(Var scores, std::size_t seen, std::size_t unseen, SuidMode mode);

/// -log p[true] - alpha·log P[true_suid], both logs floored at 1e-12.
LossParts cross_entropy_parts(Var probs, std::size_t true_class, Var suid, std::size_t true_suid,
                              const LossConfig& cfg);
Var multitask_cross_entropy(Var probs, std::size_t true_class, Var suid, std::size_t true_suid,
                            const LossConfig& cfg);

/// ‖A·Aᵀ − I‖²_F.
Var attention_penalty(Var attention);

/// Capsule margin loss with its SUID pair and, when attention is valid, the
/// weighted attention penalty.
LossParts margin_parts(Var norms, std::size_t true_class, Var suid, std::size_t true_suid, Var attention,
                       const LossConfig& cfg);
Var margin_multitask(Var norms, std::size_t true_class, Var suid, std::size_t true_suid, Var attention,
                     const LossConfig& cfg);

enum class IntentLossKind { cross_entropy, margin };

LossParts compatibility_parts(Var cosines, std::size_t true_class, Var suid, std::size_t true_suid,
                              const LossConfig& cfg, IntentLossKind kind);
Var compatibility_multitask(Var cosines, std::size_t true_class, Var suid, std::size_t true_suid,
                            const LossConfig& cfg, IntentLossKind kind);

/// Large-margin cosine loss for one feature vector against class weight
/// columns (D×C): cross-entropy of s·(cos − m·[k = true]).
Var lmcl_loss(Var feature, std::size_t true_class, Var class_weights, double scale, double margin);

}  // namespace zsid
