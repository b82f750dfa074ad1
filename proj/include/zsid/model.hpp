// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "zsid/classifiers.hpp"
#include "zsid/extractors.hpp"
#include "zsid/objectives.hpp"

namespace zsid {

enum class Method { linear, capsule, compat_dnn, compat_cdssm };

std::string_view to_string(Method m);
Method method_from_string(std::string_view s);
/// mean-pool-tanh for compat-dnn, cnn for compat-cdssm and linear,
/// birnn-attention for capsule.
ExtractorKind default_extractor(Method m);
bool is_transformation_based(Method m);

/// Everything needed to build the forward graph for one utterance.
struct ModelSpec {
  Method method = Method::linear;
  ExtractorConfig extractor;
  CapsuleConfig capsule;
  std::size_t seen = 0;
  std::size_t unseen = 0;

  std::size_t classes() const { return seen + unseen; }
};

/// Throws ConfigError for method/extractor combinations that cannot work.
void validate(const ModelSpec& spec);

/// Registers extractor and classifier parameters.
void init_model(const ModelSpec& spec, ParameterSet& params, Rng& rng);

struct ForwardPass {
  Extracted features;
  Var scores;          // K: probabilities (linear), norms (capsule), cosines (compat)
  Var logits;          // K pre-softmax scores (linear only)
  Var representation;  // D_H vector used for intent representations
  Routing routing;     // capsule only
};

/// Representation of one utterance as the similarity scorer sees it: mean
/// over time (linear), mean over heads (capsule), pooled vector (compat).
Var representation(const ModelSpec& spec, const Extracted& features);

/// Encodes each label's name-token embeddings with the shared extractor into
/// a K×D_H matrix (compat methods).
Var encode_labels(const ModelSpec& spec, const Binding& params, const std::vector<Var>& label_embeddings);

/// label_reps is required for compat methods and ignored otherwise.
ForwardPass forward(const ModelSpec& spec, const Binding& params, Var embeddings, Var label_reps = {});

/// The method's multi-task objective for one utterance.
LossParts sample_loss(const ModelSpec& spec, const ForwardPass& pass, std::size_t true_class, const LossConfig& cfg);

}  // namespace zsid
