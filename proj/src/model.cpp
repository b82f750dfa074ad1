// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include "zsid/model.hpp"

#include <string>

#include "zsid/errors.hpp"

namespace zsid {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::linear: return "linear";
    case Method::capsule: return "capsule";
    case Method::compat_dnn: return "compat-dnn";
    case Method::compat_cdssm: return "compat-cdssm";
  }
  return "?";
}

Method method_from_string(std::string_view s) {
  for (auto m : {Method::linear, Method::capsule, Method::compat_dnn, Method::compat_cdssm})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown method '" + std::string(s) + "' (expected linear, capsule, compat-dnn or compat-cdssm)");
}

ExtractorKind default_extractor(Method m) {
  switch (m) {
    case Method::linear: return ExtractorKind::cnn;
    case Method::capsule: return ExtractorKind::birnn_attention;
    case Method::compat_dnn: return ExtractorKind::mean_pool_tanh;
    case Method::compat_cdssm: return ExtractorKind::cnn;
  }
  return ExtractorKind::cnn;
}

bool is_transformation_based(Method m) { return m == Method::linear || m == Method::capsule; }

void validate(const ModelSpec& spec) {
  validate(spec.extractor);
  if (spec.seen == 0) throw ConfigError("at least one seen intent is required");
  const ExtractorKind k = spec.extractor.kind;
  switch (spec.method) {
    case Method::linear:
      if (k == ExtractorKind::mean_pool_tanh)
        throw ConfigError("linear method needs hidden states; use cnn, lstm or birnn-attention");
      break;
    case Method::capsule:
      if (k != ExtractorKind::birnn_attention) throw ConfigError("capsule method needs the birnn-attention extractor");
      if (spec.capsule.capsule_dim == 0 || spec.capsule.iterations == 0)
        throw ConfigError("capsule_dim and routing_iterations must be >= 1");
      break;
    case Method::compat_dnn:
    case Method::compat_cdssm:
      if (k != ExtractorKind::mean_pool_tanh && k != ExtractorKind::cnn)
        throw ConfigError("compat methods need a pooled extractor (mean-pool-tanh or cnn)");
      break;
  }
}

void init_model(const ModelSpec& spec, ParameterSet& params, Rng& rng) {
  validate(spec);
  init_extractor(spec.extractor, params, rng);
  const std::size_t dh = spec.extractor.hidden_dim;
  switch (spec.method) {
    case Method::linear:
      params.add("cls.w", uniform_init(rng, {dh, spec.classes()}, dh));
      break;
    case Method::capsule:
      init_capsules(params, rng, spec.extractor.heads, dh, spec.classes(), spec.capsule);
      break;
    default:
      break;
  }
}

Var representation(const ModelSpec& spec, const Extracted& f) {
  switch (spec.method) {
    case Method::linear: return reduce(ReduceOp::mean, f.hidden, 0);
    case Method::capsule: return reduce(ReduceOp::mean, f.heads, 0);
    default: return f.pooled;
  }
}

Var encode_labels(const ModelSpec& spec, const Binding& params, const std::vector<Var>& label_embeddings) {
  std::vector<Var> rows;
  rows.reserve(label_embeddings.size());
  for (const Var& e : label_embeddings) rows.push_back(extract(spec.extractor, params, e).pooled);
  return stack(rows);
}

ForwardPass forward(const ModelSpec& spec, const Binding& params, Var embeddings, Var label_reps) {
  ForwardPass out;
  out.features = extract(spec.extractor, params, embeddings);
  out.representation = representation(spec, out.features);
  switch (spec.method) {
    case Method::linear:
      out.logits = matmul(out.representation, params["cls.w"]);
      out.scores = softmax(out.logits);
      break;
    case Method::capsule:
      out.routing = dynamic_routing(out.features.heads, params["cls.caps.w"], spec.classes(), spec.capsule);
      out.scores = out.routing.norms;
      break;
    default:
      if (!label_reps.valid()) throw ConfigError("compat forward pass needs label representations");
      out.scores = compatibility_scores(out.representation, label_reps);
      break;
  }
  return out;
}

LossParts sample_loss(const ModelSpec& spec, const ForwardPass& pass, std::size_t true_class, const LossConfig& cfg) {
  const std::size_t true_suid = true_class < spec.seen ? 0 : 1;
  switch (spec.method) {
    case Method::linear: {
      const Var suid = suid_aggregate(pass.scores, spec.seen, spec.unseen, SuidMode::linear_prob);
      return cross_entropy_parts(pass.scores, true_class, suid, true_suid, cfg);
    }
    case Method::capsule: {
      const Var suid = suid_aggregate(pass.scores, spec.seen, spec.unseen, SuidMode::capsule_norm);
      return margin_parts(pass.scores, true_class, suid, true_suid, pass.features.attention, cfg);
    }
    case Method::compat_dnn:
    case Method::compat_cdssm: {
      const Var suid = suid_aggregate(pass.scores, spec.seen, spec.unseen, SuidMode::compat_binary_softmax);
      const auto kind = spec.method == Method::compat_dnn ? IntentLossKind::margin : IntentLossKind::cross_entropy;
      return compatibility_parts(pass.scores, true_class, suid, true_suid, cfg, kind);
    }
  }
  throw ConfigError("unknown method");
}

}  // namespace zsid
