// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include "zsid/objectives.hpp"

#include <string>

#include "zsid/classifiers.hpp"
#include "zsid/errors.hpp"

namespace zsid {

void validate(const LossConfig& c) {
  auto in_unit = [](double m) { return m > 0.0 && m < 1.0; };
  if (c.alpha < 0 || c.lambda < 0 || c.lambda_prime < 0 || c.attention_weight < 0)
    throw ConfigError("loss weights must be >= 0");
  if (!in_unit(c.m_plus) || !in_unit(c.m_minus) || !in_unit(c.m_plus_suid) || !in_unit(c.m_minus_suid))
    throw ConfigError("margins must lie in (0, 1)");
  if (c.m_plus <= c.m_minus || c.m_plus_suid <= c.m_minus_suid)
    throw ConfigError("upper margins must exceed lower margins");
  if (c.margin_gamma < 0 || c.lmcl_scale <= 0 || c.lmcl_margin < 0)
    throw ConfigError("margin_gamma and lmcl_margin must be >= 0, lmcl_scale > 0");
}

namespace {

Var segment_sum(Var scores, std::size_t begin, std::size_t end) {
  if (begin == end) return scores.graph().constant(Tensor::scalar(0.0));
  return sum(slice(scores, begin, end));
}

Var pair(Var a, Var b) { return concat({reshape(a, {1}), reshape(b, {1})}, 0); }

Var one_hot(Graph& g, std::size_t n, std::size_t k) {
  Tensor t({n});
  t[k] = 1.0;
  return g.constant(std::move(t));
}

// Σ T·max(0, m⁺−x)² + λ(1−T)·max(0, x−m⁻)²
Var margin_terms(Var x, std::size_t true_index, double m_plus, double m_minus, double lambda) {
  Graph& g = x.graph();
  const std::size_t n = x.size();
  const Var t = one_hot(g, n, true_index);
  Tensor absent_w({n}, lambda);
  absent_w[true_index] = 0.0;
  const Var present = mul(t, square(relu(scale(shift(x, -m_plus), -1.0))));
  const Var absent = mul(g.constant(std::move(absent_w)), square(relu(shift(x, -m_minus))));
  return sum(add(present, absent));
}

void check_index(const Var& v, std::size_t i, const char* what) {
  if (v.value().rank() != 1 || i >= v.size())
    throw DimensionError(std::string(what) + ": index " + std::to_string(i) + " out of range for " +
                         v.value().shape_string());
}

}  // namespace

Var suid_aggregate(Var scores, std::size_t seen, std::size_t unseen, SuidMode mode) {
  if (scores.value().rank() != 1 || seen + unseen != scores.size())
    throw DimensionError("suid_aggregate: I + J = " + std::to_string(seen + unseen) + " but scores are " +
                         scores.value().shape_string());
  const Var p = pair(segment_sum(scores, 0, seen), segment_sum(scores, seen, seen + unseen));
  return mode == SuidMode::compat_binary_softmax ? softmax(p) : p;
}

Var LossParts::total() const {
  Var t = intent;
  for (const Var& p : {suid, regularizer})
    if (p.valid()) t = add(t, p);
  return t;
}

namespace {

Var suid_nll(Var suid, std::size_t true_suid, double alpha) {
  if (alpha == 0.0) return {};
  return scale(log(pick(suid, true_suid)), -alpha);
}

}  // namespace

LossParts cross_entropy_parts(Var probs, std::size_t true_class, Var suid, std::size_t true_suid,
                              const LossConfig& cfg) {
  check_index(probs, true_class, "multitask_cross_entropy");
  check_index(suid, true_suid, "multitask_cross_entropy");
  return {scale(log(pick(probs, true_class)), -1.0), suid_nll(suid, true_suid, cfg.alpha), {}};
}

Var multitask_cross_entropy(Var probs, std::size_t true_class, Var suid, std::size_t true_suid,
                            const LossConfig& cfg) {
  return cross_entropy_parts(probs, true_class, suid, true_suid, cfg).total();
}

Var attention_penalty(Var a) {
  const std::size_t r = a.value().rows();
  const Var gram = matmul(a, transpose(a));
  return sum(square(sub(gram, a.graph().constant(Tensor::identity(r)))));
}

LossParts margin_parts(Var norms, std::size_t true_class, Var suid, std::size_t true_suid, Var attention,
                       const LossConfig& cfg) {
  check_index(norms, true_class, "margin_multitask");
  check_index(suid, true_suid, "margin_multitask");
  LossParts parts;
  parts.intent = margin_terms(norms, true_class, cfg.m_plus, cfg.m_minus, cfg.lambda);
  if (cfg.lambda_prime != 0.0)
    parts.suid = scale(margin_terms(suid, true_suid, cfg.m_plus_suid, cfg.m_minus_suid, cfg.lambda), cfg.lambda_prime);
  if (attention.valid() && cfg.attention_weight != 0.0)
    parts.regularizer = scale(attention_penalty(attention), cfg.attention_weight);
  return parts;
}

Var margin_multitask(Var norms, std::size_t true_class, Var suid, std::size_t true_suid, Var attention,
                     const LossConfig& cfg) {
  return margin_parts(norms, true_class, suid, true_suid, attention, cfg).total();
}

LossParts compatibility_parts(Var cosines, std::size_t true_class, Var suid, std::size_t true_suid,
                              const LossConfig& cfg, IntentLossKind kind) {
  check_index(cosines, true_class, "compatibility_multitask");
  check_index(suid, true_suid, "compatibility_multitask");
  Graph& g = cosines.graph();
  LossParts parts;
  if (kind == IntentLossKind::cross_entropy) {
    parts.intent = scale(log(pick(softmax(cosines), true_class)), -1.0);
  } else {
    // Σ_{k≠true} max(0, γ − S_true + S_k)
    const std::size_t n = cosines.size();
    Tensor mask({n}, 1.0);
    mask[true_class] = 0.0;
    const Var gap = shift(sub(cosines, pick(cosines, true_class)), cfg.margin_gamma);
    parts.intent = sum(mul(g.constant(std::move(mask)), relu(gap)));
  }
  parts.suid = suid_nll(suid, true_suid, cfg.alpha);
  return parts;
}

Var compatibility_multitask(Var cosines, std::size_t true_class, Var suid, std::size_t true_suid,
                            const LossConfig& cfg, IntentLossKind kind) {
  return compatibility_parts(cosines, true_class, suid, true_suid, cfg, kind).total();
}

Var lmcl_loss(Var feature, std::size_t true_class, Var w, double s, double m) {
  const Tensor& wv = w.value();
  if (feature.value().rank() != 1 || wv.rank() != 2 || wv.rows() != feature.size() || true_class >= wv.cols())
    throw DimensionError("lmcl_loss: feature " + feature.value().shape_string() + " vs weights " +
                         wv.shape_string());
  const Var cos = compatibility_scores(feature, transpose(w));
  Tensor shift_v({wv.cols()});
  shift_v[true_class] = -m;
  const Var logits = scale(add(cos, feature.graph().constant(std::move(shift_v))), s);
  return scale(log(pick(softmax(logits), true_class)), -1.0);
}

}  // namespace zsid
