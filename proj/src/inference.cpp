// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include "zsid/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "zsid/autodiff.hpp"
#include "zsid/errors.hpp"

namespace zsid {

std::string_view to_string(Route r) {
  switch (r) {
    case Route::direct: return "direct";
    case Route::two_stage_seen: return "two-stage-seen";
    case Route::two_stage_unseen: return "two-stage-unseen";
  }
  return "?";
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw DimensionError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

Prediction predict_from_scores(std::vector<double> scores, std::size_t classes, std::size_t seen) {
  std::size_t offset = 0;
  if (scores.size() == classes - seen && seen != 0) offset = seen;
  else if (scores.size() != classes)
    throw DimensionError("prediction: " + std::to_string(scores.size()) + " scores for " + std::to_string(classes) +
                         " intents (" + std::to_string(seen) + " seen)");
  Prediction p;
  p.label = offset + argmax(scores);
  p.scores = std::move(scores);
  return p;
}

namespace {

void check_similarity(const Tensor& L, std::size_t classes, std::size_t seen) {
  if (L.rank() != 2 || L.rows() != classes || (L.cols() != classes && L.cols() != classes - seen))
    throw DimensionError("similarity matrix " + L.shape_string() + " does not fit K=" + std::to_string(classes) +
                         ", J=" + std::to_string(classes - seen));
}

}  // namespace

Prediction zsid_predict_linear(const Tensor& hidden, const Tensor& weights, const Tensor& L, std::size_t seen) {
  const std::size_t K = weights.cols();
  check_similarity(L, K, seen);
  Graph g(kernels::Exec::serial);
  const Var logits = linear_logits(g.constant(hidden), g.constant(weights));
  const Var probs = softmax(matmul(logits, g.constant(L)));
  return predict_from_scores(probs.value().values(), K, seen);
}

Prediction zsid_predict_capsule(const Tensor& heads, const Tensor& weights, const CapsuleConfig& cfg, const Tensor& L,
                                std::size_t seen) {
  const std::size_t K = weights.cols() / cfg.capsule_dim;
  check_similarity(L, K, seen);
  Graph g(kernels::Exec::serial);
  const Routing r = dynamic_routing(g.constant(heads), g.constant(weights), K, cfg);
  const Var mixed = matmul(transpose(g.constant(L)), r.total);
  const Var norms = reduce(ReduceOp::l2norm, squash(mixed), 1);
  return predict_from_scores(norms.value().values(), K, seen);
}

Prediction compat_predict(std::span<const double> rep, const Tensor& label_reps, std::span<const std::size_t> candidates) {
  if (candidates.empty()) throw ConfigError("compat_predict: empty candidate set");
  Graph g(kernels::Exec::serial);
  const Tensor cos =
      compatibility_scores(g.constant(Tensor({rep.size()}, std::vector<double>(rep.begin(), rep.end()))),
                           g.constant(label_reps))
          .value();
  Prediction p;
  p.scores.assign(cos.size(), -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  p.label = sorted.front();
  for (std::size_t c : sorted) {
    if (c >= cos.size()) throw DimensionError("compat_predict: candidate out of range");
    p.scores[c] = cos[c];
    if (cos[c] > p.scores[p.label]) p.label = c;
  }
  return p;
}

namespace {

struct Neighbours {
  std::vector<std::size_t> index;
  std::vector<double> dist;
};

// Exactly k nearest reference points to q, ordered by (distance, index),
// optionally skipping one reference index.
Neighbours nearest(const Tensor& points, std::span<const double> q, std::size_t k, std::size_t skip,
                   std::vector<std::pair<double, std::size_t>>& scratch) {
  scratch.clear();
  for (std::size_t j = 0; j < points.rows(); ++j)
    if (j != skip) scratch.emplace_back(kernels::euclidean(q, points.row(j)), j);
  std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k), scratch.end());
  Neighbours n;
  for (std::size_t i = 0; i < k; ++i) {
    n.dist.push_back(scratch[i].first);
    n.index.push_back(scratch[i].second);
  }
  return n;
}

double local_density(std::span<const std::size_t> nbrs, std::span<const double> dists,
                     const std::vector<double>& k_distance) {
  double reach = 0.0;
  for (std::size_t i = 0; i < nbrs.size(); ++i) reach += std::max(k_distance[nbrs[i]], dists[i]);
  return 1.0 / (reach / static_cast<double>(nbrs.size()) + 1e-10);
}

template <class F>
void for_each_row(kernels::Exec exec, std::size_t n, F&& f) {
  if (exec == kernels::Exec::parallel) {
#pragma omp parallel
    {
      std::vector<std::pair<double, std::size_t>> scratch;
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) f(static_cast<std::size_t>(i), scratch);
    }
  } else {
    std::vector<std::pair<double, std::size_t>> scratch;
    for (std::size_t i = 0; i < n; ++i) f(i, scratch);
  }
}

}  // namespace

LofModel::LofModel(Tensor points, std::size_t k, kernels::Exec exec) : points_(std::move(points)), k_(k) {
  if (points_.rank() != 2) throw DimensionError("LOF reference points must be a matrix");
  const std::size_t n = points_.rows();
  if (k == 0 || k >= n)
    throw ConfigError("LOF needs 1 <= k < number of reference points (k=" + std::to_string(k) +
                      ", points=" + std::to_string(n) + ")");
  std::vector<Neighbours> nbrs(n);
  k_distance_.resize(n);
  for_each_row(exec, n, [&](std::size_t i, auto& scratch) {
    nbrs[i] = nearest(points_, points_.row(i), k, i, scratch);
    k_distance_[i] = nbrs[i].dist.back();
  });
  lrd_.resize(n);
  for_each_row(exec, n, [&](std::size_t i, auto&) { lrd_[i] = local_density(nbrs[i].index, nbrs[i].dist, k_distance_); });
  training_scores_.resize(n);
  for_each_row(exec, n, [&](std::size_t i, auto&) { training_scores_[i] = score_with(nbrs[i].index, nbrs[i].dist); });
}

double LofModel::score_with(std::span<const std::size_t> nbrs, std::span<const double> dists) const {
  const double own = local_density(nbrs, dists, k_distance_);
  double s = 0.0;
  for (std::size_t j : nbrs) s += lrd_[j];
  return s / static_cast<double>(nbrs.size()) / own;
}

std::vector<double> LofModel::scores(const Tensor& queries, kernels::Exec exec) const {
  if (queries.rank() != 2 || queries.cols() != points_.cols())
    throw DimensionError("LOF queries " + queries.shape_string() + " vs reference " + points_.shape_string());
  std::vector<double> out(queries.rows());
  const std::size_t none = points_.rows();
  for_each_row(exec, queries.rows(), [&](std::size_t i, auto& scratch) {
    const Neighbours n = nearest(points_, queries.row(i), k_, none, scratch);
    out[i] = score_with(n.index, n.dist);
  });
  return out;
}

std::vector<double> lof_scores(const Tensor& points, const Tensor& queries, std::size_t k, kernels::Exec exec) {
  return LofModel(points, k, exec).scores(queries, exec);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of an empty set");
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("quantile must lie in (0, 1]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size()) - 1e-12));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

Prediction two_stage_combine(double lof_score, double threshold, std::span<const double> seen_scores,
                             const Prediction& unseen_prediction) {
  if (lof_score > threshold) {
    Prediction p = unseen_prediction;
    p.route = Route::two_stage_unseen;
    return p;
  }
  Prediction p;
  p.scores.assign(seen_scores.begin(), seen_scores.end());
  p.label = argmax(seen_scores);
  p.route = Route::two_stage_seen;
  return p;
}

}  // namespace zsid
