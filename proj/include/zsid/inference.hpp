// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "zsid/classifiers.hpp"
#include "zsid/kernels.hpp"
#include "zsid/tensor.hpp"

namespace zsid {

enum class Route { direct, two_stage_seen, two_stage_unseen };
std::string_view to_string(Route r);

struct Prediction {
  std::size_t label = 0;       // global intent index
  std::vector<double> scores;  // over the candidate space
  Route route = Route::direct;
};

/// First index of the maximum.
std::size_t argmax(std::span<const double> v);

/// Maps the argmax of scores over a candidate space to a global index. A
/// candidate space of `classes − seen` entries is the unseen block.
Prediction predict_from_scores(std::vector<double> scores, std::size_t classes, std::size_t seen);

/// softmax(mean_t(hidden)·W·L). L is K×J (the result covers the unseen
/// intents) or K×K.
Prediction zsid_predict_linear(const Tensor& hidden, const Tensor& weights, const Tensor& similarity, std::size_t seen);

/// Routing in the K-class space, then s'_j = Σ_k L_kj s_k, squashed; scores
/// are the activation norms.
Prediction zsid_predict_capsule(const Tensor& heads, const Tensor& weights, const CapsuleConfig& cfg,
                                const Tensor& similarity, std::size_t seen);

/// Highest cosine among candidate intents; ties go to the lower index.
/// scores are indexed like label_reps rows (non-candidates are -inf).
Prediction compat_predict(std::span<const double> rep, const Tensor& label_reps, std::span<const std::size_t> candidates);

/// Local outlier factor over a fixed reference set with exactly k
/// neighbours ordered by (distance, index).
class LofModel {
 public:
  LofModel(Tensor points, std::size_t k, kernels::Exec exec = kernels::Exec::parallel);

  std::size_t k() const { return k_; }
  const Tensor& points() const { return points_; }

  std::vector<double> scores(const Tensor& queries, kernels::Exec exec = kernels::Exec::parallel) const;
  /// Scores of the reference points themselves, each excluded from its own
  /// neighbourhood.
  const std::vector<double>& training_scores() const { return training_scores_; }

 private:
  double score_with(std::span<const std::size_t> nbrs, std::span<const double> dists) const;

  Tensor points_;
  std::size_t k_;
  std::vector<double> k_distance_;
  std::vector<double> lrd_;
  std::vector<double> training_scores_;
};

std::vector<double> lof_scores(const Tensor& points, const Tensor& queries, std::size_t k,
                               kernels::Exec exec = kernels::Exec::parallel);

/// Nearest-rank q-quantile: the ceil(q·n)-th smallest value.
double quantile(std::vector<double> values, double q);

/// Above the threshold the stage-2 prediction (an unseen intent) wins;
/// otherwise the stage-1 argmax over the seen intents.
Prediction two_stage_combine(double lof_score, double threshold, std::span<const double> seen_scores,
                             const Prediction& unseen_prediction);

}  // namespace zsid
