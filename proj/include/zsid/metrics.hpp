// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "zsid/corpus.hpp"

namespace zsid {

struct MicroScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

/// Micro-averaged scores over the classes in `subset`. TP and FN come from
/// samples whose gold label is in the subset; FP counts wrong predictions
/// into a subset class from any sample. Accuracy is the fraction of
/// subset-gold samples predicted correctly. Precision is 0 when nothing is
/// predicted into the subset. Throws DataError when no gold label falls in
/// the subset.
MicroScores micro_scores(std::span<const std::size_t> predictions, std::span<const std::size_t> golds,
                         std::span<const std::size_t> subset);

struct MetricsReport {
  std::optional<MicroScores> seen;
  std::optional<MicroScores> unseen;
  std::optional<MicroScores> overall;
};

/// Seen / unseen / overall groups by gold label; an empty group is absent.
MetricsReport grouped_report(std::span<const std::size_t> predictions, std::span<const std::size_t> golds,
                             const LabelSet& labels);

/// Only the unseen group (ZSID evaluation).
MetricsReport unseen_report(std::span<const std::size_t> predictions, std::span<const std::size_t> golds,
                            const LabelSet& labels);

/// group,accuracy,precision,recall,f1,support with percentages to two
/// decimals; absent groups print NA.
std::string report_csv(const MetricsReport& report);

}  // namespace zsid
