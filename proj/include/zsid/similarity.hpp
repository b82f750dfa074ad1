// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zsid/corpus.hpp"
#include "zsid/kernels.hpp"
#include "zsid/tensor.hpp"

namespace zsid {

/// One row per intent in LabelSet order.
struct IntentRepresentations {
  Tensor vectors;                   // K×D
  std::vector<std::size_t> counts;  // items averaged per intent
};

/// Per-intent mean of item representations (rows of reps). Throws DataError
/// naming the first intent with no items.
IntentRepresentations average_representations(const Tensor& reps, std::span<const std::size_t> labels,
                                              const LabelSet& label_set);

enum class SimilarityKernel { exp_neg, neg_distance };
enum class SimilarityMode { zsl, gzsl };

std::string_view to_string(SimilarityKernel k);
SimilarityKernel similarity_kernel_from_string(std::string_view s);
std::string_view to_string(SimilarityMode m);
SimilarityMode similarity_mode_from_string(std::string_view s);

struct SimilarityConfig {
  double sigma = 1.0;
  SimilarityKernel kernel = SimilarityKernel::exp_neg;
  double tau = 0.0;  // 0 selects the mean off-diagonal distance
  bool row_normalize = true;
};

void validate(const SimilarityConfig& cfg);

/// ‖a − b‖² / σ².
double intent_distance(std::span<const double> a, std::span<const double> b, double sigma);

/// K×K matrix of intent_distance between rows.
Tensor distance_matrix(const Tensor& reps, double sigma, kernels::Exec exec = kernels::Exec::parallel);

/// The temperature actually used for a distance matrix under cfg.
double resolved_tau(const Tensor& distances, const SimilarityConfig& cfg);

/// K×K (gzsl) or K×J (zsl, unseen columns only) similarity matrix.
Tensor build_similarity_matrix(const Tensor& reps, std::size_t seen, SimilarityMode mode, const SimilarityConfig& cfg);

/// Intent vectors as the mean embedding of each label's name tokens.
Tensor label_embedding_vectors(const LabelMetadata& meta, const EmbeddingTable& table);

/// Same kernel pipeline as build_similarity_matrix over label_embedding_vectors.
Tensor embedding_similarity_baseline(const LabelMetadata& meta, const EmbeddingTable& table, SimilarityMode mode,
                                     const SimilarityConfig& cfg);

/// Label names for the columns of a similarity matrix in the given mode.
std::vector<std::string> similarity_columns(const LabelSet& labels, SimilarityMode mode);

/// CSV with a "label" header cell, one column per target intent and one row
/// per source intent.
/// Quotes a CSV field when it holds a comma, quote or newline.
std::string csv_cell(const std::string& s);

std::string similarity_csv(const Tensor& matrix, const std::vector<std::string>& rows,
                           const std::vector<std::string>& cols);

/// Heatmap with one <rect> per entry, a white-to-blue ramp over [min, max] and
/// the value printed in each cell.
std::string similarity_svg(const Tensor& matrix, const std::vector<std::string>& rows,
                           const std::vector<std::string>& cols);

}  // namespace zsid
