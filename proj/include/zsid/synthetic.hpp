// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace zsid {

/// Gaussian token clusters, one per intent. Intent k is named after the k-th
/// phonetic-alphabet word, whose embedding is the cluster prototype; its
/// utterances draw tokens "c<k>w<i>" scattered around that prototype.
struct SyntheticSpec {
  std::size_t seen = 3;
  std::size_t unseen = 2;
  std::size_t per_intent = 40;
  std::size_t words_per_intent = 8;
  std::size_t dim = 16;
  std::size_t min_length = 3;
  std::size_t max_length = 6;
  double spread = 0.35;     // per-coordinate std-dev of word vectors around the prototype
  double ambiguity = 0.0;   // probability a token comes from the paired intent instead
  std::uint64_t seed = 0;
};

/// The ambiguous variant: seen intent i shares tokens with unseen intent
/// i mod J, and prototypes of paired intents are close.
SyntheticSpec ambiguous_synthetic_spec(std::uint64_t seed = 0);

struct SyntheticFiles {
  std::string dataset;     // JSON lines
  std::string labels;      // label metadata JSON
  std::string embeddings;  // word2vec text format
};

SyntheticFiles make_synthetic(const SyntheticSpec& spec);

/// Writes dataset.jsonl, labels.json and embeddings.txt into dir.
void write_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir);

}  // namespace zsid
