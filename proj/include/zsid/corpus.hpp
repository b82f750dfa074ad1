// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "zsid/tensor.hpp"

namespace zsid {

enum class Origin { real, label_pseudo };

struct Utterance {
  std::string id;
  std::vector<std::string> tokens;
  std::string label;
  Origin origin = Origin::real;
};

/// Seen labels occupy indices [0, I), unseen labels [I, K).
class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(std::vector<std::string> seen, std::vector<std::string> unseen);

  std::size_t seen_count() const { return seen_.size(); }
  std::size_t unseen_count() const { return unseen_.size(); }
  std::size_t size() const { return seen_.size() + unseen_.size(); }

  std::optional<std::size_t> find(std::string_view label) const;
  std::size_t index(std::string_view label) const;
  const std::string& name(std::size_t k) const;
  bool is_seen(std::size_t k) const { return k < seen_.size(); }

  const std::vector<std::string>& seen() const { return seen_; }
  const std::vector<std::string>& unseen() const { return unseen_; }
  std::vector<std::string> all() const;

  friend bool operator==(const LabelSet&, const LabelSet&) = default;

 private:
  std::vector<std::string> seen_;
  std::vector<std::string> unseen_;
};

/// Label partition plus the optional manual keyword replacements for label names.
struct LabelMetadata {
  LabelSet labels;
  std::map<std::string, std::string> keyword_overrides;

  /// Tokens standing in for label k: its keyword override if present,
  /// otherwise its tokenized name.
  std::vector<std::string> name_tokens(std::size_t k) const;
};

struct Corpus {
  std::vector<Utterance> utterances;
  LabelMetadata meta;
};

/// Lowercase, split on whitespace/punctuation and at camel-case boundaries.
/// Throws DataError when nothing remains.
std::vector<std::string> tokenize(std::string_view text);

LabelMetadata load_label_metadata(const std::filesystem::path& path);
LabelMetadata parse_label_metadata(std::string_view json_text);

/// JSON-lines records {"text", "label"[, "id"]}.
Corpus load_corpus(const std::filesystem::path& dataset, const std::filesystem::path& labels);
std::vector<Utterance> parse_dataset(std::string_view jsonl, const LabelSet& labels);

enum class OovPolicy { zeros, hashed_uniform };

std::string_view to_string(OovPolicy policy);
OovPolicy oov_policy_from_string(std::string_view s);

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim, OovPolicy policy = OovPolicy::zeros, std::uint64_t seed = 0);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  OovPolicy policy() const { return policy_; }
  std::uint64_t seed() const { return seed_; }

  /// Returns false (and keeps the existing vector) for duplicates.
  bool add(std::string token, std::vector<double> vec);
  bool contains(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::span<const double> vector(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::vector<double> lookup(std::string_view token) const;
  /// T×dim matrix of the tokens' vectors.
  Tensor embed(std::span<const std::string> tokens) const;

  void set_oov(OovPolicy policy, std::uint64_t seed) {
    policy_ = policy;
    seed_ = seed;
  }

 private:
  std::size_t dim_ = 0;
  OovPolicy policy_ = OovPolicy::zeros;
  std::uint64_t seed_ = 0;
  std::vector<std::string> tokens_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// word2vec/GloVe text format; an optional "count dim" header line is skipped.
EmbeddingTable load_embeddings(const std::filesystem::path& path, OovPolicy policy = OovPolicy::zeros,
                               std::uint64_t seed = 0);
EmbeddingTable parse_embeddings(std::string_view text, OovPolicy policy = OovPolicy::zeros, std::uint64_t seed = 0);

enum class SplitMode { zsid, gzsid };

struct SplitSpec {
  SplitMode mode = SplitMode::gzsid;
  double train_ratio = 0.7;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<Utterance> train;
  std::vector<Utterance> test;
};

/// zsid: train = all seen, test = all unseen. gzsid: per seen intent
/// floor(ratio·n) to train and the rest to test; per unseen intent the same
/// remainder count (n − floor(ratio·n)) sampled into test.
Split make_split(std::span<const Utterance> corpus, const LabelSet& labels, const SplitSpec& spec);

/// Appends tokenized label names of every unseen intent until each matches
/// round(mean real training count per seen intent).
std::vector<Utterance> augment_label_pseudo_utterances(std::vector<Utterance> train, const LabelMetadata& meta);

std::string_view to_string(SplitMode mode);
SplitMode split_mode_from_string(std::string_view s);

}  // namespace zsid
