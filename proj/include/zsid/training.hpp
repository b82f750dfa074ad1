// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "zsid/corpus.hpp"
#include "zsid/inference.hpp"
#include "zsid/metrics.hpp"
#include "zsid/model.hpp"
#include "zsid/similarity.hpp"

namespace zsid {

struct AblationFlags {
  bool no_mt = false;  // drop the SUID term (alpha = lambda' = 0)
  bool no_ss = false;  // identity similarity matrices
  bool es = false;     // similarity from label-name embeddings

  bool any() const { return no_mt || no_ss || es; }
  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

/// Comma-separated subset of {no-mt, no-ss, es}; "" or "none" for none.
AblationFlags parse_ablation(std::string_view text);
std::string to_string(const AblationFlags& flags);

struct TrainConfig {
  std::filesystem::path dataset;
  std::filesystem::path labels;
  std::filesystem::path embeddings;
  SplitSpec split;
  bool augment = true;

  Method method = Method::linear;
  std::optional<ExtractorKind> extractor;  // unset: the method's default
  std::size_t hidden_dim = 128;
  std::size_t heads = 3;
  std::size_t attention_dim = 64;
  std::size_t channels = 64;
  std::vector<std::size_t> kernel_widths{2, 3, 4};
  CapsuleConfig capsule;

  LossConfig loss;
  SimilarityConfig similarity;
  AdamConfig adam;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  bool trainable_embeddings = false;
  OovPolicy oov = OovPolicy::zeros;

  bool two_stage = false;
  ExtractorKind stage_one_extractor = ExtractorKind::cnn;
  std::size_t lof_k = 20;
  double lof_quantile = 0.95;

  AblationFlags ablate;
};

/// Every accepted configuration key, in canonical order.
const std::vector<std::string>& config_keys();

/// Sets one key from its textual value. Unknown keys raise ConfigError
/// listing the valid ones; relative paths resolve against base_dir.
void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value,
                      const std::filesystem::path& base_dir = {});

/// Flat "key = value" lines; '#' starts a comment.
TrainConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
TrainConfig load_config(const std::filesystem::path& path);

/// Canonical key/value pairs; feeding them back through set_config_value
/// reproduces the config exactly.
std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& cfg);
std::string config_text(const TrainConfig& cfg);

void validate(const TrainConfig& cfg);

/// Applies ablation flags: no-mt zeroes alpha and lambda'. Throws ConfigError
/// when no-ss and es are combined.
TrainConfig ablation_variant(TrainConfig cfg, const AblationFlags& flags);

ExtractorConfig extractor_config(const TrainConfig& cfg, ExtractorKind kind, std::size_t embed_dim);
ModelSpec model_spec(const TrainConfig& cfg, const LabelSet& labels, std::size_t embed_dim);

struct EpochStats {
  double loss = 0.0;      // mean total loss per item
  double suid = 0.0;      // mean SUID contribution per item
  double accuracy = 0.0;  // fraction of items whose raw argmax was correct, before each update
};

/// Seen-only first stage of the two-stage pipeline: an LMCL-trained linear
/// model whose training features form the LOF reference set.
struct StageOne {
  ModelSpec spec;
  ParameterSet params;
  Tensor reference;
  double threshold = 0.0;
};

struct TrainedModel {
  TrainConfig config;
  LabelMetadata meta;
  ModelSpec spec;
  EmbeddingTable table;  // the vocabulary the model has seen, with its OOV policy
  ParameterSet params;
  IntentRepresentations representations;
  Tensor similarity_zsl;   // K×J
  Tensor similarity_gzsl;  // K×K
  std::vector<EpochStats> trace;
  std::optional<StageOne> stage_one;
};

/// Utterances and embeddings named by the config, plus its split.
struct PreparedData {
  Corpus corpus;
  EmbeddingTable table;
  Split split;
};

PreparedData prepare_data(const TrainConfig& cfg);
PreparedData prepare_data(const TrainConfig& cfg, SplitMode mode);

using EpochCallback = std::function<void(std::size_t epoch, const EpochStats&)>;

/// Trains on split.train (augmented with pseudo-utterances when cfg.augment),
/// then freezes intent representations and similarity matrices. The model
/// keeps the embeddings of every corpus token and label-name token.
TrainedModel train(const TrainConfig& cfg, const PreparedData& data, const EpochCallback& on_epoch = {});
TrainedModel train(const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Similarity matrices for a mode with the ablation flags applied.
Tensor effective_similarity(const TrainedModel& model, SimilarityMode mode);

/// Inference over a frozen model; safe to call from several threads.
class Predictor {
 public:
  explicit Predictor(const TrainedModel& model);

  /// Representation the similarity scorer averages (see model.hpp).
  std::vector<double> representation(std::span<const std::string> tokens) const;
  /// Argmax of the untransformed scores over all K intents.
  Prediction predict_raw(std::span<const std::string> tokens) const;
  /// zsl: unseen intents only; gzsl: all intents.
  Prediction predict(std::span<const std::string> tokens, SimilarityMode mode) const;
  Prediction predict_two_stage(std::span<const std::string> tokens) const;

 private:
  Tensor embed(std::span<const std::string> tokens) const;

  const TrainedModel* model_;
  Tensor label_reps_;
  std::vector<std::size_t> unseen_, all_;
  std::optional<LofModel> lof_;
};

struct Evaluation {
  std::vector<Utterance> items;
  std::vector<std::size_t> gold;
  std::vector<Prediction> predictions;
  MetricsReport report;
};

/// Throws ConfigError when the request does not fit the model: gzsid on a
/// model trained for zsid, zsid without unseen intents, or two-stage without
/// a first stage or outside gzsid.
void check_evaluation(const TrainedModel& model, SplitMode mode, bool two_stage);
Evaluation evaluate(const TrainedModel& model, std::span<const Utterance> test, SplitMode mode, bool two_stage,
                    kernels::Exec exec = kernels::Exec::parallel);

}  // namespace zsid
