// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "zsid/autodiff.hpp"
#include "zsid/parameters.hpp"

namespace zsid {

enum class ExtractorKind { mean_pool_tanh, cnn, lstm, birnn_attention };

std::string_view to_string(ExtractorKind kind);
ExtractorKind extractor_kind_from_string(std::string_view s);

struct ExtractorConfig {
  ExtractorKind kind = ExtractorKind::cnn;
  std::size_t embed_dim = 0;
  std::size_t hidden_dim = 128;
  std::size_t heads = 3;  // birnn-attention only
  std::size_t attention_dim = 64;
  std::vector<std::size_t> kernel_widths{2, 3, 4};  // cnn only
  std::size_t channels = 64;
};

/// Throws ConfigError on inconsistent sizes.
void validate(const ExtractorConfig& cfg);

/// Registers "ext.*" parameters, uniform in ±1/sqrt(fan_in).
void init_extractor(const ExtractorConfig& cfg, ParameterSet& params, Rng& rng);

/// Fields not produced by an extractor kind stay invalid.
struct Extracted {
  Var hidden;       // T×D_H; cnn, lstm, birnn-attention
  Var pooled;       // D_H; mean-pool-tanh output, cnn max-over-time projection
  Var heads;        // R×D_H; birnn-attention
  Var attention;    // R×T; birnn-attention
  Var feature_map;  // T×(channels·widths); cnn relu convolution outputs
};

/// embeddings: T×D_E matrix (a constant, or a variable when embeddings train).
Extracted extract(const ExtractorConfig& cfg, const Binding& params, Var embeddings);

}  // namespace zsid
