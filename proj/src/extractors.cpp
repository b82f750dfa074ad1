// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include "zsid/extractors.hpp"

#include <algorithm>
#include <string>

#include "zsid/errors.hpp"

namespace zsid {

std::string_view to_string(ExtractorKind kind) {
  switch (kind) {
    case ExtractorKind::mean_pool_tanh: return "mean-pool-tanh";
    case ExtractorKind::cnn: return "cnn";
    case ExtractorKind::lstm: return "lstm";
    case ExtractorKind::birnn_attention: return "birnn-attention";
  }
  return "?";
}

ExtractorKind extractor_kind_from_string(std::string_view s) {
  for (auto k : {ExtractorKind::mean_pool_tanh, ExtractorKind::cnn, ExtractorKind::lstm,
                 ExtractorKind::birnn_attention}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown extractor '" + std::string(s) +
                    "' (expected mean-pool-tanh, cnn, lstm or birnn-attention)");
}

void validate(const ExtractorConfig& cfg) {
  if (cfg.embed_dim == 0) throw ConfigError("extractor: embedding dimension is 0");
  if (cfg.hidden_dim == 0) throw ConfigError("extractor: hidden_dim must be > 0");
  switch (cfg.kind) {
    case ExtractorKind::cnn:
      if (cfg.kernel_widths.empty() || cfg.channels == 0)
        throw ConfigError("extractor: cnn needs kernel widths and channels > 0");
      for (auto w : cfg.kernel_widths)
        if (w == 0) throw ConfigError("extractor: kernel width 0");
      break;
    case ExtractorKind::birnn_attention:
      if (cfg.heads == 0) throw ConfigError("extractor: heads must be >= 1");
      if (cfg.hidden_dim % 2 != 0) throw ConfigError("extractor: birnn-attention needs an even hidden_dim");
      if (cfg.attention_dim == 0) throw ConfigError("extractor: attention_dim must be > 0");
      break;
    default:
      break;
  }
}

namespace {

void add_uniform(ParameterSet& params, Rng& rng, std::string name, Shape shape, std::size_t fan_in) {
  params.add(std::move(name), uniform_init(rng, std::move(shape), fan_in));
}

void init_lstm(ParameterSet& params, Rng& rng, const std::string& prefix, std::size_t in, std::size_t h) {
  add_uniform(params, rng, prefix + ".w_x", {in, 4 * h}, in);
  add_uniform(params, rng, prefix + ".w_h", {h, 4 * h}, h);
  add_uniform(params, rng, prefix + ".b", {4 * h}, h);
}

// Gated recurrence over the rows of xs; returns one hidden vector per step in
// input order. Gate layout in the 4h block: input, forget, candidate, output.
std::vector<Var> run_lstm(const Binding& p, const std::string& prefix, Var xs, bool reverse) {
  Graph& g = xs.graph();
  const Var wh = p[prefix + ".w_h"];
  const std::size_t h = wh.value().rows();
  const std::size_t T = xs.value().rows();
  const Var gates_x = add_bias(matmul(xs, p[prefix + ".w_x"]), p[prefix + ".b"]);

  Var hidden = g.constant(Tensor({h}));
  Var cell = g.constant(Tensor({h}));
  std::vector<Var> out(T);
  for (std::size_t step = 0; step < T; ++step) {
    const std::size_t t = reverse ? T - 1 - step : step;
    const Var z = add(row(gates_x, t), matmul(hidden, wh));
    const Var in = sigmoid(slice(z, 0, h));
    const Var forget = sigmoid(slice(z, h, 2 * h));
    const Var cand = tanh(slice(z, 2 * h, 3 * h));
    const Var o = sigmoid(slice(z, 3 * h, 4 * h));
    cell = add(mul(forget, cell), mul(in, cand));
    hidden = mul(o, tanh(cell));
    out[t] = hidden;
  }
  return out;
}

Var zero_rows(Graph& g, std::size_t n, std::size_t d) { return g.constant(Tensor({n, d})); }

}  // namespace

void init_extractor(const ExtractorConfig& cfg, ParameterSet& params, Rng& rng) {
  validate(cfg);
  const std::size_t de = cfg.embed_dim;
  const std::size_t dh = cfg.hidden_dim;
  switch (cfg.kind) {
    case ExtractorKind::mean_pool_tanh:
      add_uniform(params, rng, "ext.proj.w", {de, dh}, de);
      add_uniform(params, rng, "ext.proj.b", {dh}, de);
      break;
    case ExtractorKind::cnn: {
      for (auto w : cfg.kernel_widths) {
        const std::string p = "ext.conv" + std::to_string(w);
        add_uniform(params, rng, p + ".w", {w * de, cfg.channels}, w * de);
        add_uniform(params, rng, p + ".b", {cfg.channels}, w * de);
      }
      const std::size_t f = cfg.channels * cfg.kernel_widths.size();
      add_uniform(params, rng, "ext.proj.w", {f, dh}, f);
      add_uniform(params, rng, "ext.proj.b", {dh}, f);
      break;
    }
    case ExtractorKind::lstm:
      init_lstm(params, rng, "ext.fwd", de, dh);
      break;
    case ExtractorKind::birnn_attention:
      init_lstm(params, rng, "ext.fwd", de, dh / 2);
      init_lstm(params, rng, "ext.bwd", de, dh / 2);
      add_uniform(params, rng, "ext.attn.w1", {dh, cfg.attention_dim}, dh);
      add_uniform(params, rng, "ext.attn.w2", {cfg.attention_dim, cfg.heads}, cfg.attention_dim);
      break;
  }
}

Extracted extract(const ExtractorConfig& cfg, const Binding& p, Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.cols() != cfg.embed_dim)
    throw DimensionError("extract: embeddings " + xv.shape_string() + " do not match D_E=" +
                         std::to_string(cfg.embed_dim));
  if (xv.rows() == 0) throw DataError("extract: empty token sequence");
  Graph& g = x.graph();
  Extracted out;

  switch (cfg.kind) {
    case ExtractorKind::mean_pool_tanh:
      out.pooled = tanh(add_bias(matmul(reduce(ReduceOp::mean, x, 0), p["ext.proj.w"]), p["ext.proj.b"]));
      break;

    case ExtractorKind::cnn: {
      std::vector<Var> maps;
      for (auto w : cfg.kernel_widths) {
        const std::size_t left = (w - 1) / 2;
        const std::size_t right = w - 1 - left;
        std::vector<Var> parts;
        if (left) parts.push_back(zero_rows(g, left, cfg.embed_dim));
        parts.push_back(x);
        if (right) parts.push_back(zero_rows(g, right, cfg.embed_dim));
        const Var padded = parts.size() == 1 ? x : concat(parts, 0);
        const std::string name = "ext.conv" + std::to_string(w);
        maps.push_back(relu(add_bias(matmul(unfold(padded, w), p[name + ".w"]), p[name + ".b"])));
      }
      out.feature_map = maps.size() == 1 ? maps.front() : concat(maps, 1);
      const Var proj = p["ext.proj.w"];
      const Var bias = p["ext.proj.b"];
      out.hidden = tanh(add_bias(matmul(out.feature_map, proj), bias));
      out.pooled = tanh(add_bias(matmul(reduce(ReduceOp::max, out.feature_map, 0), proj), bias));
      break;
    }

    case ExtractorKind::lstm:
      out.hidden = stack(run_lstm(p, "ext.fwd", x, false));
      break;

    case ExtractorKind::birnn_attention: {
      const Var fwd = stack(run_lstm(p, "ext.fwd", x, false));
      const Var bwd = stack(run_lstm(p, "ext.bwd", x, true));
      out.hidden = concat({fwd, bwd}, 1);
      // R×T: one softmax over time per head.
      out.attention = softmax(transpose(matmul(tanh(matmul(out.hidden, p["ext.attn.w1"])), p["ext.attn.w2"])));
      out.heads = matmul(out.attention, out.hidden);
      break;
    }
  }
  return out;
}

}  // namespace zsid
