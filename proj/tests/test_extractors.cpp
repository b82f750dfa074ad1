// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "support/gradcheck.hpp"
#include "zsid/extractors.hpp"

using namespace zsid;

namespace {

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t({r, c});
  for (auto& v : t.data()) v = d(rng);
  return t;
}

ExtractorConfig small(ExtractorKind kind) {
  ExtractorConfig c;
  c.kind = kind;
  c.embed_dim = 4;
  c.hidden_dim = 6;
  c.heads = 2;
  c.attention_dim = 3;
  c.kernel_widths = {1, 2, 3};
  c.channels = 3;
  return c;
}

// A scalar that touches every output the extractor produces.
Var probe(const Extracted& e, const Tensor& mix) {
  Graph& g = (e.pooled.valid() ? e.pooled : e.hidden).graph();
  std::vector<Var> parts;
  if (e.pooled.valid()) parts.push_back(sum(square(e.pooled)));
  if (e.hidden.valid()) parts.push_back(sum(mul(e.hidden, g.constant(mix))));
  if (e.heads.valid()) parts.push_back(sum(square(e.heads)));
  Var total = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) total = add(total, parts[i]);
  return total;
}

}  // namespace

TEST_CASE("mean-pool-tanh examples") {
  ExtractorConfig cfg = small(ExtractorKind::mean_pool_tanh);
  cfg.hidden_dim = 4;
  ParameterSet ps;
  Rng rng(1);
  init_extractor(cfg, ps, rng);

  Graph g;
  Binding b(g, ps);
  const Tensor e = Tensor::matrix({{0.3, -0.2, 0.9, 1.4}});
  const Tensor ee = Tensor::matrix({{0.3, -0.2, 0.9, 1.4}, {0.3, -0.2, 0.9, 1.4}});
  CHECK(extract(cfg, b, g.constant(e)).pooled.value() == extract(cfg, b, g.constant(ee)).pooled.value());

  ps["ext.proj.b"].fill(0.0);
  CHECK(extract(cfg, b, g.constant(Tensor({3, 4}))).pooled.value() == Tensor({4}));

  ps["ext.proj.w"] = Tensor::identity(4);
  const Tensor out = extract(cfg, b, g.constant(e)).pooled.value();
  for (std::size_t i = 0; i < 4; ++i) CHECK(out[i] == std::tanh(e[i]));
}

TEST_CASE("cnn examples") {
  ExtractorConfig cfg = small(ExtractorKind::cnn);
  ParameterSet ps;
  Rng rng(2);
  init_extractor(cfg, ps, rng);

  Graph g;
  Binding b(g, ps);
  const Extracted shape = extract(cfg, b, g.constant(random_matrix(rng, 5, 4)));
  CHECK(shape.hidden.shape() == Shape{5, 6});
  CHECK(shape.pooled.shape() == Shape{6});
  CHECK(shape.feature_map.shape() == Shape{5, 9});

  // A single token still works with the widest kernel.
  CHECK(extract(cfg, b, g.constant(random_matrix(rng, 1, 4))).hidden.shape() == Shape{1, 6});

  for (auto w : cfg.kernel_widths) ps["ext.conv" + std::to_string(w) + ".b"].fill(0.0);
  ps["ext.proj.b"].fill(0.0);
  const Extracted zero = extract(cfg, b, g.constant(Tensor({3, 4})));
  CHECK(zero.pooled.value() == Tensor({6}));
  CHECK(zero.hidden.value() == Tensor({3, 6}));
}

TEST_CASE("cnn width-1 identity filter is relu of the embeddings") {
  ExtractorConfig cfg = small(ExtractorKind::cnn);
  cfg.kernel_widths = {1};
  cfg.channels = 4;
  ParameterSet ps;
  Rng rng(3);
  init_extractor(cfg, ps, rng);
  ps["ext.conv1.w"] = Tensor::identity(4);
  ps["ext.conv1.b"].fill(0.0);

  const Tensor e = Tensor::matrix({{1.5, -2.0, 0.0, 0.25}, {-0.5, 3.0, -1.0, 2.0}});
  Graph g;
  Binding b(g, ps);
  const Tensor f = extract(cfg, b, g.constant(e)).feature_map.value();
  CHECK(f == Tensor::matrix({{1.5, 0.0, 0.0, 0.25}, {0.0, 3.0, 0.0, 2.0}}));
}

TEST_CASE("birnn-attention examples") {
  ExtractorConfig cfg = small(ExtractorKind::birnn_attention);
  ParameterSet ps;
  Rng rng(4);
  init_extractor(cfg, ps, rng);
  Graph g;
  Binding b(g, ps);

  const Extracted out = extract(cfg, b, g.constant(random_matrix(rng, 5, 4)));
  CHECK(out.hidden.shape() == Shape{5, 6});
  CHECK(out.heads.shape() == Shape{2, 6});
  CHECK(out.attention.shape() == Shape{2, 5});
  for (std::size_t r = 0; r < 2; ++r) {
    double s = 0.0;
    for (double v : out.attention.value().row(r)) s += v;
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("birnn-attention head equals a shared hidden state") {
  // Without recurrence and with the forget gate shut, identical tokens give
  // identical hidden states, so any convex attention returns that state.
  ExtractorConfig cfg = small(ExtractorKind::birnn_attention);
  cfg.heads = 1;
  ParameterSet ps;
  Rng rng(5);
  init_extractor(cfg, ps, rng);
  for (const char* dir : {"ext.fwd", "ext.bwd"}) {
    ps[std::string(dir) + ".w_h"].fill(0.0);
    Tensor& bias = ps[std::string(dir) + ".b"];
    for (std::size_t i = 3; i < 6; ++i) bias[i] = -60.0;
  }
  const Tensor tok = random_matrix(rng, 1, 4);
  Tensor seq({4, 4});
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t c = 0; c < 4; ++c) seq.at(t, c) = tok[c];
  Graph g;
  Binding b(g, ps);
  const Extracted out = extract(cfg, b, g.constant(seq));
  const Tensor& h = out.hidden.value();
  for (std::size_t c = 0; c < 6; ++c) CHECK(std::abs(out.heads.value().at(0, c) - h.at(0, c)) < 1e-12);
}

TEST_CASE("birnn-attention is order sensitive") {
  ExtractorConfig cfg = small(ExtractorKind::birnn_attention);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ParameterSet ps;
    Rng rng(seed);
    init_extractor(cfg, ps, rng);
    const Tensor x = random_matrix(rng, 4, 4);
    Tensor rev({4, 4});
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t c = 0; c < 4; ++c) rev.at(t, c) = x.at(3 - t, c);
    Graph g;
    Binding b(g, ps);
    const Tensor h1 = extract(cfg, b, g.constant(x)).hidden.value();
    const Tensor h2 = extract(cfg, b, g.constant(rev)).hidden.value();
    CHECK(h1 != h2);
  }
}

TEST_CASE("extractor gradients match finite differences") {
  for (auto kind : {ExtractorKind::mean_pool_tanh, ExtractorKind::cnn, ExtractorKind::lstm,
                    ExtractorKind::birnn_attention}) {
    CAPTURE(to_string(kind));
    const ExtractorConfig cfg = small(kind);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      ParameterSet ps;
      Rng rng(100 + seed);
      init_extractor(cfg, ps, rng);
      const Tensor x = random_matrix(rng, 4, 4, -2.0, 2.0);
      const Tensor mix = random_matrix(rng, 4, 6);
      const double err = testing::max_parameter_gradient_error(
          [&](Graph& g, const Binding& b) { return probe(extract(cfg, b, g.constant(x)), mix); }, ps);
      CHECK(err < 1e-4);

      // Trainable embeddings: the input leaf receives gradients too.
      const double err_x = testing::max_gradient_error(
          [&](Graph& g, const std::vector<Var>& in) {
            Binding b(g, ps);
            return probe(extract(cfg, b, in[0]), mix);
          },
          {x});
      CHECK(err_x < 1e-4);
    }
  }
}

TEST_CASE("extractor config validation") {
  ExtractorConfig cfg = small(ExtractorKind::birnn_attention);
  cfg.hidden_dim = 5;
  CHECK_THROWS(validate(cfg));
  cfg = small(ExtractorKind::cnn);
  cfg.kernel_widths.clear();
  CHECK_THROWS(validate(cfg));
  CHECK(extractor_kind_from_string("birnn-attention") == ExtractorKind::birnn_attention);
  CHECK_THROWS(extractor_kind_from_string("bert"));
}
