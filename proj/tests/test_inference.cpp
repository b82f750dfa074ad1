// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "zsid/errors.hpp"
#include "support/oracles.hpp"
#include "zsid/inference.hpp"

using namespace zsid;
using zsid::testing::BruteLof;

namespace {

Tensor random_tensor(std::mt19937_64& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = d(rng);
  return t;
}

}  // namespace

TEST_CASE("argmax ties go to the lowest index") {
  CHECK(argmax(std::vector<double>{1, 3, 3, 2}) == 1);
  CHECK(argmax(std::vector<double>{5}) == 0);
}

TEST_CASE("linear transformed prediction") {
  // logits [1, 0] through L = [[1, .5], [.5, 1]] → [1, .5].
  const Prediction p = zsid_predict_linear(Tensor::matrix({{1.0}}), Tensor::matrix({{1.0, 0.0}}),
                                           Tensor::matrix({{1.0, 0.5}, {0.5, 1.0}}), 1);
  const double e = 1.0 / (1.0 + std::exp(-0.5));
  CHECK(std::abs(p.scores[0] - e) < 1e-15);
  CHECK(p.scores[0] == doctest::Approx(0.622).epsilon(1e-3));
  CHECK(p.label == 0);

  std::mt19937_64 rng(1);
  const Tensor h = random_tensor(rng, {4, 3});
  const Tensor w = random_tensor(rng, {3, 5});
  const Prediction z = zsid_predict_linear(h, w, random_tensor(rng, {5, 2}, 0, 1), 3);
  CHECK(z.scores.size() == 2);
  CHECK(std::abs(z.scores[0] + z.scores[1] - 1.0) < 1e-12);
  CHECK(z.label >= 3);
  CHECK_THROWS_AS(zsid_predict_linear(h, w, Tensor({4, 2}), 3), DimensionError);
}

TEST_CASE("identity similarity leaves predictions unchanged") {
  std::mt19937_64 rng(2);
  const CapsuleConfig caps{3, 3};
  for (int i = 0; i < 100; ++i) {
    const Tensor h = random_tensor(rng, {5, 4}, -2, 2);
    const Tensor w = random_tensor(rng, {4, 6}, -2, 2);
    Graph g;
    const Tensor plain = linear_classify(g.constant(h), g.constant(w)).value();
    const Prediction t = zsid_predict_linear(h, w, Tensor::identity(6), 4);
    CHECK(t.label == argmax(plain.data()));
    for (std::size_t k = 0; k < 6; ++k) CHECK(t.scores[k] == plain[k]);

    const Tensor heads = random_tensor(rng, {2, 4});
    const Tensor cw = random_tensor(rng, {8, 6 * 3});
    const Routing r = dynamic_routing(g.constant(heads), g.constant(cw), 6, caps);
    const Prediction c = zsid_predict_capsule(heads, cw, caps, Tensor::identity(6), 4);
    CHECK(c.label == argmax(r.norms.value().data()));
    for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(c.scores[k] - r.norms.value()[k]) < 1e-9);
  }
}

TEST_CASE("capsule transformed prediction") {
  std::mt19937_64 rng(3);
  const CapsuleConfig caps{3, 2};
  const Tensor heads = random_tensor(rng, {2, 4});
  const Prediction z = zsid_predict_capsule(heads, random_tensor(rng, {8, 5 * 3}), caps, random_tensor(rng, {5, 2}, 0, 1), 3);
  CHECK(z.scores.size() == 2);
  CHECK(z.label >= 3);

  // Shared class transforms and uniform L rows: every mixed capsule is the same.
  const Tensor block = random_tensor(rng, {8, 3});
  Tensor w({8, 4 * 3});
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t d = 0; d < 3; ++d) w.at(i, k * 3 + d) = block.at(i, d);
  const Prediction u = zsid_predict_capsule(heads, w, caps, Tensor({4, 4}, 0.25), 2);
  for (std::size_t k = 1; k < 4; ++k) CHECK(std::abs(u.scores[k] - u.scores[0]) < 1e-15);
}

TEST_CASE("compat prediction") {
  const Tensor labels = Tensor::matrix({{1, 0}, {0, 1}, {1, 1}, {1, 1}});
  const std::vector<double> rep{0.0, 2.0};
  const std::vector<std::size_t> all{0, 1, 2, 3}, unseen{2, 3};
  CHECK(compat_predict(rep, labels, all).label == 1);
  CHECK(compat_predict(rep, labels, unseen).label == 2);  // tie between 2 and 3
  CHECK(compat_predict(std::vector<double>{1, 1}, labels, all).label == 2);
  CHECK_THROWS_AS(compat_predict(rep, labels, std::vector<std::size_t>{}), ConfigError);
}

TEST_CASE("LOF matches the brute-force reference exactly") {
  std::mt19937_64 rng(4);
  for (std::size_t n : {12, 60, 200, 500}) {
    for (int variant = 0; variant < 3; ++variant) {
      const std::size_t d = 2 + variant;
      Tensor pts = random_tensor(rng, {n, d}, -5, 5);
      if (variant == 2)  // integer grid coordinates force distance ties
        for (auto& v : pts.data()) v = std::round(v);
      const Tensor queries = random_tensor(rng, {40, d}, -7, 7);
      const std::size_t k = std::min<std::size_t>(n - 1, 3 + 7 * variant);
      const BruteLof ref(pts, k);
      for (auto exec : {kernels::Exec::serial, kernels::Exec::parallel}) {
        const LofModel lof(pts, k, exec);
        const auto got = lof.scores(queries, exec);
        for (std::size_t i = 0; i < queries.rows(); ++i) CHECK(got[i] == ref.score(queries.row(i), n));
        for (std::size_t i = 0; i < n; ++i) CHECK(lof.training_scores()[i] == ref.score(pts.row(i), i));
      }
    }
  }
}

TEST_CASE("LOF examples") {
  Tensor grid({100, 2});
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j) {
      grid.at(i * 10 + j, 0) = static_cast<double>(i);
      grid.at(i * 10 + j, 1) = static_cast<double>(j);
    }
  const auto s = lof_scores(grid, Tensor::matrix({{4.0, 5.0}, {450.0, 450.0}}), 8);
  CHECK(s[0] >= 0.8);
  CHECK(s[0] <= 1.2);
  CHECK(s[1] > 2.0);
  CHECK_THROWS_AS(LofModel(grid, 100), ConfigError);
  CHECK_THROWS_AS(LofModel(grid, 0), ConfigError);
}

TEST_CASE("quantile") {
  CHECK(quantile({5, 1, 3, 2, 4}, 0.95) == 5);
  CHECK(quantile({5, 1, 3, 2, 4}, 0.6) == 3);
  CHECK(quantile({5, 1, 3, 2, 4}, 0.2) == 1);
  std::vector<double> many(100);
  for (std::size_t i = 0; i < 100; ++i) many[i] = static_cast<double>(99 - i);
  CHECK(quantile(many, 0.95) == 94);
}

TEST_CASE("two-stage routing") {
  Prediction unseen;
  unseen.label = 4;
  unseen.scores = {0.3, 0.7};
  const std::vector<double> seen{0.1, 0.8, 0.1};
  const Prediction a = two_stage_combine(0.9, 1.5, seen, unseen);
  CHECK(a.route == Route::two_stage_seen);
  CHECK(a.label == 1);
  const Prediction b = two_stage_combine(3.0, 1.5, seen, unseen);
  CHECK(b.route == Route::two_stage_unseen);
  CHECK(b.label == 4);
}

TEST_CASE("LOF gate separates a far cluster") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor seen({200, 3});
  for (auto& v : seen.data()) v = n(rng);
  Tensor far({100, 3});
  for (auto& v : far.data()) v = n(rng) + 12.0;
  const LofModel lof(seen, 20);
  const double threshold = quantile(lof.training_scores(), 0.95);
  const auto s = lof.scores(far);
  const auto routed = std::count_if(s.begin(), s.end(), [&](double v) { return v > threshold; });
  CHECK(routed >= 90);
}
