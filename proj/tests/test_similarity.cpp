// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <regex>

#include "doctest.h"
#include "zsid/errors.hpp"
#include "zsid/similarity.hpp"

using namespace zsid;

namespace {

Tensor random_reps(std::mt19937_64& rng, std::size_t k, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t({k, d});
  for (auto& v : t.data()) v = n(rng);
  return t;
}

}  // namespace

TEST_CASE("intent distance") {
  const std::vector<double> a{3.0, 4.0}, z{0.0, 0.0};
  CHECK(intent_distance(a, a, 1.0) == 0.0);
  CHECK(intent_distance(a, z, 1.0) == 25.0);
  CHECK(intent_distance(a, z, 2.0) == 6.25);

  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Tensor r = random_reps(rng, 2, 7);
    const double d = intent_distance(r.row(0), r.row(1), 1.3);
    CHECK(d == intent_distance(r.row(1), r.row(0), 1.3));
    CHECK(d > 0.0);
  }
}

TEST_CASE("scaling representations scales distances by c squared") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> cdist(0.1, 10.0);
  for (int i = 0; i < 50; ++i) {
    const Tensor r = random_reps(rng, 5, 4);
    const double c = cdist(rng);
    Tensor s = r;
    for (auto& v : s.data()) v *= c;
    const Tensor d1 = distance_matrix(r, 1.0);
    const Tensor d2 = distance_matrix(s, 1.0);
    for (std::size_t k = 0; k < 5; ++k) {
      std::size_t n1 = k == 0 ? 1 : 0, n2 = n1;
      for (std::size_t j = 0; j < 5; ++j) {
        if (j == k) continue;
        CHECK(std::abs(d2.at(k, j) - c * c * d1.at(k, j)) <= 1e-9 * c * c * d1.at(k, j));
        if (d1.at(k, j) < d1.at(k, n1)) n1 = j;
        if (d2.at(k, j) < d2.at(k, n2)) n2 = j;
      }
      CHECK(n1 == n2);
    }
  }
}

TEST_CASE("similarity matrix shapes and structure") {
  std::mt19937_64 rng(3);
  const SimilarityConfig cfg;
  for (int i = 0; i < 30; ++i) {
    const Tensor reps = random_reps(rng, 7, 5);
    const Tensor gz = build_similarity_matrix(reps, 5, SimilarityMode::gzsl, cfg);
    const Tensor z = build_similarity_matrix(reps, 5, SimilarityMode::zsl, cfg);
    CHECK(gz.shape() == Shape{7, 7});
    CHECK(z.shape() == Shape{7, 2});
    for (std::size_t k = 0; k < 7; ++k) {
      double s = 0.0, zs = 0.0;
      for (double v : gz.row(k)) {
        s += v;
        CHECK(v <= gz.at(k, k));
      }
      for (double v : z.row(k)) zs += v;
      CHECK(std::abs(s - 1.0) < 1e-12);
      CHECK(std::abs(zs - 1.0) < 1e-12);
    }
  }

  Tensor same({4, 3}, 0.7);
  const Tensor u = build_similarity_matrix(same, 2, SimilarityMode::gzsl, cfg);
  for (double v : u.data()) CHECK(v == 0.25);

  SimilarityConfig raw;
  raw.row_normalize = false;
  raw.tau = 2.0;
  const Tensor reps = Tensor::matrix({{0.0, 0.0}, {3.0, 4.0}});
  const Tensor e = build_similarity_matrix(reps, 1, SimilarityMode::gzsl, raw);
  CHECK(e.at(0, 0) == 1.0);
  CHECK(std::abs(e.at(0, 1) - std::exp(-12.5)) < 1e-18);

  SimilarityConfig bad;
  bad.kernel = SimilarityKernel::neg_distance;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad.row_normalize = false;
  CHECK(build_similarity_matrix(reps, 1, SimilarityMode::gzsl, bad).at(0, 1) == -25.0);
}

TEST_CASE("automatic temperature") {
  const Tensor reps = Tensor::matrix({{0.0}, {1.0}, {3.0}});
  // Off-diagonal distances 1, 9, 4 (each twice): mean 14/3.
  CHECK(std::abs(resolved_tau(distance_matrix(reps, 1.0), SimilarityConfig{}) - 14.0 / 3.0) < 1e-15);
  CHECK(resolved_tau(distance_matrix(Tensor({3, 2}), 1.0), SimilarityConfig{}) == 1.0);
}

TEST_CASE("intent representation averaging") {
  const LabelSet labels({"a", "b"}, {"c"});
  const Tensor reps = Tensor::matrix({{1, 2}, {3, 6}, {5, 5}, {9, 9}, {9, 9}});
  const std::vector<std::size_t> lab{0, 0, 1, 2, 2};
  const IntentRepresentations r = average_representations(reps, lab, labels);
  CHECK(r.vectors == Tensor::matrix({{2, 4}, {5, 5}, {9, 9}}));
  CHECK(r.counts == std::vector<std::size_t>{2, 1, 2});
  const std::vector<std::size_t> missing{0, 0, 1, 1, 1};
  CHECK_THROWS_AS(average_representations(reps, missing, labels), DataError);
}

TEST_CASE("embedding similarity baseline") {
  // Orthogonal one-hot vectors per distinct token.
  EmbeddingTable table(4);
  table.add("book", {1, 0, 0, 0});
  table.add("restaurant", {0, 1, 0, 0});
  table.add("rate", {0, 0, 1, 0});
  table.add("weather", {0, 0, 0, 1});
  LabelMetadata meta{LabelSet({"BookRestaurant", "GetWeather"}, {"RateBook", "RestaurantBook"}), {}};
  const SimilarityConfig cfg;
  const Tensor L = embedding_similarity_baseline(meta, table, SimilarityMode::gzsl, cfg);
  CHECK(L.shape() == Shape{4, 4});
  CHECK(L.at(0, 3) == L.at(0, 0));  // identical token sets
  CHECK(L.at(0, 2) > L.at(0, 1));   // shares "book" vs shares nothing
  CHECK(embedding_similarity_baseline(meta, table, SimilarityMode::zsl, cfg).shape() == Shape{4, 2});

  meta.keyword_overrides["GetWeather"] = "book restaurant";
  const Tensor L2 = embedding_similarity_baseline(meta, table, SimilarityMode::gzsl, cfg);
  CHECK(L2.at(0, 1) == L2.at(0, 0));
}

TEST_CASE("similarity export") {
  const Tensor m = Tensor::matrix({{0.5, 0.25}, {0.125, 1.0}});
  const std::vector<std::string> rows{"A", "B"}, cols{"A", "Odd,Name"};
  const std::string csv = similarity_csv(m, rows, cols);
  CHECK(csv == "label,A,\"Odd,Name\"\nA,0.5,0.25\nB,0.125,1\n");

  const std::string svg = similarity_svg(m, rows, {"A", "<B&>"});
  const std::regex rect("<rect ");
  CHECK(std::distance(std::sregex_iterator(svg.begin(), svg.end(), rect), std::sregex_iterator()) == 4);
  CHECK(svg.find("&lt;B&amp;&gt;") != std::string::npos);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK_THROWS_AS(similarity_csv(m, rows, {"A"}), DimensionError);
}
