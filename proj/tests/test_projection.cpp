// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "zsid/errors.hpp"
#include "zsid/projection.hpp"

using namespace zsid;

namespace {

// Cyclic Jacobi rotations on a symmetric matrix; returns eigenvalues descending.
std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

std::vector<std::vector<double>> covariance(const Tensor& x) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x.at(i, j) / static_cast<double>(n);
  std::vector<std::vector<double>> c(d, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k)
        c[j][k] += (x.at(i, j) - mean[j]) * (x.at(i, k) - mean[k]) / static_cast<double>(n);
  return c;
}

}  // namespace

TEST_CASE("projection keeps the top two variance directions") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 30 + trial, d = 3 + trial % 5;
    Tensor x({n, d});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) x.at(i, j) = normal(rng) * static_cast<double>(d - j);
    const Projection p = project_2d(x);
    const auto oracle = jacobi_eigenvalues(covariance(x));
    REQUIRE(p.eigenvalues.size() == d);
    for (std::size_t j = 0; j < d; ++j) CHECK(p.eigenvalues[j] == doctest::Approx(oracle[j]).epsilon(1e-9));

    // Mean squared reconstruction error equals the discarded variance.
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double rec =
            p.mean[j] + p.points.at(i, 0) * p.components.at(j, 0) + p.points.at(i, 1) * p.components.at(j, 1);
        err += (x.at(i, j) - rec) * (x.at(i, j) - rec) / static_cast<double>(n);
      }
    double trailing = 0.0;
    for (std::size_t j = 2; j < d; ++j) trailing += oracle[j];
    CHECK(std::abs(err - trailing) < 1e-9);

    for (std::size_t c = 0; c < 2; ++c) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < d; ++j)
        if (std::abs(p.components.at(j, c)) > std::abs(p.components.at(best, c))) best = j;
      CHECK(p.components.at(best, c) > 0.0);
    }
  }
}

TEST_CASE("projection edge cases") {
  const Tensor same = Tensor::matrix({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
  const Projection p = project_2d(same);
  CHECK(p.points.rows() == 3);
  for (std::size_t i = 1; i < 3; ++i) {
    CHECK(p.points.at(i, 0) == p.points.at(0, 0));
    CHECK(p.points.at(i, 1) == p.points.at(0, 1));
  }
  const Projection line = project_2d(Tensor::matrix({{1}, {3}}));
  CHECK(line.points.at(0, 1) == 0.0);
  CHECK(std::abs(line.points.at(0, 0)) == 1.0);
  CHECK_THROWS_AS(project_2d(Tensor({0, 3})), DimensionError);
}
