// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include "zsid/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <string>

#include "zsid/errors.hpp"

namespace zsid::kernels {

namespace {

// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

inline void matmul_row(std::span<const double> a, std::span<const double> b, std::span<double> out,
                       std::size_t i, std::size_t k, std::size_t n) {
  double* o = out.data() + i * n;
  for (std::size_t j = 0; j < n; ++j) o[j] = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double aip = a[i * k + p];
    const double* brow = b.data() + p * n;
    for (std::size_t j = 0; j < n; ++j) o[j] += aip * brow[j];
  }
}

inline void at_b_row(std::span<const double> a, std::span<const double> b, std::span<double> out,
                     std::size_t i, std::size_t m, std::size_t k, std::size_t n) {
  double* o = out.data() + i * n;
  for (std::size_t p = 0; p < k; ++p) {
    const double api = a[p * m + i];
    if (api == 0.0) continue;
    const double* brow = b.data() + p * n;
    for (std::size_t j = 0; j < n; ++j) o[j] += api * brow[j];
  }
}

inline void a_bt_row(std::span<const double> a, std::span<const double> b, std::span<double> out,
                     std::size_t i, std::size_t k, std::size_t n) {
  const double* arow = a.data() + i * k;
  for (std::size_t j = 0; j < n; ++j) {
    const double* brow = b.data() + j * k;
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
    out[i * n + j] += acc;
  }
}

inline void dist_row(std::span<const double> x, std::span<const double> y, std::span<double> out,
                     std::size_t i, std::size_t ny, std::size_t d) {
  const double* xi = x.data() + i * d;
  for (std::size_t j = 0; j < ny; ++j) {
    const double* yj = y.data() + j * d;
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = xi[c] - yj[c];
      acc += diff * diff;
    }
    out[i * ny + j] = acc;
  }
}

void check_span(std::span<const double> s, std::size_t expected, const char* what) {
  if (s.size() != expected) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(expected) +
                         " values, got " + std::to_string(s.size()));
  }
}

}  // namespace

void matmul(Exec exec, std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t m, std::size_t k, std::size_t n) {
  check_span(a, m * k, "matmul lhs");
  check_span(b, k * n, "matmul rhs");
  check_span(out, m * n, "matmul out");
  const long rows = static_cast<long>(m);
  if (exec == Exec::parallel && m * k * n >= kParallelWork) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < rows; ++i) matmul_row(a, b, out, static_cast<std::size_t>(i), k, n);
  } else {
    for (std::size_t i = 0; i < m; ++i) matmul_row(a, b, out, i, k, n);
  }
}

void matmul_at_b_acc(Exec exec, std::span<const double> a, std::span<const double> b,
                     std::span<double> out, std::size_t m, std::size_t k, std::size_t n) {
  check_span(a, k * m, "matmul_at_b lhs");
  check_span(b, k * n, "matmul_at_b rhs");
  check_span(out, m * n, "matmul_at_b out");
  const long rows = static_cast<long>(m);
  if (exec == Exec::parallel && m * k * n >= kParallelWork) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < rows; ++i) at_b_row(a, b, out, static_cast<std::size_t>(i), m, k, n);
  } else {
    for (std::size_t i = 0; i < m; ++i) at_b_row(a, b, out, i, m, k, n);
  }
}

void matmul_a_bt_acc(Exec exec, std::span<const double> a, std::span<const double> b,
                     std::span<double> out, std::size_t m, std::size_t k, std::size_t n) {
  check_span(a, m * k, "matmul_a_bt lhs");
  check_span(b, n * k, "matmul_a_bt rhs");
  check_span(out, m * n, "matmul_a_bt out");
  const long rows = static_cast<long>(m);
  if (exec == Exec::parallel && m * k * n >= kParallelWork) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < rows; ++i) a_bt_row(a, b, out, static_cast<std::size_t>(i), k, n);
  } else {
    for (std::size_t i = 0; i < m; ++i) a_bt_row(a, b, out, i, k, n);
  }
}

void pairwise_sq_dist(Exec exec, std::span<const double> x, std::span<const double> y,
                      std::span<double> out, std::size_t nx, std::size_t ny, std::size_t d) {
  check_span(x, nx * d, "pairwise lhs");
  check_span(y, ny * d, "pairwise rhs");
  check_span(out, nx * ny, "pairwise out");
  const long rows = static_cast<long>(nx);
  if (exec == Exec::parallel && nx * ny * d >= kParallelWork) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < rows; ++i) dist_row(x, y, out, static_cast<std::size_t>(i), ny, d);
  } else {
    for (std::size_t i = 0; i < nx; ++i) dist_row(x, y, out, i, ny, d);
  }
}

double euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("euclidean: length mismatch");
  double acc = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double diff = a[c] - b[c];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

Tensor matmul(Exec exec, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw DimensionError("matmul: cannot multiply " + a.shape_string() + " by " + b.shape_string());
  }
  Tensor out({a.rows(), b.cols()});
  matmul(exec, a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
  return out;
}

Tensor pairwise_sq_dist(Exec exec, const Tensor& x, const Tensor& y) {
  if (x.rank() != 2 || y.rank() != 2 || x.cols() != y.cols()) {
    throw DimensionError("pairwise distance: incompatible " + x.shape_string() + " and " +
                         y.shape_string());
  }
  Tensor out({x.rows(), y.rows()});
  pairwise_sq_dist(exec, x.data(), y.data(), out.data(), x.rows(), y.rows(), x.cols());
  return out;
}

int configured_threads() {
  if (const char* env = std::getenv("DIR_NUM_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<int>(n);
  }
  return omp_get_max_threads();
}

void apply_thread_cap() { omp_set_num_threads(configured_threads()); }

}  // namespace zsid::kernels
