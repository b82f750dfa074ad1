// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

#include "zsid/tensor.hpp"

// Data-parallel inner loops. Every kernel exists as a serial reference and an
// OpenMP variant; both write each output element with the same accumulation
// order, so results are bit-identical regardless of thread count.
namespace zsid::kernels {

enum class Exec { serial, parallel };

/// out[m×n] = a[m×k] · b[k×n]
void matmul(Exec exec, std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t m, std::size_t k, std::size_t n);

/// out[m×n] += aᵀ · b, with a stored as [k×m] and b as [k×n].
void matmul_at_b_acc(Exec exec, std::span<const double> a, std::span<const double> b,
                     std::span<double> out, std::size_t m, std::size_t k, std::size_t n);

/// out[m×n] += a · bᵀ, with a stored as [m×k] and b as [n×k].
void matmul_a_bt_acc(Exec exec, std::span<const double> a, std::span<const double> b,
                     std::span<double> out, std::size_t m, std::size_t k, std::size_t n);

/// out[i×j] = squared Euclidean distance between row i of x [nx×d] and row j of y [ny×d].
void pairwise_sq_dist(Exec exec, std::span<const double> x, std::span<const double> y,
                      std::span<double> out, std::size_t nx, std::size_t ny, std::size_t d);

/// Euclidean distance, summed over coordinates in index order.
double euclidean(std::span<const double> a, std::span<const double> b);

Tensor matmul(Exec exec, const Tensor& a, const Tensor& b);
Tensor pairwise_sq_dist(Exec exec, const Tensor& x, const Tensor& y);

/// Worker cap from DIR_NUM_THREADS (unset or invalid → OpenMP default).
int configured_threads();
void apply_thread_cap();

}  // namespace zsid::kernels
