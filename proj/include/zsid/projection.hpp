// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "zsid/tensor.hpp"

namespace zsid {

struct Projection {
  Tensor points;                     // n×2 coordinates
  Tensor components;                 // D×2, unit columns
  std::vector<double> mean;          // D
  std::vector<double> eigenvalues;   // all D covariance eigenvalues, descending
};

/// Principal-component projection onto the top two directions of the
/// 1/n-scaled covariance. Each component is sign-fixed so its
/// largest-magnitude coordinate is positive (first one on ties). With D = 1
/// the second coordinate is 0.
Projection project_2d(const Tensor& rows);

}  // namespace zsid
