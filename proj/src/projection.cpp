// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#include "zsid/projection.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "zsid/errors.hpp"

namespace zsid {

Projection project_2d(const Tensor& rows) {
  if (rows.rank() != 2 || rows.rows() == 0 || rows.cols() == 0)
    throw DimensionError("projection needs a non-empty matrix, got " + rows.shape_string());
  const auto n = static_cast<Eigen::Index>(rows.rows());
  const auto d = static_cast<Eigen::Index>(rows.cols());
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(rows.data().data(),
                                                                                                    n, d);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");

  Projection p;
  p.mean.assign(mean.data(), mean.data() + d);
  for (Eigen::Index i = d - 1; i >= 0; --i) p.eigenvalues.push_back(eig.eigenvalues()(i));
  const std::size_t kept = std::min<std::size_t>(2, rows.cols());
  p.components = Tensor({rows.cols(), 2});
  for (std::size_t c = 0; c < kept; ++c) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - static_cast<Eigen::Index>(c));
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < d; ++i)
      if (std::abs(v(i)) > std::abs(v(best))) best = i;
    if (v(best) < 0) v = -v;
    for (Eigen::Index i = 0; i < d; ++i) p.components.at(static_cast<std::size_t>(i), c) = v(i);
  }
  p.points = Tensor({rows.rows(), 2});
  for (Eigen::Index r = 0; r < n; ++r)
    for (std::size_t c = 0; c < kept; ++c) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) s += centered(r, i) * p.components.at(static_cast<std::size_t>(i), c);
      p.points.at(static_cast<std::size_t>(r), c) = s;
    }
  return p;
}

}  // namespace zsid
