#pragma once

#include <cstddef>

#include <Eigen/Core>

namespace variscan {

using MissingMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// n x p covariates (rows subjects, columns covariates) with a missing-value mask.
/// Missing entries hold a placeholder value that samplers overwrite by imputation.
struct CovariateMatrix {
  Eigen::MatrixXd values;
  MissingMask missing;

  CovariateMatrix() = default;
  explicit CovariateMatrix(Eigen::MatrixXd v)
      : values(std::move(v)), missing(MissingMask::Constant(values.rows(), values.cols(), false)) {}

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  std::size_t missing_count() const { return static_cast<std::size_t>(missing.count()); }

  // Throws DataValidationError unless n >= 2, p >= 2, and observed entries are finite.
  void validate() const;
};

/// Column location/scale used to standardize covariates; test data reuse the
/// training statistics.
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;

  static Standardization fit(const CovariateMatrix& x);
  static Standardization identity(Eigen::Index p);

  // Observed entries are standardized; missing ones get the column's observed mean.
  void apply(CovariateMatrix& x) const;
};

}  // namespace variscan
