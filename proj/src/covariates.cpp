#include "variscan/covariates.hpp"

#include <cmath>
#include <string>

#include "variscan/errors.hpp"

namespace variscan {

void CovariateMatrix::validate() const {
  if (rows() < 2 || cols() < 2) {
    throw DataValidationError("covariate matrix must have at least 2 rows and 2 columns (got " +
                              std::to_string(rows()) + "x" + std::to_string(cols()) + ")");
  }
  if (missing.rows() != rows() || missing.cols() != cols()) {
    throw DataValidationError("missing-value mask does not match the covariate matrix");
  }
  for (Eigen::Index j = 0; j < cols(); ++j) {
    for (Eigen::Index i = 0; i < rows(); ++i) {
      if (!missing(i, j) && !std::isfinite(values(i, j))) {
        throw DataValidationError("non-finite covariate at row " + std::to_string(i + 1) +
                                  ", column " + std::to_string(j + 1));
      }
    }
  }
}

Standardization Standardization::fit(const CovariateMatrix& x) {
  Standardization s;
  const Eigen::Index p = x.cols();
  s.mean = Eigen::VectorXd::Zero(p);
  s.sd = Eigen::VectorXd::Ones(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double sum = 0.0;
    double sum_sq = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (x.missing(i, j)) continue;
      sum += x.values(i, j);
      ++count;
    }
    if (count == 0) throw DataValidationError("column " + std::to_string(j + 1) + " is entirely missing");
    const double mean = sum / count;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (x.missing(i, j)) continue;
      const double d = x.values(i, j) - mean;
      sum_sq += d * d;
    }
    s.mean(j) = mean;
    const double sd = count > 1 ? std::sqrt(sum_sq / (count - 1)) : 0.0;
    // Constant columns are centred but not scaled.
    s.sd(j) = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

Standardization Standardization::identity(Eigen::Index p) {
  return {Eigen::VectorXd::Zero(p), Eigen::VectorXd::Ones(p)};
}

void Standardization::apply(CovariateMatrix& x) const {
  if (x.cols() != mean.size()) {
    throw DataValidationError("standardization expects " + std::to_string(mean.size()) +
                              " columns, got " + std::to_string(x.cols()));
  }
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double sum = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (x.missing(i, j)) continue;
      x.values(i, j) = (x.values(i, j) - mean(j)) / sd(j);
      sum += x.values(i, j);
      ++count;
    }
    const double fill = count > 0 ? sum / count : 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (x.missing(i, j)) x.values(i, j) = fill;
    }
  }
}

}  // namespace variscan
