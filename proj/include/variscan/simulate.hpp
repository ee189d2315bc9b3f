#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "variscan/pdp.hpp"
#include "variscan/random.hpp"

namespace variscan {

struct ClusterSimSpec {
  std::size_t n = 50;
  std::size_t p = 250;
  double alpha1 = 20.0;
  double alpha2 = 10.0;
  double d0 = 0.33;
  double base_lo = 1.4;
  double base_hi = 2.6;
  double tau0 = 0.6;

  void validate() const;
};

struct ClusterDataset {
  Eigen::MatrixXd x;       // n x p
  Partition truth;         // c^0
  Eigen::MatrixXd latent;  // n x Q0, v^0
  std::size_t num_clusters = 0;
};

ClusterDataset gen_cluster_dataset(const ClusterSimSpec& spec, RandomSource& rng);

struct SurvivalSimSpec {
  std::size_t n = 100;
  std::size_t p = 500;
  std::size_t predictor_count = 10;
  double max_pairwise_corr = 0.5;
  double beta_star = 1.0;
  double censor_fraction = 0.2;
  double train_fraction = 0.67;
  // Synthetic source: blocks of equicorrelated Gaussian columns.
  double source_rho = 0.4;
  std::size_t source_block = 10;

  void validate() const;
};

struct SurvivalDataset {
  Eigen::MatrixXd x;            // n x p
  std::vector<int> predictors;  // S, 0-based column indices
  Eigen::VectorXd w;            // log observed time
  std::vector<int> delta;       // 1 = event observed
  std::vector<int> train;       // 0-based subject indices
  std::vector<int> test;
};

// Block-equicorrelated Gaussian covariates.
Eigen::MatrixXd gen_correlated_covariates(std::size_t n, std::size_t p, double rho, std::size_t block,
                                          RandomSource& rng);

// Uses `source` as the covariates when given, otherwise the synthetic generator.
SurvivalDataset gen_survival_dataset(const SurvivalSimSpec& spec, RandomSource& rng,
                                     const std::optional<Eigen::MatrixXd>& source = std::nullopt);

// 1 - C over usable pairs. Throws DomainError when no pair is usable.
double concordance_error(const Eigen::VectorXd& w, const std::vector<int>& delta,
                         const Eigen::VectorXd& predicted);

}  // namespace variscan
