#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "variscan/covariates.hpp"
#include "variscan/pdp.hpp"
#include "variscan/random.hpp"
#include "variscan/summaries.hpp"

namespace variscan {

/// Settings for the covariate clustering sampler. Optional fields default to
/// moment estimates from the data when unset.
struct Stage1Config {
  double alpha1 = 20.0;
  double alpha2 = 10.0;
  bool sample_alpha1 = false;  // Gamma(1,1) hyperprior, random-walk MH on log scale
  bool sample_alpha2 = false;
  double iota1 = 9.0;
  double iota0 = 1.0;
  double tau_floor = 0.01;
  int aux_components = 3;
  double ig_shape = 2.01;
  double ig_scale_factor = 1.01;
  std::optional<double> base_mean;
  std::optional<double> base_variance;
  std::optional<double> tau2_prior_mean;
  std::optional<double> tau1_2_prior_mean;
  double initial_discount = 0.5;
  int discount_moves = 5;
  int burn_in = 2000;
  int thin = 5;
  int samples = 2000;
  int stage1b_burn_in = 500;
  int stage1b_samples = 500;

  void validate() const;
};

/// Hyperparameters fixed for the duration of a chain.
struct Stage1Hyper {
  double base_mean = 0.0;      // mu_2
  double base_variance = 1.0;  // tau_2^2
  double tau2_shape = 2.01;
  double tau2_scale = 1.0;
  double tau1_2_shape = 2.01;
  double tau1_2_scale = 1.0;
  double iota1 = 9.0;
  double iota0 = 1.0;
  double tau_floor = 0.01;
};

/// Nested-DP table of latent elements v_ik: each cell points at a shared atom.
struct LatentTable {
  std::vector<double> atoms;
  std::vector<int> atom_counts;
  Eigen::MatrixXi cell_atom;  // n x q

  double value(Eigen::Index i, Eigen::Index k) const { return atoms[cell_atom(i, k)]; }
  Eigen::MatrixXd values() const;
  std::size_t num_atoms() const { return atoms.size(); }
  // Drops atoms with no cells and reindexes.
  void prune();
  void validate() const;
};

struct IndicatorTable {
  Eigen::MatrixXi z;  // n x q, 1 = follows the latent value with variance tau^2
  std::size_t count_ones() const { return static_cast<std::size_t>(z.sum()); }
};

struct Stage1State {
  Partition partition;
  LatentTable latent;
  IndicatorTable indicators;
  double tau2 = 1.0;    // tau^2
  double tau1_2 = 4.0;  // tau_1^2
  double xi = 0.9;
  PdpParams pdp{20.0, 0.5};
  double alpha2 = 10.0;
  Stage1Hyper hyper;

  std::size_t num_clusters() const { return partition.num_clusters(); }
  void validate(Eigen::Index n, Eigen::Index p) const;
};

Stage1State init_state(const CovariateMatrix& x, const Stage1Config& config, RandomSource& rng);
Stage1State init_state_with_partition(const CovariateMatrix& x, const Partition& partition,
                                      const Stage1Config& config);
// Preliminary clustering used by init_state: a short collapsed Gibbs run under a
// conjugate simplification (latent elements iid normal, no z), followed by the
// least-squares choice among its last sweeps.
Partition seed_partition(const Eigen::MatrixXd& x, const Stage1Config& config, RandomSource& rng,
                         int sweeps = 60);

void update_allocations(Stage1State& state, const Eigen::MatrixXd& x, int aux_components,
                        RandomSource& rng);
void update_latent_elements(Stage1State& state, const Eigen::MatrixXd& x, RandomSource& rng);
// Redraws every z_ik, then xi.
void update_indicators(Stage1State& state, const Eigen::MatrixXd& x, RandomSource& rng);
void update_variances(Stage1State& state, const Eigen::MatrixXd& x, RandomSource& rng);
// Independence MH over the half point-mass / half uniform prior. Returns accepted moves.
int update_discount(Stage1State& state, int moves, RandomSource& rng);
void update_mass_parameters(Stage1State& state, const Stage1Config& config, RandomSource& rng);
// Redraws the masked entries of x from the model; observed entries are untouched.
void impute_missing(const Stage1State& state, CovariateMatrix& x, RandomSource& rng);

// Draws a complete state from the prior (discount from the half/half mixture,
// variances from the jointly truncated inverse-gamma pair), for n subjects and p covariates.
Stage1State sample_prior_state(Eigen::Index n, std::size_t p, const Stage1Hyper& hyper, double mass,
                               double alpha2, RandomSource& rng);
// x_ij ~ N(v_{i c_j}, tau^2 or tau_1^2 by z).
Eigen::MatrixXd sample_covariates(const Stage1State& state, RandomSource& rng);

double log_likelihood(const Stage1State& state, const Eigen::MatrixXd& x);
double log_joint(const Stage1State& state, const Eigen::MatrixXd& x);

// One deterministic-scan sweep: allocations, latent elements, indicators and xi,
// variances, discount, optional masses, then imputation.
void sweep(Stage1State& state, CovariateMatrix& x, const Stage1Config& config, RandomSource& rng);

struct Stage1Trace {
  std::vector<int> clusters;
  std::vector<double> discount;
  std::vector<double> discount_log_odds;
  std::vector<double> tau;
  std::vector<double> tau1;
  std::vector<double> xi;
  std::vector<double> alpha1;
  std::vector<double> log_likelihood;
};

/// Least-squares configuration from the conditional run on a fixed allocation.
struct Stage1bResult {
  Partition allocation;
  Eigen::MatrixXd latent;          // chosen sample, n x q
  Eigen::MatrixXi indicators;      // chosen sample, n x q
  Eigen::MatrixXd latent_mean;     // posterior mean, n x q
  Eigen::MatrixXd indicator_mean;  // posterior mean, n x q
  double tau2 = 0.0;
  double tau1_2 = 0.0;
  std::size_t sample_index = 0;
};

struct Stage1Result {
  std::vector<Partition> partitions;
  Stage1Trace trace;
  Stage1State final_state;
  CoclusterMatrix cocluster;
  LeastSquaresChoice allocation;
  Stage1bResult configuration;
  Eigen::MatrixXd completed;  // covariates with missing entries at their last imputation
};

// Stage 1a chain from an explicit start. Throws if config.samples == 0.
Stage1Result run_stage1a(CovariateMatrix x, Stage1State state, const Stage1Config& config,
                         RandomSource& rng);

Stage1bResult run_stage1b(const CovariateMatrix& x, const Partition& allocation,
                          const Stage1Config& config, RandomSource& rng);

// Full Stage 1: initial state, 1a chain, least-squares allocation, 1b configuration.
Stage1Result run_stage1(const CovariateMatrix& x, const Stage1Config& config, RandomSource& rng);

}  // namespace variscan
