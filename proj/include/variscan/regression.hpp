#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "variscan/pdp.hpp"
#include "variscan/random.hpp"

namespace variscan {

enum class RepresentativeMode { member, latent };
enum class Family { gaussian, aft, poisson, bernoulli };

// gamma_k: cluster excluded, linear predictor, or spline predictor.
enum Selection : int { kExcluded = 0, kLinear = 1, kNonlinear = 2 };

struct RepresentativeSet {
  RepresentativeMode mode = RepresentativeMode::member;
  std::vector<int> indices;  // s_k, 0-based column of X (member mode only)
  Eigen::MatrixXd vectors;   // n x q, u_k
};

// Member mode draws each s_k uniformly from the cluster; latent mode copies the latent columns.
RepresentativeSet choose_representatives(const Partition& partition, const Eigen::MatrixXd& latent,
                                         const Eigen::MatrixXd& x, RepresentativeMode mode,
                                         RandomSource& rng);

// Truncated power basis: u, u^2, ..., u^r, (u - k_1)_+^r, ..., (u - k_m)_+^r.
Eigen::MatrixXd spline_basis(const Eigen::VectorXd& u, std::span<const double> knots, int order);

// Knots at the (l / (m+1)) sample quantiles of u; m = 1 gives the median.
std::vector<double> quantile_knots(const Eigen::VectorXd& u, int count);

struct SplineSpec {
  int order = 1;  // r
  int knots = 1;  // m per cluster

  int block() const { return order + knots; }
};

std::size_t design_columns(std::span<const int> gamma, const SplineSpec& spline);

// Intercept, then linear columns, then spline blocks, each in ascending cluster order.
// Throws DomainError when the column count reaches n.
Eigen::MatrixXd build_design(std::span<const int> gamma, const Eigen::MatrixXd& reps,
                             const std::vector<std::vector<double>>& knots, const SplineSpec& spline);

// log N(y; 0, g * sigma2 * U (U' D^-1 U)^-1 U' + sigma2 * D), D = diag(scale).
// Throws NumericalError when U is rank deficient.
double log_marginal_gamma(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& scale, double sigma2, double g);

struct WorkingOutcome {
  Eigen::VectorXd y;
  Eigen::VectorXd precision;  // sigma_i^-2
};

// Laplace working response y = eta + (R - mu) d eta/d mu with precision (d mu/d eta)^2 / b''(mu).
// Gaussian returns R and 1 / dispersion.
WorkingOutcome transform_outcome(const Eigen::VectorXd& response, const Eigen::VectorXd& eta,
                                 Family family, double dispersion = 1.0);

// Censored entries (delta = 0) redrawn from N(eta_i, sigma2) truncated to (w_i, inf).
Eigen::VectorXd impute_censored(const Eigen::VectorXd& w, std::span<const int> delta,
                                const Eigen::VectorXd& eta, double sigma2, RandomSource& rng);

// Intercept-only Buckley-James iteration for censored log times.
Eigen::VectorXd buckley_james_intercept(const Eigen::VectorXd& w, std::span<const int> delta,
                                        int iterations = 50);

struct OutcomeData {
  Eigen::VectorXd w;
  std::vector<int> delta;  // empty for the Gaussian family
  Family family = Family::gaussian;

  void validate() const;
};

struct Stage2Config {
  RepresentativeMode mode = RepresentativeMode::member;
  bool resample_representatives = true;
  SplineSpec spline;
  std::optional<double> g;  // sigma_beta^2, defaults to n
  double nu = 3.0;
  std::optional<double> response_variance;  // V; defaults to the initial working outcome
  double r2_low = 0.5;
  double r2_high = 0.95;
  double dispersion = 1.0;
  int burn_in = 1000;
  int thin = 2;
  int samples = 1000;

  void validate() const;
};

struct Stage2State {
  RepresentativeSet reps;
  std::vector<std::vector<double>> knots;  // per cluster
  std::vector<int> gamma;
  std::array<double, 3> omega{1.0 / 3, 1.0 / 3, 1.0 / 3};
  Eigen::VectorXd beta;
  double sigma2 = 1.0;
  Eigen::VectorXd y;      // Gaussian regression outcome
  Eigen::VectorXd scale;  // D diagonal
};

// Fixed quantities of a Stage 2 chain.
struct Stage2Model {
  Partition partition;
  std::vector<std::vector<int>> members;
  Eigen::MatrixXd x;       // training covariates, n x p
  Eigen::MatrixXd latent;  // n x q (latent mode)
  OutcomeData outcome;
  SplineSpec spline;
  RepresentativeMode mode = RepresentativeMode::member;
  bool resample_representatives = true;
  double g = 1.0;
  double nu = 3.0;
  double variance = 1.0;  // V
  double sigma2_low = 0.0;
  double sigma2_high = 0.0;
  double dispersion = 1.0;

  Eigen::Index n() const { return x.rows(); }
  std::size_t q() const { return members.size(); }
};

Stage2Model make_stage2_model(const Eigen::MatrixXd& x, const Partition& partition,
                              const Eigen::MatrixXd& latent, const OutcomeData& outcome,
                              const Stage2Config& config);

Stage2State init_stage2(const Stage2Model& model, RandomSource& rng);

// Representatives (member mode) and gamma_k, cluster by cluster, with beta integrated out.
void update_gamma(Stage2State& state, const Stage2Model& model, RandomSource& rng);
void update_omega(Stage2State& state, RandomSource& rng);
void update_beta_sigma(Stage2State& state, const Stage2Model& model, RandomSource& rng);
// Censored imputation (AFT) or working response refresh (GLM families).
void update_outcome(Stage2State& state, const Stage2Model& model, RandomSource& rng);
void stage2_sweep(Stage2State& state, const Stage2Model& model, RandomSource& rng);

Eigen::VectorXd linear_predictor(const Stage2State& state, const Stage2Model& model);

// The prior draw used by the Gibbs tests: omega, gamma (jointly truncated by
// rejection), representatives, sigma2, beta, then y.
Stage2State sample_stage2_prior(const Stage2Model& model, RandomSource& rng);

struct Stage2Sample {
  std::vector<int> gamma;
  std::vector<int> representatives;
  std::vector<std::vector<double>> knots;
  Eigen::VectorXd beta;
  std::array<double, 3> omega{};
  double sigma2 = 0.0;
};

struct Stage2Result {
  std::vector<Stage2Sample> samples;
  Eigen::MatrixXd inclusion;           // q x 3, posterior P(gamma_k = t)
  std::vector<double> representative_frequency;  // per covariate
  double nonlinearity = 0.0;
  Stage2State final_state;
};

// Starts from `start` when given (a restored checkpoint), otherwise from init_stage2.
Stage2Result run_stage2(const Stage2Model& model, const Stage2Config& config, RandomSource& rng,
                        std::optional<Stage2State> start = std::nullopt);

struct Prediction {
  Eigen::VectorXd y_mean;  // posterior mean of the linear predictor
  Eigen::VectorXd y_sd;
  Eigen::VectorXd w;       // exp(y_mean) for AFT, y_mean otherwise
  std::vector<int> imputed_cells;  // per test subject, covariates filled with the training mean
};

// x_new is standardized with the training statistics; NaN marks missing cells,
// which take the training column mean.
Prediction predict(std::span<const Stage2Sample> samples, const Stage2Model& model,
                   const Eigen::MatrixXd& x_new);

// Monte Carlo mean of omega_2 / (omega_1 + omega_2); samples with a zero denominator are skipped.
double nonlinearity_measure(std::span<const std::array<double, 3>> omega_trace,
                            std::size_t* skipped = nullptr);

}  // namespace variscan
