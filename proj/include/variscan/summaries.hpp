#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "variscan/pdp.hpp"

namespace variscan {

/// Posterior pairwise co-clustering probabilities: symmetric, unit diagonal.
using CoclusterMatrix = Eigen::MatrixXd;

/// Streaming pair-count accumulator over sampled partitions. Mergeable, so
/// independent chains can accumulate separately.
class CoclusterAccumulator {
 public:
  explicit CoclusterAccumulator(std::size_t p);

  void add(const Partition& partition);
  void merge(const CoclusterAccumulator& other);

  std::size_t num_items() const { return p_; }
  std::size_t num_samples() const { return samples_; }
  CoclusterMatrix probabilities() const;

 private:
  std::size_t p_;
  std::size_t samples_ = 0;
  std::vector<std::uint32_t> counts_;  // row-major p x p
};

CoclusterMatrix accumulate_cocluster(std::span<const Partition> samples);

// sum_{j<k} (I[c_j = c_k] - probs(j,k))^2
double binder_squared_loss(const Partition& partition, const CoclusterMatrix& probs);

struct LeastSquaresChoice {
  Partition partition;
  std::size_t sample_index = 0;
  double loss = 0.0;
};

// Sampled partition closest to the co-clustering matrix; ties go to the earliest sample.
LeastSquaresChoice least_squares_allocation(std::span<const Partition> samples,
                                            const CoclusterMatrix& probs);

// Proportion of pairs in `subset` (0-based indices) whose co-clustering agrees.
double kappa(const Partition& estimate, const Partition& truth, std::span<const int> subset);
double kappa(const Partition& estimate, const Partition& truth);

double dirichlet_posterior_prob(std::span<const double> discount_trace);

struct IntervalEstimate {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// Monte Carlo mean of the per-sample conditional log-odds with a batch-means
// 95% interval. The mean is a Jensen lower bound on the log Bayes factor of
// discount > 0 against the Dirichlet process.
IntervalEstimate logbf_lower_bound(std::span<const double> per_sample_log_odds);

// Equal-tailed credible interval from posterior draws.
IntervalEstimate credible_interval(std::span<const double> draws, double level = 0.95);

}  // namespace variscan
