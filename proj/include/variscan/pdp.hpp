#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "variscan/random.hpp"

namespace variscan {

/// Two-parameter Poisson-Dirichlet process: mass alpha1 > 0, discount in [0, 1).
/// discount == 0 is the Dirichlet process.
struct PdpParams {
  double mass = 1.0;
  double discount = 0.0;

  void validate() const;
};

/// Set partition of p items. Labels are 0-based internally and contiguous in
/// order of first appearance; files use 1-based labels.
class Partition {
 public:
  Partition() = default;

  // Canonicalizes arbitrary integer labels.
  static Partition from_labels(std::span<const int> labels);

  std::size_t size() const { return labels_.size(); }
  std::size_t num_clusters() const { return sizes_.size(); }
  int label(std::size_t j) const { return labels_[j]; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<int>& sizes() const { return sizes_; }
  std::vector<std::vector<int>> members() const;

  friend bool operator==(const Partition& a, const Partition& b) { return a.labels_ == b.labels_; }

 private:
  std::vector<int> labels_;
  std::vector<int> sizes_;
};

// Probabilities that the next item joins cluster k (k < q) or opens cluster q.
std::vector<double> predictive_weights(std::span<const int> sizes, const PdpParams& params);

Partition sample_partition(std::size_t p, const PdpParams& params, RandomSource& rng);

// log P(partition) under the process (exchangeable partition probability function).
double log_eppf(const Partition& partition, const PdpParams& params);

// Same, from cluster sizes alone.
double log_eppf_sizes(std::span<const int> sizes, const PdpParams& params);

struct StickBreakingDraw {
  std::vector<double> sticks;   // V_h
  std::vector<double> weights;  // pi_h
  std::vector<double> log_weights;
};

StickBreakingDraw stick_breaking(const PdpParams& params, std::size_t truncation, RandomSource& rng);

struct LogWeightMoments {
  double mean = 0.0;
  double variance = 0.0;
};

// Exact mean and variance of log pi_h (h is 1-based).
LogWeightMoments log_pi_moments(const PdpParams& params, std::size_t h);

struct ClusterCountEstimate {
  // Exact E[q] when exact; otherwise p^discount, the growth order up to a random factor.
  double value = 0.0;
  bool exact = false;
};

ClusterCountEstimate expected_cluster_count(const PdpParams& params, std::size_t p);

// log( int_0^1 EPPF(d) dd / EPPF(0) ): conditional log-odds of a discount > 0
// versus the Dirichlet process under the half/half mixture prior, given the partition.
double discount_log_odds(const Partition& partition, double mass);

}  // namespace variscan
