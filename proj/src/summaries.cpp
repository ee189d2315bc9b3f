#include "variscan/summaries.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "variscan/errors.hpp"
#include "variscan/kernels.hpp"

namespace variscan {

CoclusterAccumulator::CoclusterAccumulator(std::size_t p) : p_(p), counts_(p * p, 0u) {}

void CoclusterAccumulator::add(const Partition& partition) {
  if (partition.size() != p_) throw InvalidStateError("CoclusterAccumulator: size mismatch");
  const auto& labels = partition.labels();
  const auto& kern = kernels::active();
  static_assert(sizeof(int) == sizeof(std::int32_t));
  const auto* raw = reinterpret_cast<const std::int32_t*>(labels.data());
  for (std::size_t j = 0; j < p_; ++j) {
    kern.count_label_matches(raw, p_, raw[j], counts_.data() + j * p_);
  }
  ++samples_;
}

void CoclusterAccumulator::merge(const CoclusterAccumulator& other) {
  if (other.p_ != p_) throw InvalidStateError("CoclusterAccumulator: size mismatch in merge");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  samples_ += other.samples_;
}

CoclusterMatrix CoclusterAccumulator::probabilities() const {
  if (samples_ == 0) throw InvalidStateError("CoclusterAccumulator: no samples");
  CoclusterMatrix probs(p_, p_);
  const double scale = 1.0 / static_cast<double>(samples_);
  for (std::size_t j = 0; j < p_; ++j) {
    for (std::size_t k = 0; k < p_; ++k) probs(j, k) = counts_[j * p_ + k] * scale;
  }
  return probs;
}

CoclusterMatrix accumulate_cocluster(std::span<const Partition> samples) {
  if (samples.empty()) throw InvalidStateError("accumulate_cocluster: empty sample set");
  CoclusterAccumulator acc(samples.front().size());
  for (const auto& s : samples) acc.add(s);
  return acc.probabilities();
}

double binder_squared_loss(const Partition& partition, const CoclusterMatrix& probs) {
  const std::size_t p = partition.size();
  if (static_cast<std::size_t>(probs.rows()) != p) {
    throw InvalidStateError("binder_squared_loss: dimension mismatch");
  }
  const auto& labels = partition.labels();
  double loss = 0.0;
  for (std::size_t k = 1; k < p; ++k) {
    const double* col = probs.data() + k * p;
    for (std::size_t j = 0; j < k; ++j) {
      const double diff = (labels[j] == labels[k] ? 1.0 : 0.0) - col[j];
      loss += diff * diff;
    }
  }
  return loss;
}

LeastSquaresChoice least_squares_allocation(std::span<const Partition> samples,
                                            const CoclusterMatrix& probs) {
  if (samples.empty()) throw InvalidStateError("least_squares_allocation: empty sample set");
  LeastSquaresChoice best{samples.front(), 0, binder_squared_loss(samples.front(), probs)};
  for (std::size_t s = 1; s < samples.size(); ++s) {
    if (samples[s] == samples[best.sample_index]) continue;
    const double loss = binder_squared_loss(samples[s], probs);
    if (loss < best.loss) best = {samples[s], s, loss};
  }
  return best;
}

double kappa(const Partition& estimate, const Partition& truth, std::span<const int> subset) {
  if (subset.size() < 2) throw DomainError("kappa: subset needs at least 2 items");
  const auto n = static_cast<int>(std::min(estimate.size(), truth.size()));
  for (int j : subset) {
    if (j < 0 || j >= n) throw DomainError("kappa: index " + std::to_string(j) + " out of range");
  }
  std::size_t agree = 0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < subset.size(); ++a) {
    for (std::size_t b = a + 1; b < subset.size(); ++b) {
      const bool same_est = estimate.label(subset[a]) == estimate.label(subset[b]);
      const bool same_true = truth.label(subset[a]) == truth.label(subset[b]);
      agree += same_est == same_true ? 1 : 0;
      ++pairs;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(pairs);
}

double kappa(const Partition& estimate, const Partition& truth) {
  if (estimate.size() != truth.size()) throw DomainError("kappa: partitions differ in size");
  std::vector<int> all(estimate.size());
  std::iota(all.begin(), all.end(), 0);
  return kappa(estimate, truth, all);
}

double dirichlet_posterior_prob(std::span<const double> discount_trace) {
  if (discount_trace.empty()) throw DomainError("dirichlet_posterior_prob: empty trace");
  const auto zeros = std::count(discount_trace.begin(), discount_trace.end(), 0.0);
  return static_cast<double>(zeros) / static_cast<double>(discount_trace.size());
}

IntervalEstimate logbf_lower_bound(std::span<const double> values) {
  if (values.empty()) throw DomainError("logbf_lower_bound: empty sequence");
  const std::size_t n = values.size();
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double se = 0.0;
  // Batch means when there are enough draws, otherwise the iid standard error.
  const std::size_t batches = n >= 40 ? 20 : 0;
  if (batches > 0) {
    const std::size_t len = n / batches;
    double ss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      double bm = 0.0;
      for (std::size_t i = b * len; i < (b + 1) * len; ++i) bm += values[i];
      bm /= len;
      ss += (bm - mean) * (bm - mean);
    }
    se = std::sqrt(ss / (batches - 1) / batches);
  } else if (n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    se = std::sqrt(ss / (n - 1) / n);
  }
  return {mean, mean - 1.96 * se, mean + 1.96 * se};
}

IntervalEstimate credible_interval(std::span<const double> draws, double level) {
  if (draws.empty()) throw DomainError("credible_interval: no draws");
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double prob) {
    const double pos = prob * (sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
  };
  const double tail = 0.5 * (1.0 - level);
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / sorted.size();
  return {mean, quantile(tail), quantile(1.0 - tail)};
}

}  // namespace variscan
