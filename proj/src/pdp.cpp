#include "variscan/pdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "variscan/errors.hpp"
#include "variscan/sampling.hpp"
#include "variscan/special.hpp"

namespace variscan {

void PdpParams::validate() const {
  if (!(mass > 0.0) || !std::isfinite(mass)) throw DomainError("PdpParams: mass must be positive");
  if (!(discount >= 0.0 && discount < 1.0)) {
    throw DomainError("PdpParams: discount must lie in [0, 1)");
  }
}

Partition Partition::from_labels(std::span<const int> labels) {
  Partition out;
  out.labels_.resize(labels.size());
  std::vector<std::pair<int, int>> seen;  // original label -> canonical
  for (std::size_t j = 0; j < labels.size(); ++j) {
    auto it = std::find_if(seen.begin(), seen.end(),
                           [&](const auto& entry) { return entry.first == labels[j]; });
    int canonical;
    if (it == seen.end()) {
      canonical = static_cast<int>(seen.size());
      seen.emplace_back(labels[j], canonical);
      out.sizes_.push_back(0);
    } else {
      canonical = it->second;
    }
    out.labels_[j] = canonical;
    ++out.sizes_[canonical];
  }
  return out;
}

std::vector<std::vector<int>> Partition::members() const {
  std::vector<std::vector<int>> out(sizes_.size());
  for (std::size_t k = 0; k < sizes_.size(); ++k) out[k].reserve(sizes_[k]);
  for (std::size_t j = 0; j < labels_.size(); ++j) out[labels_[j]].push_back(static_cast<int>(j));
  return out;
}

std::vector<double> predictive_weights(std::span<const int> sizes, const PdpParams& params) {
  params.validate();
  std::vector<double> weights(sizes.size() + 1);
  double total = 0.0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] < 1) throw InvalidStateError("predictive_weights: cluster size below 1");
    weights[k] = sizes[k] - params.discount;
    total += weights[k];
  }
  weights.back() = params.mass + static_cast<double>(sizes.size()) * params.discount;
  total += weights.back();
  for (double& w : weights) w /= total;
  return weights;
}

Partition sample_partition(std::size_t p, const PdpParams& params, RandomSource& rng) {
  params.validate();
  if (p == 0) throw DomainError("sample_partition: p must be at least 1");
  std::vector<int> labels(p);
  std::vector<int> sizes;
  std::vector<double> log_w;
  for (std::size_t j = 0; j < p; ++j) {
    const auto weights = predictive_weights(sizes, params);
    log_w.resize(weights.size());
    std::transform(weights.begin(), weights.end(), log_w.begin(),
                   [](double w) { return std::log(w); });
    const auto k = sample_categorical(log_w, rng);
    if (k == sizes.size()) sizes.push_back(0);
    ++sizes[k];
    labels[j] = static_cast<int>(k);
  }
  return Partition::from_labels(labels);
}

double log_eppf_sizes(std::span<const int> sizes, const PdpParams& params) {
  params.validate();
  const double d = params.discount;
  const double a = params.mass;
  long p = 0;
  for (int s : sizes) {
    if (s < 1) throw InvalidStateError("log_eppf: cluster size below 1");
    p += s;
  }
  const std::size_t q = sizes.size();
  double out = 0.0;
  for (std::size_t k = 1; k < q; ++k) out += std::log(a + static_cast<double>(k) * d);
  // sum_k log (1-d)_{n_k - 1}
  const double base = std::lgamma(1.0 - d);
  for (int s : sizes) {
    if (s > 1) out += std::lgamma(s - d) - base;
  }
  // log (a+1)_{p-1}
  out -= std::lgamma(a + static_cast<double>(p)) - std::lgamma(a + 1.0);
  return out;
}

double log_eppf(const Partition& partition, const PdpParams& params) {
  return log_eppf_sizes(partition.sizes(), params);
}

StickBreakingDraw stick_breaking(const PdpParams& params, std::size_t truncation,
                                 RandomSource& rng) {
  params.validate();
  if (truncation == 0) throw DomainError("stick_breaking: truncation must be at least 1");
  StickBreakingDraw draw;
  draw.sticks.resize(truncation);
  draw.weights.resize(truncation);
  draw.log_weights.resize(truncation);
  double log_remaining = 0.0;
  double remaining = 1.0;
  for (std::size_t h = 0; h < truncation; ++h) {
    const double b = params.mass + static_cast<double>(h + 1) * params.discount;
    const double v = rng.beta(1.0 - params.discount, b);
    draw.sticks[h] = v;
    draw.log_weights[h] = std::log(v) + log_remaining;
    draw.weights[h] = v * remaining;
    log_remaining += std::log1p(-v);
    remaining *= 1.0 - v;
  }
  return draw;
}

LogWeightMoments log_pi_moments(const PdpParams& params, std::size_t h) {
  params.validate();
  if (h == 0) throw DomainError("log_pi_moments: h is 1-based");
  const double a = params.mass;
  const double d = params.discount;
  const double hh = static_cast<double>(h);
  if (d == 0.0) {
    return {digamma(1.0) - digamma(a) - hh / a, trigamma(1.0) - trigamma(a) + hh / (a * a)};
  }
  const double r = a / d;
  return {digamma(1.0 - d) - digamma(a) + (digamma(r) - digamma(r + hh)) / d,
          trigamma(1.0 - d) - trigamma(a) + (trigamma(r) - trigamma(r + hh)) / (d * d)};
}

ClusterCountEstimate expected_cluster_count(const PdpParams& params, std::size_t p) {
  params.validate();
  if (p == 0) throw DomainError("expected_cluster_count: p must be at least 1");
  if (params.discount == 0.0) {
    double sum = 0.0;
    for (std::size_t i = 1; i <= p; ++i) sum += params.mass / (params.mass + static_cast<double>(i) - 1.0);
    return {sum, true};
  }
  return {std::pow(static_cast<double>(p), params.discount), false};
}

double discount_log_odds(const Partition& partition, double mass) {
  const auto& sizes = partition.sizes();
  const double at_zero = log_eppf_sizes(sizes, {mass, 0.0});
  auto log_density = [&](double d) { return log_eppf_sizes(sizes, {mass, d}); };

  // Locate the peak and the region within e^-40 of it on a grid, then
  // integrate the rescaled density on either side of the peak.
  constexpr int kGrid = 400;
  constexpr double kCut = 40.0;
  std::vector<double> values(kGrid);
  double peak = -std::numeric_limits<double>::infinity();
  int peak_at = 0;
  for (int g = 0; g < kGrid; ++g) {
    values[g] = log_density((g + 0.5) / kGrid);
    if (values[g] > peak) {
      peak = values[g];
      peak_at = g;
    }
  }
  int first = peak_at, last = peak_at;
  while (first > 0 && values[first - 1] > peak - kCut) --first;
  while (last < kGrid - 1 && values[last + 1] > peak - kCut) ++last;
  // Composite Gauss-Legendre over the located region.
  constexpr int kPanels = 24;
  const double lo = static_cast<double>(first) / kGrid;
  const double hi = static_cast<double>(last + 1) / kGrid;
  const double width = (hi - lo) / kPanels;
  using Rule = boost::math::quadrature::gauss<double, 20>;
  double total = 0.0;
  for (int k = 0; k < kPanels; ++k) {
    const double a = lo + k * width;
    total += Rule::integrate([&](double d) { return std::exp(log_density(d) - peak); }, a, a + width);
  }
  if (!(total > 0.0)) throw NumericalError("discount_log_odds: integral underflow");
  return peak + std::log(total) - at_zero;
}

}  // namespace variscan
