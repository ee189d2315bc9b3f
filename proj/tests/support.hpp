#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace variscan::testing {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  std::size_t count = 0;

  double se() const { return std::sqrt(variance / static_cast<double>(count)); }
};

inline Moments moments(const std::vector<double>& v) {
  Moments m;
  m.count = v.size();
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  for (double x : v) m.variance += (x - m.mean) * (x - m.mean);
  m.variance /= static_cast<double>(v.size() - 1);
  return m;
}

// Standard error of the sample variance, from the fourth central moment.
inline double variance_se(const std::vector<double>& v, const Moments& m) {
  double m4 = 0.0;
  for (double x : v) m4 += std::pow(x - m.mean, 4);
  m4 /= static_cast<double>(v.size());
  return std::sqrt((m4 - m.variance * m.variance) / static_cast<double>(v.size()));
}

// Geweke z-score: iid forward draws against a batch-means estimate for the
// successive-conditional chain.
inline double geweke_z(const std::vector<double>& forward, const std::vector<double>& chain,
                       std::size_t batches = 50) {
  const Moments f = moments(forward);
  const std::size_t len = chain.size() / batches;
  std::vector<double> means(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t t = 0; t < len; ++t) means[b] += chain[b * len + t];
    means[b] /= static_cast<double>(len);
  }
  const Moments g = moments(means);
  const double denom = std::sqrt(f.variance / static_cast<double>(f.count) + g.variance / static_cast<double>(batches));
  if (denom == 0.0) return f.mean == g.mean ? 0.0 : INFINITY;
  return (f.mean - g.mean) / denom;
}

}  // namespace variscan::testing
