#include "variscan/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "variscan/errors.hpp"

namespace variscan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTailThreshold = 4.0;

double std_normal_cdf(double z) { return 0.5 * boost::math::erfc(-z / std::sqrt(2.0)); }

double std_normal_quantile(double p) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p); }

// Standard normal restricted to (a, b) with a > kTailThreshold: exponential
// rejection with the optimal rate, or uniform rejection for narrow intervals.
double upper_tail_normal(double a, double b, RandomSource& rng) {
  const double width = b - a;
  if (width < 1.0 / a) {
    for (;;) {
      const double z = a + width * rng.uniform();
      if (std::log(rng.uniform()) < -0.5 * (z * z - a * a)) return z;
    }
  }
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a + rng.exponential(rate);
    if (z >= b) continue;
    const double diff = z - rate;
    if (std::log(rng.uniform()) < -0.5 * diff * diff) return z;
  }
}

double truncated_standard_normal(double a, double b, RandomSource& rng) {
  if (a > kTailThreshold) return upper_tail_normal(a, b, rng);
  if (b < -kTailThreshold) return -upper_tail_normal(-b, -a, rng);
  if (a == -kInf && b == kInf) return rng.normal();
  // Inverse CDF, on whichever side of zero keeps the probabilities away from 1.
  if (a >= 0.0) {
    const double qa = std_normal_cdf(-a);
    const double qb = std_normal_cdf(-b);
    const double q = qb + (qa - qb) * rng.uniform();
    return std::clamp(-std_normal_quantile(q), a, b);
  }
  const double pa = std_normal_cdf(a);
  const double pb = std_normal_cdf(b);
  const double u = pa + (pb - pa) * rng.uniform();
  return std::clamp(std_normal_quantile(u), a, b);
}

}  // namespace

double log_sum_exp(std::span<const double> values) {
  double top = -kInf;
  for (double v : values) top = std::max(top, v);
  if (top == -kInf) return -kInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

double sample_truncated_normal(double mean, double sd, double lower, double upper,
                               RandomSource& rng) {
  if (!(lower < upper)) throw DomainError("sample_truncated_normal: empty interval");
  if (!(sd > 0.0)) throw DomainError("sample_truncated_normal: sd must be positive");
  const double a = (lower - mean) / sd;
  const double b = (upper - mean) / sd;
  for (;;) {
    const double x = mean + sd * truncated_standard_normal(a, b, rng);
    // Clamping at a bound can land exactly on it after rescaling.
    if (x > lower && x < upper) return x;
  }
}

std::size_t sample_categorical(std::span<const double> log_weights, RandomSource& rng) {
  if (log_weights.empty()) throw DomainError("sample_categorical: no categories");
  double top = -kInf;
  for (double w : log_weights) {
    if (std::isnan(w)) throw DomainError("sample_categorical: NaN log-weight");
    top = std::max(top, w);
  }
  if (top == -kInf) throw DomainError("sample_categorical: degenerate distribution");
  double total = 0.0;
  for (double w : log_weights) total += std::exp(w - top);
  double u = rng.uniform() * total;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    const double mass = std::exp(log_weights[k] - top);
    if (mass > 0.0) last_positive = k;
    if (u < mass) return k;
    u -= mass;
  }
  return last_positive;
}

double sample_truncated_gamma(double shape, double rate, double lower, double upper,
                              RandomSource& rng) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw DomainError("sample_truncated_gamma: bad parameters");
  lower = std::max(lower, 0.0);
  if (!(lower < upper)) throw DomainError("sample_truncated_gamma: empty interval");
  if (lower == 0.0 && upper == kInf) return rng.gamma(shape, rate);

  const double xl = lower * rate;
  const double xu = upper * rate;
  const double mode = std::max(shape - 1.0, 0.0);
  // Work with lower-tail probabilities left of the mode, upper-tail ones right of it.
  if (xl >= mode) {
    const double ql = boost::math::gamma_q(shape, xl);
    const double qu = xu == kInf ? 0.0 : boost::math::gamma_q(shape, xu);
    if (!(ql > qu)) return lower;
    const double q = qu + (ql - qu) * rng.uniform();
    return std::clamp(boost::math::gamma_q_inv(shape, q) / rate, lower, upper);
  }
  const double pl = xl == 0.0 ? 0.0 : boost::math::gamma_p(shape, xl);
  const double pu = xu == kInf ? 1.0 : boost::math::gamma_p(shape, xu);
  if (!(pu > pl)) return xu <= mode ? upper : lower;
  const double prob = pl + (pu - pl) * rng.uniform();
  return std::clamp(boost::math::gamma_p_inv(shape, prob) / rate, lower, upper);
}

double sample_truncated_inverse_gamma(double shape, double scale, double lower, double upper,
                                      RandomSource& rng) {
  // X ~ IG(shape, scale)  <=>  1/X ~ Gamma(shape, rate = scale)
  const double inv_lo = upper == kInf ? 0.0 : 1.0 / upper;
  const double inv_hi = lower <= 0.0 ? kInf : 1.0 / lower;
  return 1.0 / sample_truncated_gamma(shape, scale, inv_lo, inv_hi, rng);
}

std::array<double, 3> sample_dirichlet3(const std::array<double, 3>& alpha, RandomSource& rng) {
  std::array<double, 3> draw{};
  double total = 0.0;
  for (int t = 0; t < 3; ++t) {
    draw[t] = rng.gamma(alpha[t]);
    total += draw[t];
  }
  for (double& v : draw) v /= total;
  return draw;
}

}  // namespace variscan
