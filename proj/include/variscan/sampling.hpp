#pragma once

#include <array>
#include <span>

#include "variscan/random.hpp"

namespace variscan {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double log_sum_exp(std::span<const double> values);

// Normal draw restricted to (lower, upper); either bound may be infinite.
double sample_truncated_normal(double mean, double sd, double lower, double upper,
                               RandomSource& rng);

// Index k with probability proportional to exp(log_weights[k]).
std::size_t sample_categorical(std::span<const double> log_weights, RandomSource& rng);

// Gamma(shape, rate) restricted to (lower, upper), by inverse CDF.
double sample_truncated_gamma(double shape, double rate, double lower, double upper,
                              RandomSource& rng);

// Inverse-gamma(shape, scale) restricted to (lower, upper).
double sample_truncated_inverse_gamma(double shape, double scale, double lower, double upper,
                                      RandomSource& rng);

std::array<double, 3> sample_dirichlet3(const std::array<double, 3>& alpha, RandomSource& rng);

}  // namespace variscan
