#include "variscan/kernels.hpp"

namespace variscan::kernels {

namespace {

double weighted_sq_distance_scalar(const double* x, const double* v, const double* w,
                                   std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - v[i];
    acc += w[i] * d * d;
  }
  return acc;
}

void weighted_sq_distance_batch_scalar(const double* x, const double* v, const double* w,
                                       std::size_t n, std::size_t ld, std::size_t count,
                                       double* out) {
  for (std::size_t k = 0; k < count; ++k) {
    out[k] = weighted_sq_distance_scalar(x, v + k * ld, w + k * ld, n);
  }
}

void count_label_matches_scalar(const std::int32_t* labels, std::size_t p, std::int32_t label,
                                std::uint32_t* counts) {
  for (std::size_t k = 0; k < p; ++k) counts[k] += labels[k] == label ? 1u : 0u;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", &weighted_sq_distance_scalar,
                                 &weighted_sq_distance_batch_scalar,
                                 &count_label_matches_scalar};
  return table;
}

}  // namespace variscan::kernels
