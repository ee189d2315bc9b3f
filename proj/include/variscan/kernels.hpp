#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

// Data-parallel inner loops of the samplers. Each kernel has a portable scalar
// reference implementation and, where the target supports it, an AVX2 variant
// chosen once at startup. Variants agree to rounding (see test_kernels).

namespace variscan::kernels {

struct KernelTable {
  std::string_view name;

  // sum_i w[i] * (x[i] - v[i])^2
  double (*weighted_sq_distance)(const double* x, const double* v, const double* w,
                                 std::size_t n);

  // out[k] = sum_i W[k*ld + i] * (x[i] - V[k*ld + i])^2 for k < count. V and W
  // are column-major with leading dimension ld.
  void (*weighted_sq_distance_batch)(const double* x, const double* v, const double* w,
                                     std::size_t n, std::size_t ld, std::size_t count,
                                     double* out);

  // counts[k] += (labels[k] == label) for k < p.
  void (*count_label_matches)(const std::int32_t* labels, std::size_t p, std::int32_t label,
                              std::uint32_t* counts);
};

const KernelTable& scalar_kernels();

// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

// The table used by the samplers. Honors VARISCAN_KERNELS=scalar|avx2.
const KernelTable& active();

}  // namespace variscan::kernels
