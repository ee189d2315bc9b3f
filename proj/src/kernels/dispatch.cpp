#include <cstdlib>
#include <string_view>

#include "variscan/kernels.hpp"

#ifdef VARISCAN_HAVE_AVX2
namespace variscan::kernels::avx2 {
double weighted_sq_distance(const double* x, const double* v, const double* w, std::size_t n);
void weighted_sq_distance_batch(const double* x, const double* v, const double* w, std::size_t n,
                                std::size_t ld, std::size_t count, double* out);
void count_label_matches(const std::int32_t* labels, std::size_t p, std::int32_t label,
                         std::uint32_t* counts);
}  // namespace variscan::kernels::avx2
#endif

namespace variscan::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(VARISCAN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

}  // namespace

const KernelTable* avx2_kernels() {
#ifdef VARISCAN_HAVE_AVX2
  static const KernelTable table{"avx2", &avx2::weighted_sq_distance,
                                 &avx2::weighted_sq_distance_batch, &avx2::count_label_matches};
  static const bool supported = cpu_has_avx2();
  return supported ? &table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  static const KernelTable& chosen = [] () -> const KernelTable& {
    const char* env = std::getenv("VARISCAN_KERNELS");
    if (env != nullptr && std::string_view(env) == "scalar") return scalar_kernels();
    if (const KernelTable* fast = avx2_kernels()) return *fast;
    return scalar_kernels();
  }();
  return chosen;
}

}  // namespace variscan::kernels
