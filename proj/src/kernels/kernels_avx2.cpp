// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include "variscan/kernels.hpp"

namespace variscan::kernels::avx2 {

namespace {

inline double horizontal_sum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

}  // namespace

double weighted_sq_distance(const double* x, const double* v, const double* w, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(v + i));
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(v + i + 4));
    acc0 = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_loadu_pd(w + i), d0), d0, acc0);
    acc1 = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_loadu_pd(w + i + 4), d1), d1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(v + i));
    acc0 = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_loadu_pd(w + i), d0), d0, acc0);
  }
  double acc = horizontal_sum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double d = x[i] - v[i];
    acc += w[i] * d * d;
  }
  return acc;
}

void weighted_sq_distance_batch(const double* x, const double* v, const double* w, std::size_t n,
                                std::size_t ld, std::size_t count, double* out) {
  for (std::size_t k = 0; k < count; ++k) {
    out[k] = weighted_sq_distance(x, v + k * ld, w + k * ld, n);
  }
}

void count_label_matches(const std::int32_t* labels, std::size_t p, std::int32_t label,
                         std::uint32_t* counts) {
  const __m256i target = _mm256_set1_epi32(label);
  const __m256i one = _mm256_set1_epi32(1);
  std::size_t k = 0;
  for (; k + 8 <= p; k += 8) {
    const __m256i lab = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(labels + k));
    const __m256i hit = _mm256_and_si256(_mm256_cmpeq_epi32(lab, target), one);
    __m256i* dst = reinterpret_cast<__m256i*>(counts + k);
    _mm256_storeu_si256(dst, _mm256_add_epi32(_mm256_loadu_si256(dst), hit));
  }
  for (; k < p; ++k) counts[k] += labels[k] == label ? 1u : 0u;
}

}  // namespace variscan::kernels::avx2
