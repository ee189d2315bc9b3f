#include <doctest.h>

#include <cmath>
#include <vector>

#include "variscan/kernels.hpp"
#include "variscan/random.hpp"

using namespace variscan;

namespace {
std::vector<double> draws(RandomSource& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}
}  // namespace

TEST_CASE("active table is one of the known variants") {
  const auto& k = kernels::active();
  CHECK((k.name == "scalar" || k.name == "avx2"));
}

TEST_CASE("scalar weighted distance matches the definition") {
  RandomSource rng(1, 0);
  const auto& s = kernels::scalar_kernels();
  for (std::size_t n : {0u, 1u, 5u, 50u}) {
    auto x = draws(rng, n), v = draws(rng, n), w = draws(rng, n);
    double expect = 0.0;
    for (std::size_t i = 0; i < n; ++i) expect += w[i] * (x[i] - v[i]) * (x[i] - v[i]);
    CHECK(s.weighted_sq_distance(x.data(), v.data(), w.data(), n) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  const kernels::KernelTable* avx = kernels::avx2_kernels();
  if (!avx) {
    MESSAGE("AVX2 variant unavailable on this build or CPU; equivalence not exercised");
    return;
  }
  const auto& s = kernels::scalar_kernels();
  RandomSource rng(2, 0);
  for (std::size_t n = 0; n < 70; ++n) {
    auto x = draws(rng, n), v = draws(rng, n), w = draws(rng, n);
    for (double& e : w) e = std::abs(e);
    const double a = s.weighted_sq_distance(x.data(), v.data(), w.data(), n);
    const double b = avx->weighted_sq_distance(x.data(), v.data(), w.data(), n);
    CHECK(b == doctest::Approx(a).epsilon(1e-12));

    const std::size_t ld = n + 3, count = 1 + n % 6;
    auto vb = draws(rng, ld * count), wb = draws(rng, ld * count);
    for (double& e : wb) e = std::abs(e);
    std::vector<double> out_s(count), out_a(count);
    s.weighted_sq_distance_batch(x.data(), vb.data(), wb.data(), n, ld, count, out_s.data());
    avx->weighted_sq_distance_batch(x.data(), vb.data(), wb.data(), n, ld, count, out_a.data());
    for (std::size_t k = 0; k < count; ++k) CHECK(out_a[k] == doctest::Approx(out_s[k]).epsilon(1e-12));

    std::vector<std::int32_t> labels(n);
    for (auto& l : labels) l = static_cast<std::int32_t>(rng.index(4));
    std::vector<std::uint32_t> cs(n, 1), ca(n, 1);
    s.count_label_matches(labels.data(), n, 2, cs.data());
    avx->count_label_matches(labels.data(), n, 2, ca.data());
    CHECK(cs == ca);
  }
}
