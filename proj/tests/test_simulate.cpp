#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "support.hpp"
#include "variscan/errors.hpp"
#include "variscan/simulate.hpp"

using namespace variscan;

namespace {
Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}
}  // namespace

TEST_CASE("concordance examples") {
  const Eigen::VectorXd w = vec({1, 2, 3});
  const std::vector<int> events{1, 1, 1};
  CHECK(concordance_error(w, events, vec({1, 2, 3})) == 0.0);
  CHECK(concordance_error(w, events, vec({3, 2, 1})) == 1.0);
  CHECK(concordance_error(w, events, vec({5, 5, 5})) == 0.5);

  // Censored earliest subject: no usable pair starts from it.
  const std::vector<int> first_censored{0, 1, 1};
  CHECK(concordance_error(w, first_censored, vec({3, 1, 2})) == 0.0);
  const std::vector<int> none{0, 0, 0};
  CHECK_THROWS_AS(concordance_error(w, none, vec({1, 2, 3})), DomainError);
  CHECK_THROWS_AS(concordance_error(w, events, vec({1, 2})), DomainError);
}

TEST_CASE("concordance complement under negation") {
  RandomSource rng(1, 0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd w(30), pred(30);
    std::vector<int> delta(30);
    for (Eigen::Index i = 0; i < 30; ++i) {
      w(i) = std::round(rng.normal() * 4) / 4;
      pred(i) = rng.normal();
      delta[static_cast<std::size_t>(i)] = rng.uniform() < 0.7;
    }
    CHECK(concordance_error(w, delta, pred) + concordance_error(w, delta, -pred) == doctest::Approx(1.0));
  }
}

TEST_CASE("cluster generator") {
  RandomSource rng(2, 0);
  const ClusterSimSpec spec;
  const ClusterDataset d = gen_cluster_dataset(spec, rng);
  CHECK(d.x.rows() == 50);
  CHECK(d.x.cols() == 250);
  CHECK(d.num_clusters >= 2);
  CHECK(d.num_clusters == d.truth.num_clusters());
  CHECK(d.latent.cols() == static_cast<Eigen::Index>(d.num_clusters));
  CHECK(d.latent.minCoeff() >= 1.4);
  CHECK(d.latent.maxCoeff() <= 2.6);

  double sq = 0.0;
  for (Eigen::Index j = 0; j < d.x.cols(); ++j) sq += (d.x.col(j) - d.latent.col(d.truth.label(j))).squaredNorm();
  const double var = sq / static_cast<double>(d.x.size());
  CHECK(std::abs(var / (spec.tau0 * spec.tau0) - 1.0) < 0.05);

  ClusterSimSpec exact = spec;
  exact.tau0 = 0.0;
  const ClusterDataset e = gen_cluster_dataset(exact, rng);
  for (Eigen::Index j = 0; j < e.x.cols(); ++j) CHECK(e.x.col(j) == e.latent.col(e.truth.label(j)));

  ClusterSimSpec bad = spec;
  bad.base_lo = 3.0;
  CHECK_THROWS_AS(gen_cluster_dataset(bad, rng), DomainError);
}

TEST_CASE("cluster count grows with p") {
  RandomSource rng(3, 0);
  double small = 0.0, large = 0.0;
  for (int t = 0; t < 40; ++t) {
    small += static_cast<double>(gen_cluster_dataset(ClusterSimSpec{10, 50}, rng).num_clusters);
    large += static_cast<double>(gen_cluster_dataset(ClusterSimSpec{10, 500}, rng).num_clusters);
  }
  CHECK(large > small);
}

TEST_CASE("survival generator") {
  RandomSource rng(4, 0);
  SurvivalSimSpec spec;
  std::size_t censored = 0, total = 0;
  for (int t = 0; t < 10; ++t) {
    const SurvivalDataset d = gen_survival_dataset(spec, rng);
    CHECK(d.predictors.size() == 10);
    CHECK(std::is_sorted(d.predictors.begin(), d.predictors.end()));
    for (std::size_t a = 0; a < d.predictors.size(); ++a) {
      for (std::size_t b = a + 1; b < d.predictors.size(); ++b) {
        const Eigen::VectorXd u = d.x.col(d.predictors[a]).array() - d.x.col(d.predictors[a]).mean();
        const Eigen::VectorXd v = d.x.col(d.predictors[b]).array() - d.x.col(d.predictors[b]).mean();
        CHECK(std::abs(u.dot(v) / (u.norm() * v.norm())) < 0.5);
      }
    }
    CHECK(d.train.size() == 67);
    CHECK(d.test.size() == 33);
    std::set<int> all(d.train.begin(), d.train.end());
    all.insert(d.test.begin(), d.test.end());
    CHECK(all.size() == 100);
    for (int flag : d.delta) censored += flag == 0;
    total += d.delta.size();
  }
  // Binomial(1000, 0.2) up to the rare rejection cap
  const double fraction = static_cast<double>(censored) / static_cast<double>(total);
  CHECK(std::abs(fraction - 0.2) < 3 * std::sqrt(0.2 * 0.8 / static_cast<double>(total)));

  spec.censor_fraction = 0.0;
  const SurvivalDataset none = gen_survival_dataset(spec, rng);
  CHECK(std::all_of(none.delta.begin(), none.delta.end(), [](int f) { return f == 1; }));

  spec.censor_fraction = 1.0;
  CHECK_THROWS_AS(gen_survival_dataset(spec, rng), DomainError);
}

TEST_CASE("survival generator rejects an impossible correlation cap") {
  RandomSource rng(5, 0);
  SurvivalSimSpec spec;
  spec.p = 20;
  spec.source_rho = 0.95;
  spec.source_block = 20;
  CHECK_THROWS_AS(gen_survival_dataset(spec, rng), DataValidationError);
}

TEST_CASE("null survival signal gives chance-level concordance") {
  RandomSource rng(6, 0);
  SurvivalSimSpec spec;
  spec.beta_star = 0.0;
  std::vector<double> errors;
  for (int t = 0; t < 50; ++t) {
    const SurvivalDataset d = gen_survival_dataset(spec, rng);
    const Eigen::VectorXd pred = d.x.col(d.predictors[0]);
    errors.push_back(concordance_error(d.w, d.delta, pred));
  }
  const auto m = variscan::testing::moments(errors);
  CHECK(std::abs(m.mean - 0.5) < 3 * m.se());
}
