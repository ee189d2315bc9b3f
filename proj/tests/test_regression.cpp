#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/QR>

#include "oracles.hpp"
#include "support.hpp"
#include "variscan/errors.hpp"
#include "variscan/regression.hpp"

using namespace variscan;
using namespace variscan::testing;

namespace {

Partition singletons(int p) {
  std::vector<int> labels(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) labels[static_cast<std::size_t>(j)] = j;
  return Partition::from_labels(labels);
}

}  // namespace

TEST_CASE("spline basis") {
  const Eigen::VectorXd u = (Eigen::VectorXd(2) << -1.0, 1.0).finished();
  const std::vector<double> knot{0.0};
  const Eigen::MatrixXd b = spline_basis(u, knot, 1);
  REQUIRE(b.cols() == 2);
  CHECK(b(0, 0) == -1.0);
  CHECK(b(1, 0) == 1.0);
  CHECK(b(0, 1) == 0.0);
  CHECK(b(1, 1) == 1.0);

  const Eigen::VectorXd below = (Eigen::VectorXd(3) << -3.0, -2.0, -1.5).finished();
  const std::vector<double> knots{-1.0, 0.0, 2.0};
  const Eigen::MatrixXd c = spline_basis(below, knots, 2);
  CHECK(c.cols() == 5);
  CHECK(c.rightCols(3).isZero());
  CHECK(c(0, 1) == 9.0);

  const std::vector<double> unsorted{1.0, 0.0};
  CHECK_THROWS_AS(spline_basis(u, unsorted, 1), DomainError);
  const Eigen::VectorXd odd = (Eigen::VectorXd(5) << 4, 1, 3, 5, 2).finished();
  CHECK(quantile_knots(odd, 1) == std::vector<double>{3.0});
}

TEST_CASE("design column count and truncation") {
  const SplineSpec spline{1, 1};
  const std::vector<int> gamma{1, 1, 1, 2, 2, 0};
  CHECK(design_columns(gamma, spline) == 8);

  RandomSource rng(1, 0);
  const Eigen::MatrixXd reps = normal_matrix(10, 6, rng);
  std::vector<std::vector<double>> knots;
  for (Eigen::Index k = 0; k < 6; ++k) knots.push_back(quantile_knots(reps.col(k), 1));
  const Eigen::MatrixXd u = build_design(gamma, reps, knots, spline);
  CHECK(u.cols() == 8);
  CHECK(u.col(0).isOnes());
  CHECK(u.col(1) == reps.col(0));
  CHECK(u.col(4) == reps.col(3));

  const std::vector<int> none(6, 0);
  CHECK(build_design(none, reps, knots, spline).cols() == 1);

  // n = 8 and a proposal implying 9 columns
  const Eigen::MatrixXd short_reps = reps.topRows(8);
  const std::vector<int> too_many{1, 1, 1, 1, 2, 2};
  CHECK(design_columns(too_many, spline) == 9);
  CHECK_THROWS_AS(build_design(too_many, short_reps, knots, spline), DomainError);
}

TEST_CASE("marginal likelihood: intercept-only against quadrature") {
  for (const Gap& gap : marginal_intercept_gaps()) CHECK(gap.observed < gap.tolerance);
}

TEST_CASE("marginal likelihood: two columns against nested quadrature") {
  const Gap gap = marginal_two_column_gap();
  CHECK(gap.observed < gap.tolerance);
}

TEST_CASE("marginal likelihood: three columns against Monte Carlo") {
  const Gap gap = marginal_three_column_gap();
  CHECK(gap.observed < gap.tolerance);
}

TEST_CASE("marginal likelihood limits and errors") {
  RandomSource rng(5, 0);
  const Eigen::Index n = 6;
  Eigen::MatrixXd u(n, 2);
  u.col(0).setOnes();
  u.col(1) = normal_matrix(n, 1, rng);
  const Eigen::VectorXd y = normal_matrix(n, 1, rng);
  const Eigen::VectorXd scale = Eigen::VectorXd::Ones(n);
  const double sigma2 = 1.3;
  const double null_density = -0.5 * static_cast<double>(n) * std::log(2 * std::numbers::pi * sigma2) -
                              0.5 * y.squaredNorm() / sigma2;
  CHECK(log_marginal_gamma(u, y, scale, sigma2, 1e-12) == doctest::Approx(null_density).epsilon(1e-9));

  Eigen::MatrixXd singular(n, 2);
  singular.col(0).setOnes();
  singular.col(1).setConstant(2.0);
  CHECK_THROWS_AS(log_marginal_gamma(singular, y, scale, sigma2, 1.0), NumericalError);
  CHECK_THROWS_AS(log_marginal_gamma(u, y, scale, -1.0, 1.0), DomainError);
}

TEST_CASE("working outcomes") {
  const Eigen::VectorXd r = (Eigen::VectorXd(3) << 0.0, 1.0, 3.0).finished();
  const Eigen::VectorXd eta = (Eigen::VectorXd(3) << -0.5, 0.2, 1.0).finished();

  const WorkingOutcome gauss = transform_outcome(r, eta, Family::gaussian, 2.5);
  CHECK(gauss.y == r);
  CHECK(gauss.precision.isApprox(Eigen::VectorXd::Constant(3, 1 / 2.5)));

  const WorkingOutcome pois = transform_outcome(r, eta, Family::poisson);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double mu = std::exp(eta(i));
    CHECK(pois.y(i) == doctest::Approx(eta(i) + (r(i) - mu) / mu));
    CHECK(pois.precision(i) == doctest::Approx(mu));
  }

  const Eigen::VectorXd b = (Eigen::VectorXd(3) << 0.0, 1.0, 1.0).finished();
  const WorkingOutcome bern = transform_outcome(b, eta, Family::bernoulli);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double mu = 1 / (1 + std::exp(-eta(i)));
    CHECK(bern.y(i) == doctest::Approx(eta(i) + (b(i) - mu) / (mu * (1 - mu))));
    CHECK(bern.precision(i) == doctest::Approx(mu * (1 - mu)));
  }
  CHECK_THROWS_AS(transform_outcome(r, eta, Family::bernoulli), DomainError);
  CHECK_THROWS_AS(transform_outcome(-r, eta, Family::poisson), DomainError);
}

TEST_CASE("censored imputation") {
  RandomSource rng(6, 0);
  const Eigen::VectorXd w = normal_matrix(20, 1, rng);
  const Eigen::VectorXd eta = normal_matrix(20, 1, rng);
  const std::vector<int> events(20, 1);
  const Eigen::VectorXd same = impute_censored(w, events, eta, 1.0, rng);
  CHECK(same == w);

  std::vector<int> delta(20, 1);
  for (int i = 0; i < 20; i += 3) delta[static_cast<std::size_t>(i)] = 0;
  for (int t = 0; t < 200; ++t) {
    const Eigen::VectorXd y = impute_censored(w, delta, eta, 0.5, rng);
    for (Eigen::Index i = 0; i < 20; ++i) {
      if (delta[static_cast<std::size_t>(i)] == 0) {
        CHECK(y(i) > w(i));
      } else {
        CHECK(y(i) == w(i));
      }
    }
  }

  // eta far above the censoring time: essentially untruncated
  const Eigen::VectorXd w1 = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd eta1 = Eigen::VectorXd::Constant(1, 6.0);
  const std::vector<int> censored{0};
  std::vector<double> draws;
  for (int t = 0; t < 40000; ++t) draws.push_back(impute_censored(w1, censored, eta1, 1.0, rng)(0));
  const auto m = moments(draws);
  CHECK(std::abs(m.mean - 6.0) < 3 * m.se());
  CHECK(std::abs(m.variance - 1.0) < 3 * variscan::testing::variance_se(draws, m));
}

TEST_CASE("representatives") {
  RandomSource rng(7, 0);
  const Eigen::MatrixXd x = normal_matrix(8, 5, rng);
  const Partition part = Partition::from_labels(std::vector<int>{0, 1, 1, 2, 1});
  const Eigen::MatrixXd latent = normal_matrix(8, 3, rng);
  std::vector<int> seen(5, 0);
  for (int t = 0; t < 3000; ++t) {
    const RepresentativeSet r = choose_representatives(part, latent, x, RepresentativeMode::member, rng);
    REQUIRE(r.indices.size() == 3);
    CHECK(r.indices[0] == 0);
    CHECK(r.indices[2] == 3);
    CHECK(r.vectors.col(1) == x.col(r.indices[1]));
    ++seen[static_cast<std::size_t>(r.indices[1])];
  }
  for (int j : {1, 2, 4}) CHECK(std::abs(seen[static_cast<std::size_t>(j)] - 1000) < 100);

  const RepresentativeSet l = choose_representatives(part, latent, x, RepresentativeMode::latent, rng);
  CHECK(l.vectors == latent);
  CHECK_THROWS_AS(choose_representatives(part, latent.leftCols(2), x, RepresentativeMode::latent, rng), DomainError);
}

TEST_CASE("coefficient and variance updates") {
  RandomSource rng(8, 0);
  const Eigen::Index n = 40;
  const Eigen::MatrixXd x = normal_matrix(n, 3, rng);
  Eigen::VectorXd w = 1.0 + 2.0 * x.col(0).array() - x.col(1).array();
  OutcomeData out;
  out.family = Family::gaussian;

  SUBCASE("flat prior limit gives least squares") {
    for (Eigen::Index i = 0; i < n; ++i) w(i) += 0.5 * rng.normal();
    out.w = w;
    Stage2Config config;
    config.g = 1e10;
    const Stage2Model model = make_stage2_model(x, singletons(3), Eigen::MatrixXd(), out, config);
    Stage2State s = init_stage2(model, rng);
    s.gamma = {kLinear, kLinear, kExcluded};
    const Eigen::MatrixXd u = build_design(s.gamma, s.reps.vectors, s.knots, model.spline);
    const Eigen::VectorXd ls = u.colPivHouseholderQr().solve(w);
    std::vector<std::vector<double>> draws(3);
    for (int t = 0; t < 5000; ++t) {
      update_beta_sigma(s, model, rng);
      for (int c = 0; c < 3; ++c) draws[static_cast<std::size_t>(c)].push_back(s.beta(c));
    }
    for (int c = 0; c < 3; ++c) {
      const auto m = moments(draws[static_cast<std::size_t>(c)]);
      CHECK(std::abs(m.mean - ls(c)) < 4 * m.se());
    }
  }

  SUBCASE("zero residual pins the variance at its lower bound") {
    const Eigen::MatrixXd big = normal_matrix(400, 3, rng);
    out.w = 1.0 + 2.0 * big.col(0).array() - big.col(1).array();
    Stage2Config config;
    config.g = 1e8;
    const Stage2Model model = make_stage2_model(big, singletons(3), Eigen::MatrixXd(), out, config);
    Stage2State s = init_stage2(model, rng);
    s.gamma = {kLinear, kLinear, kExcluded};
    for (int t = 0; t < 500; ++t) {
      update_beta_sigma(s, model, rng);
      CHECK(s.sigma2 >= model.sigma2_low);
      CHECK(s.sigma2 < 1.05 * model.sigma2_low);
    }
  }
}

TEST_CASE("planted linear signal is selected") {
  RandomSource rng(9, 0);
  const Eigen::Index n = 60;
  const Eigen::MatrixXd x = normal_matrix(n, 8, rng);
  OutcomeData out;
  out.w = 1.5 * x.col(4);
  for (Eigen::Index i = 0; i < n; ++i) out.w(i) += 0.3 * rng.normal();
  Stage2Config config;
  config.burn_in = 200;
  config.thin = 1;
  config.samples = 400;
  const Stage2Model model = make_stage2_model(x, singletons(8), Eigen::MatrixXd(), out, config);
  const Stage2Result r = run_stage2(model, config, rng);
  CHECK(1.0 - r.inclusion(4, kExcluded) > 0.9);
  CHECK(r.samples.size() == 400);
  for (const auto& s : r.samples) CHECK(design_columns(s.gamma, model.spline) < static_cast<std::size_t>(n));
}

TEST_CASE("prediction") {
  RandomSource rng(10, 0);
  const Eigen::Index n = 12;
  const Eigen::MatrixXd x = normal_matrix(n, 4, rng);
  OutcomeData out;
  out.w = x.col(1) + 0.1 * normal_matrix(n, 1, rng);
  const Stage2Model model =
      make_stage2_model(x, Partition::from_labels(std::vector<int>{0, 1, 1, 2}), Eigen::MatrixXd(), out, Stage2Config{});

  SUBCASE("intercept-only posterior predicts the mean intercept") {
    std::vector<Stage2Sample> samples(3);
    double total = 0.0;
    for (int t = 0; t < 3; ++t) {
      auto& s = samples[static_cast<std::size_t>(t)];
      s.gamma = {0, 0, 0};
      s.representatives = {0, 1 + t % 2, 3};
      s.knots = {{0.0}, {0.0}, {0.0}};
      s.beta = Eigen::VectorXd::Constant(1, 0.5 * t);
      total += 0.5 * t;
    }
    const Prediction p = predict(samples, model, normal_matrix(5, 4, rng));
    CHECK(p.y_mean.isApprox(Eigen::VectorXd::Constant(5, total / 3)));
    CHECK(p.w == p.y_mean);
  }

  SUBCASE("a training row replays its linear predictor exactly") {
    Stage2State state = init_stage2(model, rng);
    state.gamma = {kLinear, kNonlinear, kExcluded};
    state.beta = (Eigen::VectorXd(4) << 0.3, -1.2, 0.7, 2.0).finished();
    Stage2Sample s{state.gamma, state.reps.indices, state.knots, state.beta, state.omega, state.sigma2};
    const std::vector<Stage2Sample> one{s};
    const Prediction p = predict(one, model, x);
    const Eigen::VectorXd eta = linear_predictor(state, model);
    CHECK(p.y_mean == eta);
    CHECK(p.y_sd.isZero());
  }

  SUBCASE("missing test cells take the training mean and are flagged") {
    Stage2Sample s;
    s.gamma = {kLinear, kExcluded, kExcluded};
    s.representatives = {0, 1, 3};
    s.knots = {{0.0}, {0.0}, {0.0}};
    s.beta = (Eigen::VectorXd(2) << 0.0, 1.0).finished();
    Eigen::MatrixXd test = normal_matrix(2, 4, rng);
    test(1, 0) = std::numeric_limits<double>::quiet_NaN();
    const std::vector<Stage2Sample> one{s};
    const Prediction p = predict(one, model, test);
    CHECK(p.imputed_cells == std::vector<int>{0, 1});
    CHECK(p.y_mean(1) == doctest::Approx(x.col(0).mean()));
    CHECK(p.y_mean(0) == doctest::Approx(test(0, 0)));
    CHECK_THROWS_AS(predict(one, model, normal_matrix(2, 3, rng)), DataValidationError);
  }
}

TEST_CASE("nonlinearity measure") {
  const std::vector<std::array<double, 3>> even{{1.0 / 3, 1.0 / 3, 1.0 / 3}};
  CHECK(nonlinearity_measure(even) == doctest::Approx(0.5));
  const std::vector<std::array<double, 3>> linear{{0.2, 0.8, 0.0}, {0.5, 0.5, 0.0}};
  CHECK(nonlinearity_measure(linear) == 0.0);
  std::size_t skipped = 0;
  const std::vector<std::array<double, 3>> mixed{{1.0, 0.0, 0.0}, {0.0, 0.25, 0.75}};
  CHECK(nonlinearity_measure(mixed, &skipped) == doctest::Approx(0.75));
  CHECK(skipped == 1);
  const std::vector<std::array<double, 3>> none{{1.0, 0.0, 0.0}};
  CHECK_THROWS_AS(nonlinearity_measure(none), DomainError);
}

TEST_CASE("successive-conditional sampler matches the prior (Geweke)") {
  for (const GewekeScore& score : stage2_geweke(50000)) {
    INFO(score.name << " z=" << score.z);
    CHECK(std::abs(score.z) < 4.0);
  }
}
