#include "variscan/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "variscan/errors.hpp"

namespace variscan {

void ClusterSimSpec::validate() const {
  if (n < 2 || p < 2) throw DomainError("ClusterSimSpec: need n >= 2 and p >= 2");
  if (!(alpha1 > 0.0) || !(alpha2 > 0.0)) throw DomainError("ClusterSimSpec: masses must be positive");
  if (!(d0 >= 0.0 && d0 < 1.0)) throw DomainError("ClusterSimSpec: discount outside [0,1)");
  if (!(base_lo < base_hi)) throw DomainError("ClusterSimSpec: empty base interval");
  if (!(tau0 >= 0.0)) throw DomainError("ClusterSimSpec: negative noise sd");
}

ClusterDataset gen_cluster_dataset(const ClusterSimSpec& spec, RandomSource& rng) {
  spec.validate();
  ClusterDataset out;
  out.truth = sample_partition(spec.p, {spec.alpha1, spec.d0}, rng);
  out.num_clusters = out.truth.num_clusters();

  // G ~ DP(alpha2, U(lo, hi)), truncated once the leftover stick is negligible.
  std::vector<double> atoms;
  std::vector<double> cumulative;
  double remaining = 1.0;
  while (remaining >= 1e-10) {
    const double v = rng.beta(1.0, spec.alpha2);
    atoms.push_back(rng.uniform(spec.base_lo, spec.base_hi));
    const double weight = remaining * v;
    cumulative.push_back((cumulative.empty() ? 0.0 : cumulative.back()) + weight);
    remaining -= weight;
  }
  const double total = cumulative.back();

  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto q = static_cast<Eigen::Index>(out.num_clusters);
  out.latent.resize(n, q);
  for (Eigen::Index k = 0; k < q; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = rng.uniform() * total;
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      if (it == cumulative.end()) --it;
      out.latent(i, k) = atoms[static_cast<std::size_t>(it - cumulative.begin())];
    }
  }
  out.x.resize(n, static_cast<Eigen::Index>(spec.p));
  for (Eigen::Index j = 0; j < out.x.cols(); ++j) {
    const int k = out.truth.label(static_cast<std::size_t>(j));
    for (Eigen::Index i = 0; i < n; ++i) out.x(i, j) = out.latent(i, k) + spec.tau0 * rng.normal();
  }
  return out;
}

void SurvivalSimSpec::validate() const {
  if (n < 4 || p < 2) throw DomainError("SurvivalSimSpec: need n >= 4 and p >= 2");
  if (predictor_count < 1 || predictor_count > p) throw DomainError("SurvivalSimSpec: bad predictor count");
  if (!(censor_fraction >= 0.0 && censor_fraction < 1.0)) {
    throw DomainError("SurvivalSimSpec: censor fraction outside [0,1)");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DomainError("SurvivalSimSpec: bad train fraction");
  if (!(source_rho >= 0.0 && source_rho < 1.0) || source_block < 1) {
    throw DomainError("SurvivalSimSpec: bad source correlation structure");
  }
}

Eigen::MatrixXd gen_correlated_covariates(std::size_t n, std::size_t p, double rho, std::size_t block,
                                          RandomSource& rng) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  const double shared = std::sqrt(rho);
  const double own = std::sqrt(1.0 - rho);
  for (std::size_t start = 0; start < p; start += block) {
    const std::size_t end = std::min(p, start + block);
    for (std::size_t i = 0; i < n; ++i) {
      const double f = rng.normal();
      for (std::size_t j = start; j < end; ++j) {
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = shared * f + own * rng.normal();
      }
    }
  }
  return x;
}

namespace {

double column_correlation(const Eigen::MatrixXd& x, Eigen::Index a, Eigen::Index b) {
  const Eigen::VectorXd ca = x.col(a).array() - x.col(a).mean();
  const Eigen::VectorXd cb = x.col(b).array() - x.col(b).mean();
  const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  return denom > 0.0 ? ca.dot(cb) / denom : 0.0;
}

}  // namespace

SurvivalDataset gen_survival_dataset(const SurvivalSimSpec& spec, RandomSource& rng,
                                     const std::optional<Eigen::MatrixXd>& source) {
  spec.validate();
  SurvivalDataset out;
  out.x = source ? *source
                 : gen_correlated_covariates(spec.n, spec.p, spec.source_rho, spec.source_block, rng);
  const Eigen::Index n = out.x.rows();
  const Eigen::Index p = out.x.cols();
  if (static_cast<std::size_t>(p) < spec.predictor_count) {
    throw DataValidationError("source covariates have fewer columns than the predictor count");
  }

  // Greedy first fit over a random column order.
  std::vector<int> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
  for (int col : order) {
    if (out.predictors.size() == spec.predictor_count) break;
    const bool ok = std::all_of(out.predictors.begin(), out.predictors.end(), [&](int chosen) {
      return std::abs(column_correlation(out.x, col, chosen)) < spec.max_pairwise_corr;
    });
    if (ok) out.predictors.push_back(col);
  }
  if (out.predictors.size() < spec.predictor_count) {
    throw DataValidationError("could not find " + std::to_string(spec.predictor_count) +
                              " columns with pairwise |corr| < " + std::to_string(spec.max_pairwise_corr) +
                              " (found " + std::to_string(out.predictors.size()) + ")");
  }
  std::sort(out.predictors.begin(), out.predictors.end());

  // The split is drawn before the outcomes so that it does not depend on beta_star.
  std::vector<int> subjects(static_cast<std::size_t>(n));
  std::iota(subjects.begin(), subjects.end(), 0);
  for (std::size_t i = subjects.size() - 1; i > 0; --i) std::swap(subjects[i], subjects[rng.index(i + 1)]);
  const auto n_train = static_cast<std::size_t>(std::lround(spec.train_fraction * static_cast<double>(n)));
  out.train.assign(subjects.begin(), subjects.begin() + static_cast<long>(n_train));
  out.test.assign(subjects.begin() + static_cast<long>(n_train), subjects.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  out.w.resize(n);
  out.delta.assign(static_cast<std::size_t>(n), 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    double eta = 0.0;
    for (int col : out.predictors) eta += out.x(i, col);
    const double rate = std::exp(-spec.beta_star * eta);
    const double t = rng.exponential(rate);
    double observed = t;
    if (rng.uniform() < spec.censor_fraction) {
      for (int attempt = 0; attempt < 100000; ++attempt) {
        const double u = rng.exponential(rate);
        if (u < t) {
          observed = u;
          out.delta[static_cast<std::size_t>(i)] = 0;
          break;
        }
      }
    }
    out.w(i) = std::log(observed);
  }

  return out;
}

double concordance_error(const Eigen::VectorXd& w, const std::vector<int>& delta,
                         const Eigen::VectorXd& predicted) {
  const Eigen::Index n = w.size();
  if (static_cast<Eigen::Index>(delta.size()) != n || predicted.size() != n) {
    throw DomainError("concordance_error: length mismatch");
  }
  double usable = 0.0, discordant = 0.0, ties = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool ordered = w(i) < w(j) && delta[static_cast<std::size_t>(i)] == 1;
      // Tied times: the observed failure precedes the censored one.
      const bool tied = w(i) == w(j) && delta[static_cast<std::size_t>(i)] == 1 &&
                        delta[static_cast<std::size_t>(j)] == 0;
      if (!ordered && !tied) continue;
      usable += 1.0;
      if (predicted(i) >= predicted(j)) discordant += 1.0;
      if (predicted(i) == predicted(j)) ties += 1.0;
    }
  }
  if (usable == 0.0) throw DomainError("concordance_error: no usable pairs");
  return discordant / usable - 0.5 * ties / usable;
}

}  // namespace variscan
