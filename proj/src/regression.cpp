#include "variscan/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/QR>

#include "variscan/errors.hpp"
#include "variscan/sampling.hpp"

namespace variscan {

namespace {

constexpr double kRankTolerance = 1e-9;

// Design without the rank check on the row count; used at prediction time.
Eigen::MatrixXd assemble_design(std::span<const int> gamma, const Eigen::MatrixXd& reps,
                                const std::vector<std::vector<double>>& knots, const SplineSpec& spline) {
  const Eigen::Index rows = reps.rows();
  const auto cols = static_cast<Eigen::Index>(design_columns(gamma, spline));
  Eigen::MatrixXd u(rows, cols);
  u.col(0).setOnes();
  Eigen::Index c = 1;
  for (std::size_t k = 0; k < gamma.size(); ++k) {
    if (gamma[k] == kLinear) u.col(c++) = reps.col(static_cast<Eigen::Index>(k));
  }
  for (std::size_t k = 0; k < gamma.size(); ++k) {
    if (gamma[k] != kNonlinear) continue;
    u.middleCols(c, spline.block()) = spline_basis(reps.col(static_cast<Eigen::Index>(k)), knots[k], spline.order);
    c += spline.block();
  }
  return u;
}

Eigen::MatrixXd block_for(int selection, const Eigen::VectorXd& u, const std::vector<double>& knots,
                          const SplineSpec& spline) {
  if (selection == kLinear) return u;
  return spline_basis(u, knots, spline.order);
}

// Whitened design restricted to every cluster except `skip`.
Eigen::MatrixXd design_without(const Stage2State& state, const Stage2Model& model, std::size_t skip,
                               const Eigen::VectorXd& inv_sd) {
  std::vector<int> gamma = state.gamma;
  gamma[skip] = kExcluded;
  return inv_sd.asDiagonal() * assemble_design(gamma, state.reps.vectors, state.knots, model.spline);
}

struct Projection {
  Eigen::MatrixXd q;  // orthonormal basis
  double explained = 0.0;  // ||Q' y||^2
  bool full_rank = true;
};

Projection orthonormalize(const Eigen::MatrixXd& a, const Eigen::VectorXd& y) {
  Projection out;
  if (a.cols() == 0) {
    out.q.resize(a.rows(), 0);
    return out;
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    const double scale = std::max(a.col(i).norm(), 1e-300);
    if (std::abs(r(i, i)) <= kRankTolerance * scale) out.full_rank = false;
  }
  out.q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  out.explained = (out.q.transpose() * y).squaredNorm();
  return out;
}

// Marginal log-likelihood pieces shared by every candidate for one cluster.
struct MarginalContext {
  const Projection* base;
  Eigen::VectorXd y;  // whitened outcome
  double yy = 0.0;
  double log_scale = 0.0;  // sum log D_ii
  double sigma2 = 1.0;
  double g = 1.0;
  Eigen::Index n = 0;

  double value(Eigen::Index rank, double explained) const {
    const double shrink = g / (1.0 + g);
    return -0.5 * n * (std::log(sigma2) + 2.0 * kLogSqrt2Pi) - 0.5 * log_scale -
           0.5 * rank * std::log1p(g) - 0.5 * (yy - shrink * explained) / sigma2;
  }
};

// log marginal with an extra (whitened) block appended to the base design, or -inf when infeasible.
double candidate_marginal(const MarginalContext& ctx, const Eigen::MatrixXd& block) {
  const Eigen::Index rank = ctx.base->q.cols() + block.cols();
  if (rank >= ctx.n) return -std::numeric_limits<double>::infinity();
  if (block.cols() == 0) return ctx.value(rank, ctx.base->explained);
  Eigen::MatrixXd resid = block - ctx.base->q * (ctx.base->q.transpose() * block);
  for (Eigen::Index c = 0; c < block.cols(); ++c) {
    if (resid.col(c).norm() <= 1e-8 * std::max(block.col(c).norm(), 1e-300)) {
      return -std::numeric_limits<double>::infinity();
    }
  }
  const Projection extra = orthonormalize(resid, ctx.y);
  if (!extra.full_rank) return -std::numeric_limits<double>::infinity();
  return ctx.value(rank, ctx.base->explained + extra.explained);
}

double sigma_prior_rate(const Stage2Model& model) {
  // sigma^-2 ~ chi^2_nu / (nu s0) with s0 the geometric midpoint of the allowed range.
  return 0.5 * model.nu * std::sqrt(model.sigma2_low * model.sigma2_high);
}

double median(Eigen::VectorXd v) {
  const auto n = static_cast<std::size_t>(v.size());
  std::sort(v.data(), v.data() + n);
  return n % 2 == 1 ? v[static_cast<Eigen::Index>(n / 2)]
                    : 0.5 * (v[static_cast<Eigen::Index>(n / 2 - 1)] + v[static_cast<Eigen::Index>(n / 2)]);
}

double mills_ratio(double a) {
  // phi(a) / (1 - Phi(a))
  if (a > 30.0) return a + 1.0 / a;
  const double tail = 0.5 * std::erfc(a / std::sqrt(2.0));
  return std::exp(-0.5 * a * a - kLogSqrt2Pi) / tail;
}

}  // namespace

RepresentativeSet choose_representatives(const Partition& partition, const Eigen::MatrixXd& latent,
                                         const Eigen::MatrixXd& x, RepresentativeMode mode,
                                         RandomSource& rng) {
  RepresentativeSet out;
  out.mode = mode;
  const auto q = static_cast<Eigen::Index>(partition.num_clusters());
  if (mode == RepresentativeMode::latent) {
    if (latent.cols() != q || latent.rows() != x.rows()) {
      throw DomainError("choose_representatives: latent table does not match the partition");
    }
    out.vectors = latent;
    return out;
  }
  const auto members = partition.members();
  out.vectors.resize(x.rows(), q);
  for (Eigen::Index k = 0; k < q; ++k) {
    const auto& m = members[static_cast<std::size_t>(k)];
    const int s = m[rng.index(m.size())];
    out.indices.push_back(s);
    out.vectors.col(k) = x.col(s);
  }
  return out;
}

Eigen::MatrixXd spline_basis(const Eigen::VectorXd& u, std::span<const double> knots, int order) {
  if (order < 1) throw DomainError("spline_basis: order must be at least 1");
  if (!std::is_sorted(knots.begin(), knots.end())) throw DomainError("spline_basis: knots must be sorted");
  const Eigen::Index m = static_cast<Eigen::Index>(knots.size());
  Eigen::MatrixXd out(u.size(), order + m);
  for (int r = 1; r <= order; ++r) out.col(r - 1) = u.array().pow(r);
  for (Eigen::Index l = 0; l < m; ++l) {
    out.col(order + l) = (u.array() - knots[static_cast<std::size_t>(l)]).max(0.0).pow(order);
  }
  return out;
}

std::vector<double> quantile_knots(const Eigen::VectorXd& u, int count) {
  if (count == 1) return {median(u)};
  Eigen::VectorXd sorted = u;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  std::vector<double> out;
  for (int l = 1; l <= count; ++l) {
    const double pos = static_cast<double>(l) / (count + 1) * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<Eigen::Index>(std::floor(pos));
    const Eigen::Index hi = std::min<Eigen::Index>(lo + 1, sorted.size() - 1);
    out.push_back(sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]));
  }
  return out;
}

std::size_t design_columns(std::span<const int> gamma, const SplineSpec& spline) {
  std::size_t cols = 1;
  for (int t : gamma) cols += t == kLinear ? 1 : t == kNonlinear ? static_cast<std::size_t>(spline.block()) : 0;
  return cols;
}

Eigen::MatrixXd build_design(std::span<const int> gamma, const Eigen::MatrixXd& reps,
                             const std::vector<std::vector<double>>& knots, const SplineSpec& spline) {
  const std::size_t cols = design_columns(gamma, spline);
  if (cols >= static_cast<std::size_t>(reps.rows())) {
    throw DomainError("build_design: " + std::to_string(cols) + " columns for " +
                      std::to_string(reps.rows()) + " subjects");
  }
  return assemble_design(gamma, reps, knots, spline);
}

double log_marginal_gamma(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& scale, double sigma2, double g) {
  const Eigen::Index n = y.size();
  if (design.rows() != n || scale.size() != n) throw DomainError("log_marginal_gamma: size mismatch");
  if ((scale.array() <= 0.0).any() || !(sigma2 > 0.0) || !(g >= 0.0)) {
    throw DomainError("log_marginal_gamma: variances must be positive");
  }
  const Eigen::VectorXd inv_sd = scale.array().rsqrt();
  const Eigen::VectorXd yw = inv_sd.asDiagonal() * y;
  const Projection proj = orthonormalize(inv_sd.asDiagonal() * design, yw);
  if (!proj.full_rank) throw NumericalError("log_marginal_gamma: rank-deficient design");
  MarginalContext ctx{&proj, yw, yw.squaredNorm(), scale.array().log().sum(), sigma2, g, n};
  return ctx.value(design.cols(), proj.explained);
}

WorkingOutcome transform_outcome(const Eigen::VectorXd& response, const Eigen::VectorXd& eta,
                                 Family family, double dispersion) {
  if (response.size() != eta.size()) throw DomainError("transform_outcome: size mismatch");
  WorkingOutcome out;
  const Eigen::Index n = response.size();
  out.y.resize(n);
  out.precision.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = response(i);
    const double e = eta(i);
    if (!std::isfinite(e)) throw DomainError("transform_outcome: non-finite linear predictor");
    switch (family) {
      case Family::gaussian:
      case Family::aft:
        out.y(i) = r;
        out.precision(i) = 1.0 / dispersion;
        break;
      case Family::poisson: {
        if (r < 0.0) throw DomainError("transform_outcome: negative count");
        const double mu = std::exp(e);
        out.y(i) = e + (r - mu) / mu;
        out.precision(i) = mu / dispersion;
        break;
      }
      case Family::bernoulli: {
        if (r < 0.0 || r > 1.0) throw DomainError("transform_outcome: binary response outside [0,1]");
        const double mu = 1.0 / (1.0 + std::exp(-e));
        const double v = mu * (1.0 - mu);
        if (!(v > 0.0)) throw DomainError("transform_outcome: fitted probability at 0 or 1");
        out.y(i) = e + (r - mu) / v;
        out.precision(i) = v / dispersion;
        break;
      }
    }
  }
  return out;
}

Eigen::VectorXd impute_censored(const Eigen::VectorXd& w, std::span<const int> delta,
                                const Eigen::VectorXd& eta, double sigma2, RandomSource& rng) {
  Eigen::VectorXd y = w;
  const double sd = std::sqrt(sigma2);
  const double inf = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (delta[static_cast<std::size_t>(i)] == 0) y(i) = sample_truncated_normal(eta(i), sd, w(i), inf, rng);
  }
  return y;
}

Eigen::VectorXd buckley_james_intercept(const Eigen::VectorXd& w, std::span<const int> delta,
                                        int iterations) {
  Eigen::VectorXd y = w;
  const Eigen::Index n = w.size();
  for (int it = 0; it < iterations; ++it) {
    const double mu = y.mean();
    const double sd = std::sqrt(std::max((y.array() - mu).square().sum() / std::max<Eigen::Index>(n - 1, 1), 1e-12));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (delta[static_cast<std::size_t>(i)] == 0) y(i) = mu + sd * mills_ratio((w(i) - mu) / sd);
    }
  }
  return y;
}

void OutcomeData::validate() const {
  if (w.size() < 2) throw DataValidationError("outcome: need at least two subjects");
  if (!w.allFinite()) throw DataValidationError("outcome: non-finite response");
  if (family == Family::aft) {
    if (static_cast<Eigen::Index>(delta.size()) != w.size()) {
      throw DataValidationError("outcome: censoring flags do not match the responses");
    }
    for (int d : delta) {
      if (d != 0 && d != 1) throw DataValidationError("outcome: censoring flag outside {0,1}");
    }
  }
}

void Stage2Config::validate() const {
  if (spline.order < 1 || spline.knots < 0) throw DomainError("Stage2Config: bad spline specification");
  if (g && !(*g > 0.0)) throw DomainError("Stage2Config: g must be positive");
  if (!(nu > 0.0)) throw DomainError("Stage2Config: nu must be positive");
  if (!(r2_low >= 0.0 && r2_low < r2_high && r2_high < 1.0)) throw DomainError("Stage2Config: bad R^2 range");
  if (response_variance && !(*response_variance > 0.0)) throw DomainError("Stage2Config: V must be positive");
  if (burn_in < 0 || thin < 1 || samples < 1) throw DomainError("Stage2Config: bad iteration counts");
}

Stage2Model make_stage2_model(const Eigen::MatrixXd& x, const Partition& partition,
                              const Eigen::MatrixXd& latent, const OutcomeData& outcome,
                              const Stage2Config& config) {
  config.validate();
  outcome.validate();
  if (outcome.w.size() != x.rows()) throw DataValidationError("outcome rows do not match the covariates");
  if (static_cast<Eigen::Index>(partition.size()) != x.cols()) {
    throw DataValidationError("allocation does not cover the covariates");
  }
  Stage2Model model;
  model.partition = partition;
  model.members = partition.members();
  model.x = x;
  model.latent = latent;
  model.outcome = outcome;
  model.spline = config.spline;
  model.mode = config.mode;
  model.resample_representatives = config.resample_representatives;
  model.g = config.g.value_or(static_cast<double>(x.rows()));
  model.nu = config.nu;
  model.dispersion = config.dispersion;
  if (config.mode == RepresentativeMode::latent &&
      (latent.rows() != x.rows() || latent.cols() != static_cast<Eigen::Index>(partition.num_clusters()))) {
    throw DataValidationError("latent configuration does not match the allocation");
  }

  double variance = 0.0;
  if (config.response_variance) {
    variance = *config.response_variance;
  } else {
    Eigen::VectorXd y0 = outcome.w;
    if (outcome.family == Family::aft) {
      y0 = buckley_james_intercept(outcome.w, outcome.delta);
    } else if (outcome.family != Family::gaussian) {
      const double m = outcome.w.mean();
      const double link = outcome.family == Family::poisson ? std::log(std::max(m, 1e-3))
                                                             : std::log(std::clamp(m, 1e-3, 1 - 1e-3) /
                                                                        (1 - std::clamp(m, 1e-3, 1 - 1e-3)));
      y0 = transform_outcome(outcome.w, Eigen::VectorXd::Constant(x.rows(), link), outcome.family,
                             config.dispersion)
               .y;
    }
    variance = (y0.array() - y0.mean()).square().sum() / static_cast<double>(y0.size() - 1);
  }
  if (!(variance > 0.0)) throw DataValidationError("outcome has zero variance");
  model.variance = variance;
  model.sigma2_low = (1.0 - config.r2_high) * variance;
  model.sigma2_high = (1.0 - config.r2_low) * variance;
  return model;
}

namespace {

void refresh_representative(Stage2State& state, const Stage2Model& model, std::size_t k, int column) {
  state.reps.indices[k] = column;
  state.reps.vectors.col(static_cast<Eigen::Index>(k)) = model.x.col(column);
  state.knots[k] = quantile_knots(model.x.col(column), model.spline.knots);
}

bool uses_sigma(const Stage2Model& model) {
  return model.outcome.family == Family::gaussian || model.outcome.family == Family::aft;
}

}  // namespace

Stage2State init_stage2(const Stage2Model& model, RandomSource& rng) {
  Stage2State state;
  state.reps = choose_representatives(model.partition, model.latent, model.x, model.mode, rng);
  const std::size_t q = model.q();
  for (std::size_t k = 0; k < q; ++k) {
    state.knots.push_back(quantile_knots(state.reps.vectors.col(static_cast<Eigen::Index>(k)), model.spline.knots));
  }
  state.gamma.assign(q, kExcluded);
  const Eigen::Index n = model.n();
  const OutcomeData& out = model.outcome;
  state.scale = Eigen::VectorXd::Ones(n);
  state.sigma2 = uses_sigma(model) ? std::sqrt(model.sigma2_low * model.sigma2_high) : 1.0;
  if (out.family == Family::gaussian) {
    state.y = out.w;
  } else if (out.family == Family::aft) {
    state.y = buckley_james_intercept(out.w, out.delta);
  } else {
    const double m = out.w.mean();
    const double link = out.family == Family::poisson
                            ? std::log(std::max(m, 1e-3))
                            : std::log(std::clamp(m, 1e-3, 1 - 1e-3) / (1 - std::clamp(m, 1e-3, 1 - 1e-3)));
    const WorkingOutcome wo = transform_outcome(out.w, Eigen::VectorXd::Constant(n, link), out.family, model.dispersion);
    state.y = wo.y;
    state.scale = wo.precision.cwiseInverse();
  }
  state.beta = Eigen::VectorXd::Constant(1, state.y.mean());
  return state;
}

Eigen::VectorXd linear_predictor(const Stage2State& state, const Stage2Model& model) {
  return assemble_design(state.gamma, state.reps.vectors, state.knots, model.spline) * state.beta;
}

void update_gamma(Stage2State& state, const Stage2Model& model, RandomSource& rng) {
  const Eigen::Index n = model.n();
  const Eigen::VectorXd inv_sd = state.scale.array().rsqrt();
  MarginalContext ctx;
  ctx.y = inv_sd.asDiagonal() * state.y;
  ctx.yy = ctx.y.squaredNorm();
  ctx.log_scale = state.scale.array().log().sum();
  ctx.sigma2 = state.sigma2;
  ctx.g = model.g;
  ctx.n = n;
  const bool member = model.mode == RepresentativeMode::member;

  for (std::size_t k = 0; k < model.q(); ++k) {
    const Projection base = orthonormalize(design_without(state, model, k, inv_sd), ctx.y);
    if (!base.full_rank) throw NumericalError("update_gamma: current design lost rank");
    ctx.base = &base;
    const auto kk = static_cast<Eigen::Index>(k);
    auto marginal = [&](int t, const Eigen::VectorXd& u, const std::vector<double>& knots) {
      if (t == kExcluded) return candidate_marginal(ctx, Eigen::MatrixXd(n, 0));
      return candidate_marginal(ctx, inv_sd.asDiagonal() * block_for(t, u, knots, model.spline));
    };

    const auto& members = model.members[k];
    if (member && model.resample_representatives && members.size() > 1) {
      const int proposal = members[rng.index(members.size())];
      if (state.gamma[k] == kExcluded) {
        refresh_representative(state, model, k, proposal);
      } else if (proposal != state.reps.indices[k]) {
        const Eigen::VectorXd u = model.x.col(proposal);
        const std::vector<double> knots = quantile_knots(u, model.spline.knots);
        const double current = marginal(state.gamma[k], state.reps.vectors.col(kk), state.knots[k]);
        const double proposed = marginal(state.gamma[k], u, knots);
        if (std::log(rng.uniform()) < proposed - current) refresh_representative(state, model, k, proposal);
      }
    }

    std::array<double, 3> log_w{};
    for (int t = 0; t < 3; ++t) {
      log_w[t] = std::log(state.omega[t]) + marginal(t, state.reps.vectors.col(kk), state.knots[k]);
    }
    state.gamma[k] = static_cast<int>(sample_categorical(log_w, rng));
  }
}

void update_omega(Stage2State& state, RandomSource& rng) {
  std::array<double, 3> alpha{1.0, 1.0, 1.0};
  for (int t : state.gamma) alpha[t] += 1.0;
  state.omega = sample_dirichlet3(alpha, rng);
}

void update_beta_sigma(Stage2State& state, const Stage2Model& model, RandomSource& rng) {
  const Eigen::VectorXd inv_sd = state.scale.array().rsqrt();
  const Eigen::MatrixXd u = inv_sd.asDiagonal() * build_design(state.gamma, state.reps.vectors, state.knots, model.spline);
  const Eigen::VectorXd yw = inv_sd.asDiagonal() * state.y;
  const Eigen::Index cols = u.cols();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(u);
  const auto r = qr.matrixQR().topLeftCorner(cols, cols).triangularView<Eigen::Upper>();
  const Eigen::VectorXd qty = (qr.householderQ().transpose() * yw).head(cols);
  const double shrink = model.g / (1.0 + model.g);
  Eigen::VectorXd noise(cols);
  for (Eigen::Index c = 0; c < cols; ++c) noise(c) = rng.normal();
  state.beta = r.solve(shrink * qty + std::sqrt(shrink * state.sigma2) * noise);
  if (!state.beta.allFinite()) throw NumericalError("update_beta_sigma: non-finite coefficients");

  if (!uses_sigma(model)) {
    state.sigma2 = 1.0;
    return;
  }
  const Eigen::VectorXd fit = u * state.beta;
  const double rss = (yw - fit).squaredNorm();
  const double prior_quad = fit.squaredNorm() / model.g;
  const double shape = 0.5 * model.nu + 0.5 * static_cast<double>(model.n()) + 0.5 * static_cast<double>(cols);
  const double rate = sigma_prior_rate(model) + 0.5 * rss + 0.5 * prior_quad;
  const double precision =
      sample_truncated_gamma(shape, rate, 1.0 / model.sigma2_high, 1.0 / model.sigma2_low, rng);
  state.sigma2 = 1.0 / precision;
}

void update_outcome(Stage2State& state, const Stage2Model& model, RandomSource& rng) {
  const OutcomeData& out = model.outcome;
  if (out.family == Family::gaussian) return;
  const Eigen::VectorXd eta = linear_predictor(state, model);
  if (out.family == Family::aft) {
    state.y = impute_censored(out.w, out.delta, eta, state.sigma2, rng);
    return;
  }
  const WorkingOutcome wo = transform_outcome(out.w, eta, out.family, model.dispersion);
  state.y = wo.y;
  state.scale = wo.precision.cwiseInverse();
}

void stage2_sweep(Stage2State& state, const Stage2Model& model, RandomSource& rng) {
  update_outcome(state, model, rng);
  update_gamma(state, model, rng);
  update_omega(state, rng);
  update_beta_sigma(state, model, rng);
}

Stage2State sample_stage2_prior(const Stage2Model& model, RandomSource& rng) {
  const Eigen::Index n = model.n();
  Stage2State state;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 1000000) throw NumericalError("sample_stage2_prior: truncation rejection failed");
    state.omega = sample_dirichlet3({1.0, 1.0, 1.0}, rng);
    state.gamma.assign(model.q(), kExcluded);
    for (auto& t : state.gamma) {
      const double u = rng.uniform();
      t = u < state.omega[0] ? kExcluded : u < state.omega[0] + state.omega[1] ? kLinear : kNonlinear;
    }
    if (design_columns(state.gamma, model.spline) >= static_cast<std::size_t>(n)) continue;
    state.reps = choose_representatives(model.partition, model.latent, model.x, model.mode, rng);
    state.knots.clear();
    for (std::size_t k = 0; k < model.q(); ++k) {
      state.knots.push_back(quantile_knots(state.reps.vectors.col(static_cast<Eigen::Index>(k)), model.spline.knots));
    }
    const Eigen::MatrixXd u = build_design(state.gamma, state.reps.vectors, state.knots, model.spline);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(u);
    bool full_rank = true;
    for (Eigen::Index i = 0; i < u.cols(); ++i) {
      if (std::abs(qr.matrixQR()(i, i)) <= kRankTolerance * std::max(u.col(i).norm(), 1e-300)) full_rank = false;
    }
    if (!full_rank) continue;

    state.scale = Eigen::VectorXd::Ones(n);
    state.sigma2 = 1.0;
    if (uses_sigma(model)) {
      const double precision = sample_truncated_gamma(0.5 * model.nu, sigma_prior_rate(model),
                                                      1.0 / model.sigma2_high, 1.0 / model.sigma2_low, rng);
      state.sigma2 = 1.0 / precision;
    }
    const Eigen::Index cols = u.cols();
    Eigen::VectorXd noise(cols);
    for (Eigen::Index c = 0; c < cols; ++c) noise(c) = rng.normal();
    state.beta = qr.matrixQR().topLeftCorner(cols, cols).triangularView<Eigen::Upper>().solve(
        std::sqrt(model.g * state.sigma2) * noise);
    state.y = u * state.beta;
    for (Eigen::Index i = 0; i < n; ++i) state.y(i) += std::sqrt(state.sigma2) * rng.normal();
    return state;
  }
}

Stage2Result run_stage2(const Stage2Model& model, const Stage2Config& config, RandomSource& rng,
                        std::optional<Stage2State> start) {
  config.validate();
  Stage2Result result;
  Stage2State state = start ? std::move(*start) : init_stage2(model, rng);
  const std::size_t q = model.q();
  result.inclusion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), 3);
  result.representative_frequency.assign(static_cast<std::size_t>(model.x.cols()), 0.0);
  std::vector<std::array<double, 3>> omega_trace;
  const long total = static_cast<long>(config.burn_in) + static_cast<long>(config.thin) * config.samples;
  for (long it = 1; it <= total; ++it) {
    stage2_sweep(state, model, rng);
    if (design_columns(state.gamma, model.spline) >= static_cast<std::size_t>(model.n())) {
      throw InvalidStateError("stage 2: column constraint violated");
    }
    if (it <= config.burn_in || (it - config.burn_in) % config.thin != 0) continue;
    Stage2Sample s;
    s.gamma = state.gamma;
    s.representatives = state.reps.indices;
    s.knots = state.knots;
    s.beta = state.beta;
    s.omega = state.omega;
    s.sigma2 = state.sigma2;
    for (std::size_t k = 0; k < q; ++k) result.inclusion(static_cast<Eigen::Index>(k), state.gamma[k]) += 1.0;
    for (int s_k : state.reps.indices) result.representative_frequency[static_cast<std::size_t>(s_k)] += 1.0;
    omega_trace.push_back(state.omega);
    result.samples.push_back(std::move(s));
  }
  const double count = static_cast<double>(result.samples.size());
  result.inclusion /= count;
  for (double& f : result.representative_frequency) f /= count;
  result.nonlinearity = nonlinearity_measure(omega_trace);
  result.final_state = std::move(state);
  return result;
}

Prediction predict(std::span<const Stage2Sample> samples, const Stage2Model& model,
                   const Eigen::MatrixXd& x_new) {
  if (samples.empty()) throw DomainError("predict: no posterior samples");
  if (x_new.cols() != model.x.cols()) {
    throw DataValidationError("predict: test covariates have " + std::to_string(x_new.cols()) +
                              " columns, training had " + std::to_string(model.x.cols()));
  }
  const Eigen::Index m = x_new.rows();
  Prediction out;
  out.imputed_cells.assign(static_cast<std::size_t>(m), 0);
  Eigen::MatrixXd filled = x_new;
  for (Eigen::Index j = 0; j < filled.cols(); ++j) {
    const double fill = model.x.rows() > 0 ? model.x.col(j).mean() : 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::isnan(filled(i, j))) {
        filled(i, j) = fill;
        ++out.imputed_cells[static_cast<std::size_t>(i)];
      } else if (!std::isfinite(filled(i, j))) {
        throw DataValidationError("predict: non-finite test covariate");
      }
    }
  }

  const std::size_t q = model.q();
  Eigen::MatrixXd latent_reps;
  if (model.mode == RepresentativeMode::latent) {
    latent_reps.resize(m, static_cast<Eigen::Index>(q));
    for (std::size_t k = 0; k < q; ++k) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
      for (int j : model.members[k]) acc += filled.col(j);
      latent_reps.col(static_cast<Eigen::Index>(k)) = acc / static_cast<double>(model.members[k].size());
    }
  }

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd reps(m, static_cast<Eigen::Index>(q));
  for (const Stage2Sample& s : samples) {
    if (model.mode == RepresentativeMode::latent) {
      reps = latent_reps;
    } else {
      for (std::size_t k = 0; k < q; ++k) reps.col(static_cast<Eigen::Index>(k)) = filled.col(s.representatives[k]);
    }
    const Eigen::VectorXd eta = assemble_design(s.gamma, reps, s.knots, model.spline) * s.beta;
    sum += eta;
    sum_sq += eta.cwiseAbs2();
  }
  const double count = static_cast<double>(samples.size());
  out.y_mean = sum / count;
  out.y_sd = (sum_sq / count - out.y_mean.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
  out.w = model.outcome.family == Family::aft ? Eigen::VectorXd(out.y_mean.array().exp()) : out.y_mean;
  return out;
}

double nonlinearity_measure(std::span<const std::array<double, 3>> omega_trace, std::size_t* skipped) {
  double sum = 0.0;
  std::size_t used = 0, dropped = 0;
  for (const auto& w : omega_trace) {
    const double denom = w[1] + w[2];
    if (!(denom > 0.0)) {
      ++dropped;
      continue;
    }
    sum += w[2] / denom;
    ++used;
  }
  if (skipped) *skipped = dropped;
  if (used == 0) throw DomainError("nonlinearity_measure: no usable omega samples");
  return sum / static_cast<double>(used);
}

}  // namespace variscan
