#include "variscan/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>

#include <CLI11.hpp>

#include "variscan/checkpoint.hpp"
#include "variscan/errors.hpp"
#include "variscan/io.hpp"
#include "variscan/regression.hpp"
#include "variscan/simulate.hpp"
#include "variscan/stage1.hpp"
#include "variscan/summaries.hpp"

namespace variscan::cli {

namespace fs = std::filesystem;
using checkpoint::Json;
using io::CsvWriter;
using io::EffectiveConfig;
using io::format_double;

namespace {

// Bad option values or combinations (exit code 1).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr std::uint64_t kStage1Stream = 1;
constexpr std::uint64_t kStage2Stream = 2;

std::string str(std::size_t v) { return std::to_string(v); }
std::string str(int v) { return std::to_string(v); }
std::string str(double v) { return format_double(v); }

std::int64_t as_int(std::uint64_t v) { return static_cast<std::int64_t>(v); }

void write_key_values(const fs::path& path, const std::string& hash,
                      const std::vector<std::pair<std::string, std::string>>& rows) {
  CsvWriter out(path, hash);
  out.row({"key", "value"});
  for (const auto& [k, v] : rows) out.row({k, v});
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  const io::CsvTable t = io::read_csv(path);
  std::map<std::string, std::string> out;
  for (const auto& row : t.rows) {
    if (row.size() != 2) throw DataValidationError(path.string() + ": expected key,value rows");
    out[row[0]] = row[1];
  }
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataValidationError(what + ": not a number: '" + s + "'");
  }
}

int to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataValidationError(what + ": not an integer: '" + s + "'");
  }
}

// Config written next to a single-file output: predictions.csv -> predictions.config.txt.
fs::path sidecar_config(const fs::path& out) {
  fs::path p = out;
  p.replace_extension(".config.txt");
  return p;
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

Family parse_family(const std::string& s) {
  if (s == "gaussian") return Family::gaussian;
  if (s == "aft") return Family::aft;
  if (s == "poisson") return Family::poisson;
  if (s == "bernoulli") return Family::bernoulli;
  throw UsageError("unknown family '" + s + "'");
}

std::string family_name(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::aft: return "aft";
    case Family::poisson: return "poisson";
    case Family::bernoulli: return "bernoulli";
  }
  return "gaussian";
}

RepresentativeMode parse_mode(const std::string& s) {
  if (s == "member") return RepresentativeMode::member;
  if (s == "latent") return RepresentativeMode::latent;
  throw UsageError("unknown representative mode '" + s + "'");
}

// Reads a (covariate-index, cluster-label) file, 1-based on both columns.
Partition read_allocation(const fs::path& path) {
  const io::CsvTable t = io::read_csv(path);
  if (t.rows.empty() || t.rows[0].size() != 2) {
    throw DataValidationError(path.string() + ": expected columns covariate-index, cluster-label");
  }
  std::vector<int> labels(t.rows.size(), -1);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const int j = to_int(t.rows[r][0], path.string() + " line " + str(t.line_numbers[r]));
    const int c = to_int(t.rows[r][1], path.string() + " line " + str(t.line_numbers[r]));
    if (j < 1 || static_cast<std::size_t>(j) > labels.size() || labels[j - 1] != -1) {
      throw DataValidationError(path.string() + " line " + str(t.line_numbers[r]) +
                                ": covariate indices must be a permutation of 1..p");
    }
    labels[j - 1] = c;
  }
  return Partition::from_labels(labels);
}

void write_allocation(const fs::path& path, const std::string& hash, const Partition& part) {
  CsvWriter out(path, hash);
  out.row({"covariate-index", "cluster-label"});
  for (std::size_t j = 0; j < part.size(); ++j) out.row({str(j + 1), str(part.label(j) + 1)});
}

std::vector<std::string> numbered(const std::string& prefix, Eigen::Index count) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < count; ++j) names.push_back(prefix + std::to_string(j + 1));
  return names;
}

// ---------------------------------------------------------------- simulate

struct SimClusterOptions {
  ClusterSimSpec spec;
  std::uint64_t seed = 1;
  std::uint64_t replicate = 0;
  fs::path out;
};

int simulate_clusters(const SimClusterOptions& o) {
  o.spec.validate();
  EffectiveConfig cfg;
  cfg.set("command", "simulate-clusters");
  cfg.set("seed", as_int(o.seed));
  cfg.set("replicate", as_int(o.replicate));
  cfg.set("n", as_int(o.spec.n));
  cfg.set("p", as_int(o.spec.p));
  cfg.set("alpha1", o.spec.alpha1);
  cfg.set("alpha2", o.spec.alpha2);
  cfg.set("d0", o.spec.d0);
  cfg.set("base-lo", o.spec.base_lo);
  cfg.set("base-hi", o.spec.base_hi);
  cfg.set("tau0", o.spec.tau0);
  const std::string hash = cfg.hash();

  RandomSource rng(o.seed, o.replicate);
  const ClusterDataset data = gen_cluster_dataset(o.spec, rng);
  fs::create_directories(o.out);
  cfg.write(o.out / "config.txt");
  io::write_matrix(o.out / "covariates.csv", hash, data.x, numbered("x", data.x.cols()));
  write_allocation(o.out / "truth.csv", hash, data.truth);
  io::write_matrix(o.out / "truth_latent.csv", hash, data.latent, numbered("v", data.latent.cols()));
  write_key_values(o.out / "truth_summary.csv", hash, {{"clusters", str(data.num_clusters)}});
  return kOk;
}

struct SimSurvivalOptions {
  SurvivalSimSpec spec;
  std::uint64_t seed = 1;
  std::uint64_t replicate = 0;
  fs::path source;
  fs::path out;
};

void write_outcome(const fs::path& path, const std::string& hash, const SurvivalDataset& d,
                   const std::vector<int>& rows) {
  CsvWriter out(path, hash);
  out.row({"subject-id", "w", "delta"});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int i = rows[r];
    out.row({str(r + 1), str(d.w[i]), str(d.delta[static_cast<std::size_t>(i)])});
  }
}

int simulate_survival(const SimSurvivalOptions& o) {
  o.spec.validate();
  EffectiveConfig cfg;
  cfg.set("command", "simulate-survival");
  cfg.set("seed", as_int(o.seed));
  cfg.set("replicate", as_int(o.replicate));
  cfg.set("n", as_int(o.spec.n));
  cfg.set("p", as_int(o.spec.p));
  cfg.set("predictors", as_int(o.spec.predictor_count));
  cfg.set("max-correlation", o.spec.max_pairwise_corr);
  cfg.set("beta-star", o.spec.beta_star);
  cfg.set("censor-fraction", o.spec.censor_fraction);
  cfg.set("train-fraction", o.spec.train_fraction);
  cfg.set("source-rho", o.spec.source_rho);
  cfg.set("source-block", as_int(o.spec.source_block));
  cfg.set("source-fingerprint", o.source.empty() ? std::string("synthetic") : io::file_fingerprint(o.source));

  std::optional<Eigen::MatrixXd> source;
  SurvivalSimSpec spec = o.spec;
  if (!o.source.empty()) {
    const CovariateMatrix x = io::ingest_covariates(o.source);
    if (x.missing_count() > 0) throw DataValidationError(o.source.string() + ": source covariates must be complete");
    source = x.values;
    spec.n = static_cast<std::size_t>(x.rows());
    spec.p = static_cast<std::size_t>(x.cols());
    cfg.set("n", as_int(spec.n));
    cfg.set("p", as_int(spec.p));
  }
  const std::string hash = cfg.hash();

  RandomSource rng(o.seed, o.replicate);
  const SurvivalDataset d = gen_survival_dataset(spec, rng, source);
  fs::create_directories(o.out);
  cfg.write(o.out / "config.txt");
  auto rows_of = [&](const std::vector<int>& idx) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(idx.size()), d.x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = d.x.row(idx[r]);
    return m;
  };
  const auto names = numbered("x", d.x.cols());
  io::write_matrix(o.out / "train_covariates.csv", hash, rows_of(d.train), names);
  io::write_matrix(o.out / "test_covariates.csv", hash, rows_of(d.test), names);
  write_outcome(o.out / "train_outcome.csv", hash, d, d.train);
  write_outcome(o.out / "test_outcome.csv", hash, d, d.test);
  {
    CsvWriter out(o.out / "truth.csv", hash);
    out.row({"covariate-index"});
    for (int j : d.predictors) out.row({str(j + 1)});
  }
  {
    CsvWriter out(o.out / "split.csv", hash);
    out.row({"subject-index", "set", "subject-id"});
    for (std::size_t r = 0; r < d.train.size(); ++r) out.row({str(d.train[r] + 1), "train", str(r + 1)});
    for (std::size_t r = 0; r < d.test.size(); ++r) out.row({str(d.test[r] + 1), "test", str(r + 1)});
  }
  return kOk;
}

// ---------------------------------------------------------------- stage 1

struct Stage1Options {
  fs::path covariates;
  fs::path out;
  fs::path resume;
  std::uint64_t seed = 1;
  bool no_standardize = false;
  Stage1Config config;
};

void add_stage1_options(CLI::App* app, Stage1Options& o) {
  Stage1Config& c = o.config;
  app->add_option("--covariates", o.covariates, "Covariate CSV (rows subjects, columns covariates)")->required();
  app->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app->add_option("--burn-in", c.burn_in, "Stage 1a burn-in sweeps")->capture_default_str();
  app->add_option("--thin", c.thin, "Thinning interval")->capture_default_str();
  app->add_option("--samples", c.samples, "Retained Stage 1a samples")->capture_default_str();
  app->add_option("--stage1b-burn-in", c.stage1b_burn_in, "Stage 1b burn-in sweeps")->capture_default_str();
  app->add_option("--stage1b-samples", c.stage1b_samples, "Retained Stage 1b samples")->capture_default_str();
  app->add_option("--alpha1", c.alpha1, "PDP mass parameter")->capture_default_str();
  app->add_option("--alpha2", c.alpha2, "Nested DP mass parameter")->capture_default_str();
  app->add_flag("--sample-alpha1", c.sample_alpha1, "Gamma(1,1) hyperprior on alpha1");
  app->add_flag("--sample-alpha2", c.sample_alpha2, "Gamma(1,1) hyperprior on alpha2");
  app->add_option("--iota1", c.iota1, "Beta prior weight on z = 1")->capture_default_str();
  app->add_option("--iota0", c.iota0, "Beta prior weight on z = 0")->capture_default_str();
  app->add_option("--tau-floor", c.tau_floor, "Lower bound tau* on tau")->capture_default_str();
  app->add_option("--initial-discount", c.initial_discount, "Starting discount")->capture_default_str();
  app->add_option("--aux-components", c.aux_components, "Auxiliary latent vectors per allocation update")
      ->capture_default_str();
  app->add_flag("--no-standardize", o.no_standardize, "Use covariates on their original scale");
  app->add_option("--resume", o.resume, "Continue from a Stage 1 checkpoint written under the same config");
}

EffectiveConfig stage1_config(const Stage1Options& o) {
  const Stage1Config& c = o.config;
  EffectiveConfig cfg;
  cfg.set("stage", "1");
  cfg.set("seed", as_int(o.seed));
  cfg.set("covariates-fingerprint", io::file_fingerprint(o.covariates));
  cfg.set("standardize", !o.no_standardize);
  cfg.set("alpha1", c.alpha1);
  cfg.set("alpha2", c.alpha2);
  cfg.set("sample-alpha1", c.sample_alpha1);
  cfg.set("sample-alpha2", c.sample_alpha2);
  cfg.set("iota1", c.iota1);
  cfg.set("iota0", c.iota0);
  cfg.set("tau-floor", c.tau_floor);
  cfg.set("aux-components", c.aux_components);
  cfg.set("ig-shape", c.ig_shape);
  cfg.set("ig-scale-factor", c.ig_scale_factor);
  cfg.set("base-mean", "empirical");
  cfg.set("base-variance", "empirical");
  cfg.set("initial-discount", c.initial_discount);
  cfg.set("discount-moves", c.discount_moves);
  cfg.set("burn-in", c.burn_in);
  cfg.set("thin", c.thin);
  cfg.set("samples", c.samples);
  cfg.set("stage1b-burn-in", c.stage1b_burn_in);
  cfg.set("stage1b-samples", c.stage1b_samples);
  return cfg;
}

// Returns the config hash of the written artifacts.
std::string fit_stage1(const Stage1Options& o) {
  try {
    o.config.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  EffectiveConfig cfg = stage1_config(o);
  const std::string base_hash = cfg.hash();

  CovariateMatrix x = io::ingest_covariates(o.covariates);
  const Standardization st = o.no_standardize ? Standardization::identity(x.cols()) : Standardization::fit(x);
  st.apply(x);

  RandomSource rng(o.seed, kStage1Stream);
  Stage1State start;
  if (!o.resume.empty()) {
    auto ck = checkpoint::load_stage1(o.resume);
    checkpoint::require_hash(o.resume.string(), ck.config_hash, base_hash);
    if (ck.extra.contains("completed")) {
      const Eigen::MatrixXd completed = checkpoint::matrix_from_json(ck.extra.at("completed"));
      if (completed.rows() != x.rows() || completed.cols() != x.cols()) {
        throw ArtifactMismatchError(o.resume.string() + ": imputed covariates do not match the data");
      }
      x.values = x.missing.select(completed, x.values);
    }
    start = std::move(ck.state);
    rng = ck.rng;
    cfg.set("resume-fingerprint", io::file_fingerprint(o.resume));
  } else {
    start = init_state(x, o.config, rng);
  }
  const std::string hash = cfg.hash();

  Stage1Result r = run_stage1a(x, std::move(start), o.config, rng);
  CovariateMatrix completed = x;
  completed.values = r.completed;
  r.configuration = run_stage1b(completed, r.allocation.partition, o.config, rng);

  fs::create_directories(o.out);
  cfg.write(o.out / "config.txt");
  write_allocation(o.out / "allocation.csv", hash, r.allocation.partition);
  const Eigen::Index q = static_cast<Eigen::Index>(r.allocation.partition.num_clusters());
  io::write_matrix(o.out / "configuration_latent.csv", hash, r.configuration.latent, numbered("v", q));
  io::write_matrix(o.out / "configuration_indicators.csv", hash, r.configuration.indicators.cast<double>(),
                   numbered("z", q));
  io::write_matrix(o.out / "cocluster.csv", hash, r.cocluster, numbered("x", r.cocluster.cols()));
  {
    CsvWriter out(o.out / "trace.csv", hash);
    out.row({"iteration", "clusters", "discount", "log-odds", "tau", "tau1", "xi", "alpha1", "log-likelihood"});
    const Stage1Trace& t = r.trace;
    for (std::size_t s = 0; s < t.clusters.size(); ++s) {
      const long it = o.config.burn_in + static_cast<long>(o.config.thin) * static_cast<long>(s + 1);
      out.row({std::to_string(it), str(t.clusters[s]), str(t.discount[s]), str(t.discount_log_odds[s]),
               str(t.tau[s]), str(t.tau1[s]), str(t.xi[s]), str(t.alpha1[s]), str(t.log_likelihood[s])});
    }
  }
  const IntervalEstimate d = credible_interval(r.trace.discount);
  const IntervalEstimate bf = logbf_lower_bound(r.trace.discount_log_odds);
  write_key_values(o.out / "summary.csv", hash,
                   {{"subjects", str(static_cast<std::size_t>(x.rows()))},
                    {"covariates", str(static_cast<std::size_t>(x.cols()))},
                    {"missing-cells", str(x.missing_count())},
                    {"clusters", str(static_cast<std::size_t>(q))},
                    {"least-squares-loss", str(r.allocation.loss)},
                    {"least-squares-sample", str(r.allocation.sample_index + 1)},
                    {"discount-mean", str(d.mean)},
                    {"discount-lower", str(d.lower)},
                    {"discount-upper", str(d.upper)},
                    {"dirichlet-probability", str(dirichlet_posterior_prob(r.trace.discount))},
                    {"logbf-bound", str(bf.mean)},
                    {"logbf-lower", str(bf.lower)},
                    {"logbf-upper", str(bf.upper)},
                    {"tau2", str(r.configuration.tau2)},
                    {"tau1-2", str(r.configuration.tau1_2)}});

  Json artifact = {{"config_hash", hash},
                   {"standardization", checkpoint::to_json(st)},
                   {"covariates", checkpoint::to_json(completed.values)},
                   {"allocation", r.allocation.partition.labels()},
                   {"latent", checkpoint::to_json(r.configuration.latent)}};
  checkpoint::save(o.out / "stage1.json", artifact);
  checkpoint::Checkpoint<Stage1State> ck{"stage1", base_hash, r.final_state, rng,
                                         {{"completed", checkpoint::to_json(completed.values)}}};
  checkpoint::save_stage1(o.out / "checkpoint.json", ck);
  return hash;
}

// Reads a run directory's config and verifies that its recorded hash is intact.
EffectiveConfig read_run_config(const fs::path& dir) {
  const fs::path path = dir / "config.txt";
  const EffectiveConfig cfg = EffectiveConfig::read(path);
  const auto recorded = io::read_config_hash(path);
  if (!recorded || *recorded != cfg.hash()) {
    throw ArtifactMismatchError(path.string() + ": contents do not match the recorded config hash");
  }
  return cfg;
}

struct Stage1Artifact {
  std::string hash;
  Standardization standardization;
  Eigen::MatrixXd x;
  Partition allocation;
  Eigen::MatrixXd latent;
};

Stage1Artifact load_stage1_artifact(const fs::path& dir) {
  const EffectiveConfig cfg = read_run_config(dir);
  if (!cfg.contains("stage") || cfg.get("stage") != "1") {
    throw ArtifactMismatchError(dir.string() + " is not a Stage 1 output directory");
  }
  const Json j = checkpoint::load(dir / "stage1.json");
  Stage1Artifact a;
  try {
    a.hash = j.at("config_hash").get<std::string>();
    checkpoint::require_hash((dir / "stage1.json").string(), a.hash, cfg.hash());
    a.standardization = checkpoint::standardization_from_json(j.at("standardization"));
    a.x = checkpoint::matrix_from_json(j.at("covariates"));
    a.allocation = Partition::from_labels(j.at("allocation").get<std::vector<int>>());
    a.latent = checkpoint::matrix_from_json(j.at("latent"));
  } catch (const Json::exception& e) {
    throw DataValidationError((dir / "stage1.json").string() + ": " + e.what());
  }
  return a;
}

// ---------------------------------------------------------------- stage 2

struct Stage2Options {
  fs::path stage1;
  fs::path outcome;
  fs::path out;
  fs::path resume;
  std::uint64_t seed = 1;
  std::string family;
  std::string mode = "member";
  bool fixed_representatives = false;
  double g = 0.0;
  double response_variance = 0.0;
  Stage2Config config;
};

void add_stage2_options(CLI::App* app, Stage2Options& o, const std::string& prefix) {
  Stage2Config& c = o.config;
  auto name = [&](const std::string& n) { return "--" + prefix + n; };
  app->add_option(name("family"), o.family, "gaussian, aft, poisson or bernoulli (default: aft with delta, else gaussian)");
  app->add_option(name("mode"), o.mode, "Representative mode: member or latent")->capture_default_str();
  app->add_flag(name("fixed-representatives"), o.fixed_representatives, "Keep the initial member representatives");
  app->add_option(name("spline-order"), c.spline.order, "Truncated power basis order")->capture_default_str();
  app->add_option(name("knots"), c.spline.knots, "Knots per nonlinear cluster")->capture_default_str();
  app->add_option(name("g"), o.g, "g-prior scale (default: n)");
  app->add_option(name("nu"), c.nu, "Degrees of freedom of the error precision prior")->capture_default_str();
  app->add_option(name("response-variance"), o.response_variance, "V used for the R^2 bounds (default: from data)");
  app->add_option(name("r2-low"), c.r2_low, "Lower R^2 bound")->capture_default_str();
  app->add_option(name("r2-high"), c.r2_high, "Upper R^2 bound")->capture_default_str();
  app->add_option(name("dispersion"), c.dispersion, "GLM dispersion")->capture_default_str();
  app->add_option(name("burn-in"), c.burn_in, "Stage 2 burn-in sweeps")->capture_default_str();
  app->add_option(name("thin"), c.thin, "Thinning interval")->capture_default_str();
  app->add_option(name("samples"), c.samples, "Retained Stage 2 samples")->capture_default_str();
  app->add_option(name("resume"), o.resume, "Continue from a Stage 2 checkpoint written under the same config");
}

Stage2Config resolve(const Stage2Options& o) {
  Stage2Config c = o.config;
  c.mode = parse_mode(o.mode);
  c.resample_representatives = !o.fixed_representatives;
  if (o.g > 0.0) c.g = o.g;
  if (o.response_variance > 0.0) c.response_variance = o.response_variance;
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  return c;
}

std::string fit_stage2(const Stage2Options& o) {
  const Stage2Config config = resolve(o);
  const Stage1Artifact a = load_stage1_artifact(o.stage1);
  std::optional<Family> family;
  if (!o.family.empty()) family = parse_family(o.family);
  const io::OutcomeTable outcome = io::ingest_outcome(o.outcome, family);
  if (outcome.data.w.size() != a.x.rows()) {
    throw DataValidationError(o.outcome.string() + ": " + std::to_string(outcome.data.w.size()) +
                              " outcome rows, Stage 1 covariates have " + std::to_string(a.x.rows()));
  }
  const Stage2Model model = make_stage2_model(a.x, a.allocation, a.latent, outcome.data, config);

  EffectiveConfig cfg;
  cfg.set("stage", "2");
  cfg.set("stage1-hash", a.hash);
  cfg.set("seed", as_int(o.seed));
  cfg.set("outcome-fingerprint", io::file_fingerprint(o.outcome));
  cfg.set("family", family_name(model.outcome.family));
  cfg.set("mode", o.mode);
  cfg.set("resample-representatives", config.resample_representatives);
  cfg.set("spline-order", config.spline.order);
  cfg.set("knots", config.spline.knots);
  cfg.set("g", model.g);
  cfg.set("nu", config.nu);
  cfg.set("response-variance", model.variance);
  cfg.set("r2-low", config.r2_low);
  cfg.set("r2-high", config.r2_high);
  cfg.set("dispersion", config.dispersion);
  cfg.set("burn-in", config.burn_in);
  cfg.set("thin", config.thin);
  cfg.set("samples", config.samples);
  const std::string base_hash = cfg.hash();

  RandomSource rng(o.seed, kStage2Stream);
  std::optional<Stage2State> start;
  if (!o.resume.empty()) {
    auto ck = checkpoint::load_stage2(o.resume);
    checkpoint::require_hash(o.resume.string(), ck.config_hash, base_hash);
    start = std::move(ck.state);
    rng = ck.rng;
    cfg.set("resume-fingerprint", io::file_fingerprint(o.resume));
  }
  const std::string hash = cfg.hash();
  const Stage2Result r = run_stage2(model, config, rng, start);

  fs::create_directories(o.out);
  cfg.write(o.out / "config.txt");
  const std::size_t q = model.q();
  {
    CsvWriter out(o.out / "selection.csv", hash);
    out.row({"cluster-label", "p-linear", "p-nonlinear", "p-excluded", "top-members"});
    for (std::size_t k = 0; k < q; ++k) {
      std::vector<int> members = model.members[k];
      std::stable_sort(members.begin(), members.end(), [&](int a1, int b1) {
        return r.representative_frequency[static_cast<std::size_t>(a1)] >
               r.representative_frequency[static_cast<std::size_t>(b1)];
      });
      std::string top;
      for (std::size_t m = 0; m < members.size() && m < 3; ++m) {
        const double f = r.representative_frequency[static_cast<std::size_t>(members[m])];
        if (f <= 0.0) break;
        if (!top.empty()) top += ";";
        top += std::to_string(members[m] + 1) + ":" + format_double(f);
      }
      const auto kk = static_cast<Eigen::Index>(k);
      out.row({str(k + 1), str(r.inclusion(kk, kLinear)), str(r.inclusion(kk, kNonlinear)),
               str(r.inclusion(kk, kExcluded)), top});
    }
  }
  {
    CsvWriter out(o.out / "omega_trace.csv", hash);
    out.row({"sample", "omega0", "omega1", "omega2", "sigma2", "linear", "nonlinear"});
    for (std::size_t s = 0; s < r.samples.size(); ++s) {
      const Stage2Sample& smp = r.samples[s];
      const auto lin = std::count(smp.gamma.begin(), smp.gamma.end(), kLinear);
      const auto nonlin = std::count(smp.gamma.begin(), smp.gamma.end(), kNonlinear);
      out.row({str(s + 1), str(smp.omega[0]), str(smp.omega[1]), str(smp.omega[2]), str(smp.sigma2),
               std::to_string(lin), std::to_string(nonlin)});
    }
  }
  {
    CsvWriter out(o.out / "representatives.csv", hash);
    out.row({"covariate-index", "cluster-label", "frequency"});
    for (std::size_t j = 0; j < r.representative_frequency.size(); ++j) {
      out.row({str(j + 1), str(model.partition.label(j) + 1), str(r.representative_frequency[j])});
    }
  }
  std::vector<std::array<double, 3>> omega;
  for (const auto& s : r.samples) omega.push_back(s.omega);
  std::size_t skipped = 0;
  nonlinearity_measure(omega, &skipped);
  write_key_values(o.out / "summary.csv", hash,
                   {{"nonlinearity", str(r.nonlinearity)},
                    {"nonlinearity-skipped", str(skipped)},
                    {"clusters", str(q)},
                    {"samples", str(r.samples.size())},
                    {"response-variance", str(model.variance)},
                    {"sigma2-low", str(model.sigma2_low)},
                    {"sigma2-high", str(model.sigma2_high)}});

  Json samples = Json::array();
  for (const auto& s : r.samples) samples.push_back(checkpoint::to_json(s));
  checkpoint::save(o.out / "stage2.json", {{"config_hash", hash},
                                           {"stage1_hash", a.hash},
                                           {"family", family_name(model.outcome.family)},
                                           {"mode", o.mode},
                                           {"spline_order", config.spline.order},
                                           {"knots", config.spline.knots},
                                           {"samples", samples}});
  checkpoint::save_stage2(o.out / "checkpoint.json", {"stage2", base_hash, r.final_state, rng});
  return hash;
}

// ---------------------------------------------------------------- predict

struct PredictOptions {
  fs::path stage1;
  fs::path stage2;
  fs::path covariates;
  fs::path ids;
  fs::path out;
};

int predict_cmd(const PredictOptions& o) {
  const Stage1Artifact a = load_stage1_artifact(o.stage1);
  const EffectiveConfig cfg2 = read_run_config(o.stage2);
  if (!cfg2.contains("stage") || cfg2.get("stage") != "2") {
    throw ArtifactMismatchError(o.stage2.string() + " is not a Stage 2 output directory");
  }
  const Json j = checkpoint::load(o.stage2 / "stage2.json");
  Stage2Model model;
  std::vector<Stage2Sample> samples;
  try {
    checkpoint::require_hash((o.stage2 / "stage2.json").string(), j.at("config_hash").get<std::string>(),
                             cfg2.hash());
    checkpoint::require_hash("Stage 2 output " + o.stage2.string() + " (its Stage 1 input)",
                             j.at("stage1_hash").get<std::string>(), a.hash);
    model.mode = parse_mode(j.at("mode").get<std::string>());
    model.outcome.family = parse_family(j.at("family").get<std::string>());
    model.spline.order = j.at("spline_order").get<int>();
    model.spline.knots = j.at("knots").get<int>();
    for (const auto& s : j.at("samples")) samples.push_back(checkpoint::stage2_sample_from_json(s));
  } catch (const Json::exception& e) {
    throw DataValidationError((o.stage2 / "stage2.json").string() + ": " + e.what());
  }
  model.partition = a.allocation;
  model.members = a.allocation.members();
  model.x = a.x;

  CovariateMatrix test = io::ingest_covariates(o.covariates);
  if (test.cols() != a.x.cols()) {
    throw DataValidationError(o.covariates.string() + ": " + std::to_string(test.cols()) +
                              " columns, training had " + std::to_string(a.x.cols()));
  }
  Eigen::MatrixXd x_new = test.values;
  for (Eigen::Index jj = 0; jj < x_new.cols(); ++jj) {
    for (Eigen::Index i = 0; i < x_new.rows(); ++i) {
      x_new(i, jj) = test.missing(i, jj) ? std::numeric_limits<double>::quiet_NaN()
                                         : (x_new(i, jj) - a.standardization.mean(jj)) / a.standardization.sd(jj);
    }
  }
  std::vector<std::string> ids;
  if (!o.ids.empty()) {
    const io::CsvTable t = io::read_csv(o.ids);
    for (const auto& row : t.rows) ids.push_back(row.at(0));
    if (static_cast<Eigen::Index>(ids.size()) != x_new.rows()) {
      throw DataValidationError(o.ids.string() + ": " + str(ids.size()) + " ids for " +
                                std::to_string(x_new.rows()) + " test subjects");
    }
  } else {
    for (Eigen::Index i = 0; i < x_new.rows(); ++i) ids.push_back(std::to_string(i + 1));
  }
  const Prediction pred = predict(samples, model, x_new);

  EffectiveConfig cfg;
  cfg.set("command", "predict");
  cfg.set("stage1-hash", a.hash);
  cfg.set("stage2-hash", cfg2.hash());
  cfg.set("covariates-fingerprint", io::file_fingerprint(o.covariates));
  cfg.set("ids-fingerprint", o.ids.empty() ? std::string("row-number") : io::file_fingerprint(o.ids));
  const std::string hash = cfg.hash();
  ensure_parent(o.out);
  cfg.write(sidecar_config(o.out));
  CsvWriter out(o.out, hash);
  out.row({"subject-id", "y", "w", "sd", "imputed-cells"});
  for (Eigen::Index i = 0; i < x_new.rows(); ++i) {
    out.row({ids[static_cast<std::size_t>(i)], str(pred.y_mean[i]), str(pred.w[i]), str(pred.y_sd[i]),
             str(pred.imputed_cells[static_cast<std::size_t>(i)])});
  }
  return kOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOptions {
  fs::path truth;
  fs::path allocation;
  fs::path outcome;
  fs::path predictions;
  std::string column = "w";
  bool risk = false;
  fs::path out;
};

int evaluate_cmd(const EvaluateOptions& o) {
  const bool clustering = !o.truth.empty() || !o.allocation.empty();
  const bool survival = !o.outcome.empty() || !o.predictions.empty();
  if (!clustering && !survival) throw UsageError("evaluate needs --truth/--allocation or --outcome/--predictions");
  if (clustering && (o.truth.empty() || o.allocation.empty())) {
    throw UsageError("--truth and --allocation go together");
  }
  if (survival && (o.outcome.empty() || o.predictions.empty())) {
    throw UsageError("--outcome and --predictions go together");
  }
  EffectiveConfig cfg;
  cfg.set("command", "evaluate");
  std::vector<std::pair<std::string, std::string>> rows;
  if (clustering) {
    const Partition truth = read_allocation(o.truth);
    const Partition est = read_allocation(o.allocation);
    if (truth.size() != est.size()) {
      throw DataValidationError("allocation covers " + str(est.size()) + " covariates, truth has " + str(truth.size()));
    }
    cfg.set("truth-fingerprint", io::file_fingerprint(o.truth));
    cfg.set("allocation-fingerprint", io::file_fingerprint(o.allocation));
    rows.push_back({"kappa", str(kappa(est, truth))});
    rows.push_back({"clusters", str(est.num_clusters())});
    rows.push_back({"true-clusters", str(truth.num_clusters())});
  }
  if (survival) {
    io::OutcomeTable outcome = io::ingest_outcome(o.outcome);
    // Without a delta column every time counts as observed.
    if (outcome.data.delta.empty()) outcome.data.delta.assign(outcome.subject_ids.size(), 1);
    const io::CsvTable t = io::read_csv(o.predictions);
    std::size_t col = 1;
    if (!t.header.empty()) {
      auto it = std::find(t.header.begin(), t.header.end(), o.column);
      if (it == t.header.end()) throw DataValidationError(o.predictions.string() + ": no column '" + o.column + "'");
      col = static_cast<std::size_t>(it - t.header.begin());
    }
    std::map<std::string, double> by_id;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      if (col >= t.rows[r].size()) throw DataValidationError(o.predictions.string() + ": missing prediction column");
      by_id[t.rows[r][0]] = to_double(t.rows[r][col], o.predictions.string() + " line " + str(t.line_numbers[r]));
    }
    Eigen::VectorXd predicted(outcome.data.w.size());
    for (std::size_t i = 0; i < outcome.subject_ids.size(); ++i) {
      auto it = by_id.find(outcome.subject_ids[i]);
      if (it == by_id.end()) {
        throw DataValidationError(o.predictions.string() + ": no prediction for subject " + outcome.subject_ids[i]);
      }
      predicted[static_cast<Eigen::Index>(i)] = o.risk ? -it->second : it->second;
    }
    double err = 0.0;
    try {
      err = concordance_error(outcome.data.w, outcome.data.delta, predicted);
    } catch (const DomainError& e) {
      throw DataValidationError(e.what());
    }
    cfg.set("outcome-fingerprint", io::file_fingerprint(o.outcome));
    cfg.set("predictions-fingerprint", io::file_fingerprint(o.predictions));
    cfg.set("column", o.column);
    cfg.set("risk", o.risk);
    rows.push_back({"concordance-error", str(err)});
    rows.push_back({"subjects", str(outcome.subject_ids.size())});
  }
  const std::string hash = cfg.hash();
  if (o.out.empty()) {
    std::cout << "# variscan config-hash=" << hash << "\nkey,value\n";
    for (const auto& [k, v] : rows) std::cout << k << "," << v << "\n";
  } else {
    ensure_parent(o.out);
    cfg.write(sidecar_config(o.out));
    write_key_values(o.out, hash, rows);
  }
  return kOk;
}

// ---------------------------------------------------------------- report

struct ReportOptions {
  fs::path stage1;
  fs::path stage2;
  fs::path truth;
  std::vector<std::string> evaluations;  // label=path
  int bins = 50;
  fs::path out;
};

std::vector<double> column_values(const io::CsvTable& t, const std::string& name, const fs::path& path) {
  auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw DataValidationError(path.string() + ": no column '" + name + "'");
  const auto col = static_cast<std::size_t>(it - t.header.begin());
  std::vector<double> v;
  for (std::size_t r = 0; r < t.rows.size(); ++r) v.push_back(to_double(t.rows[r][col], path.string()));
  return v;
}

int report_cmd(const ReportOptions& o) {
  if (o.bins < 1) throw UsageError("--bins must be positive");
  const EffectiveConfig cfg1 = read_run_config(o.stage1);
  EffectiveConfig cfg;
  cfg.set("command", "report");
  cfg.set("stage1-hash", cfg1.hash());
  cfg.set("bins", o.bins);
  std::optional<EffectiveConfig> cfg2;
  if (!o.stage2.empty()) {
    cfg2 = read_run_config(o.stage2);
    if (!cfg2->contains("stage1-hash") || cfg2->get("stage1-hash") != cfg1.hash()) {
      throw ArtifactMismatchError(o.stage2.string() + " was not fitted on " + o.stage1.string());
    }
    cfg.set("stage2-hash", cfg2->hash());
  }
  if (!o.truth.empty()) cfg.set("truth-fingerprint", io::file_fingerprint(o.truth));
  std::vector<std::pair<std::string, fs::path>> evals;
  for (std::size_t e = 0; e < o.evaluations.size(); ++e) {
    const std::string& spec = o.evaluations[e];
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--evaluation expects label=path, got '" + spec + "'");
    evals.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
    cfg.set("evaluation-" + std::to_string(e + 1), spec.substr(0, eq) + ":" + io::file_fingerprint(evals.back().second));
  }
  const std::string hash = cfg.hash();
  fs::create_directories(o.out);
  cfg.write(o.out / "config.txt");

  const Partition alloc = read_allocation(o.stage1 / "allocation.csv");
  {
    std::vector<int> order(alloc.num_clusters());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return alloc.sizes()[a] > alloc.sizes()[b]; });
    CsvWriter out(o.out / "cluster_sizes.csv", hash);
    out.row({"rank", "cluster-label", "size"});
    for (std::size_t r = 0; r < order.size(); ++r) {
      out.row({str(r + 1), str(order[r] + 1), str(alloc.sizes()[static_cast<std::size_t>(order[r])])});
    }
  }
  const fs::path trace_path = o.stage1 / "trace.csv";
  const io::CsvTable trace = io::read_csv(trace_path);
  const std::vector<double> discount = column_values(trace, "discount", trace_path);
  {
    CsvWriter out(o.out / "discount_density.csv", hash);
    out.row({"component", "d", "density"});
    const double total = static_cast<double>(discount.size());
    const double zeros = static_cast<double>(std::count(discount.begin(), discount.end(), 0.0));
    out.row({"point-mass", "0", str(total > 0 ? zeros / total : 0.0)});
    std::vector<double> counts(static_cast<std::size_t>(o.bins), 0.0);
    for (double d : discount) {
      if (d <= 0.0) continue;
      const auto b = std::min(static_cast<std::size_t>(d * o.bins), counts.size() - 1);
      counts[b] += 1.0;
    }
    for (std::size_t b = 0; b < counts.size(); ++b) {
      const double mid = (static_cast<double>(b) + 0.5) / o.bins;
      out.row({"continuous", str(mid), str(total > 0 ? counts[b] * o.bins / total : 0.0)});
    }
  }
  {
    const auto s1 = read_key_values(o.stage1 / "summary.csv");
    std::vector<std::pair<std::string, std::string>> rows;
    for (const char* key : {"clusters", "discount-mean", "discount-lower", "discount-upper", "dirichlet-probability",
                            "logbf-bound", "logbf-lower", "logbf-upper"}) {
      auto it = s1.find(key);
      if (it == s1.end()) throw DataValidationError((o.stage1 / "summary.csv").string() + ": missing " + key);
      rows.emplace_back(key, it->second);
    }
    if (!o.truth.empty()) {
      const Partition truth = read_allocation(o.truth);
      if (truth.size() != alloc.size()) throw DataValidationError(o.truth.string() + ": covariate count differs");
      rows.emplace_back("kappa", str(kappa(alloc, truth)));
      rows.emplace_back("true-clusters", str(truth.num_clusters()));
    }
    if (cfg2) {
      const auto s2 = read_key_values(o.stage2 / "summary.csv");
      auto it = s2.find("nonlinearity");
      if (it == s2.end()) throw DataValidationError((o.stage2 / "summary.csv").string() + ": missing nonlinearity");
      rows.emplace_back("nonlinearity", it->second);
    }
    write_key_values(o.out / "summary.csv", hash, rows);
  }
  if (cfg2) {
    const fs::path sel_path = o.stage2 / "selection.csv";
    const io::CsvTable sel = io::read_csv(sel_path);
    const auto lin = column_values(sel, "p-linear", sel_path);
    const auto nonlin = column_values(sel, "p-nonlinear", sel_path);
    CsvWriter out(o.out / "selection.csv", hash);
    out.row({"cluster-label", "selection", "probability"});
    for (std::size_t k = 0; k < lin.size(); ++k) {
      out.row({str(k + 1), "linear", str(lin[k])});
      out.row({str(k + 1), "nonlinear", str(nonlin[k])});
    }
  }
  if (!evals.empty()) {
    CsvWriter out(o.out / "error_rates.csv", hash);
    out.row({"label", "file", "concordance-error"});
    for (std::size_t e = 0; e < evals.size(); ++e) {
      const auto kv = read_key_values(evals[e].second);
      auto it = kv.find("concordance-error");
      if (it == kv.end()) throw DataValidationError(evals[e].second.string() + ": no concordance-error");
      out.row({evals[e].first, str(e + 1), it->second});
    }
  }
  return kOk;
}

int dispatch(const std::function<int()>& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    std::cerr << "variscan: " << e.what() << "\n";
    return kUsage;
  } catch (const DataValidationError& e) {
    std::cerr << "variscan: data validation: " << e.what() << "\n";
    return kDataValidation;
  } catch (const ArtifactMismatchError& e) {
    std::cerr << "variscan: artifact mismatch: " << e.what() << "\n";
    return kArtifactMismatch;
  } catch (const DomainError& e) {
    std::cerr << "variscan: invalid argument: " << e.what() << "\n";
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "variscan: " << e.what() << "\n";
    return kDataValidation;
  } catch (const std::exception& e) {
    std::cerr << "variscan: numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"VariScan: covariate clustering and cluster-level variable selection"};
  app.require_subcommand(1);

  SimClusterOptions simc;
  auto* c_simc = app.add_subcommand("simulate-clusters", "Generate a clustered covariate dataset with truth");
  c_simc->add_option("--seed", simc.seed)->capture_default_str();
  c_simc->add_option("--replicate", simc.replicate, "Replicate index (random stream)")->capture_default_str();
  c_simc->add_option("--n", simc.spec.n)->capture_default_str();
  c_simc->add_option("--p", simc.spec.p)->capture_default_str();
  c_simc->add_option("--alpha1", simc.spec.alpha1)->capture_default_str();
  c_simc->add_option("--alpha2", simc.spec.alpha2)->capture_default_str();
  c_simc->add_option("--d0", simc.spec.d0, "True discount")->capture_default_str();
  c_simc->add_option("--base-lo", simc.spec.base_lo)->capture_default_str();
  c_simc->add_option("--base-hi", simc.spec.base_hi)->capture_default_str();
  c_simc->add_option("--tau0", simc.spec.tau0)->capture_default_str();
  c_simc->add_option("--out", simc.out, "Output directory")->required();

  SimSurvivalOptions sims;
  auto* c_sims = app.add_subcommand("simulate-survival", "Generate censored survival data with truth");
  c_sims->add_option("--seed", sims.seed)->capture_default_str();
  c_sims->add_option("--replicate", sims.replicate, "Replicate index (random stream)")->capture_default_str();
  c_sims->add_option("--n", sims.spec.n)->capture_default_str();
  c_sims->add_option("--p", sims.spec.p)->capture_default_str();
  c_sims->add_option("--predictors", sims.spec.predictor_count)->capture_default_str();
  c_sims->add_option("--max-correlation", sims.spec.max_pairwise_corr)->capture_default_str();
  c_sims->add_option("--beta-star", sims.spec.beta_star)->capture_default_str();
  c_sims->add_option("--censor-fraction", sims.spec.censor_fraction)->capture_default_str();
  c_sims->add_option("--train-fraction", sims.spec.train_fraction)->capture_default_str();
  c_sims->add_option("--source-rho", sims.spec.source_rho)->capture_default_str();
  c_sims->add_option("--source-block", sims.spec.source_block)->capture_default_str();
  c_sims->add_option("--source", sims.source, "Covariate CSV to use instead of the synthetic source");
  c_sims->add_option("--out", sims.out, "Output directory")->required();

  Stage1Options s1;
  auto* c_s1 = app.add_subcommand("fit-stage1", "Cluster covariates (Stage 1a and 1b)");
  add_stage1_options(c_s1, s1);
  c_s1->add_option("--out", s1.out, "Output directory")->required();

  Stage2Options s2;
  auto* c_s2 = app.add_subcommand("fit-stage2", "Select cluster representatives against an outcome");
  c_s2->add_option("--stage1", s2.stage1, "Stage 1 output directory")->required();
  c_s2->add_option("--outcome", s2.outcome, "Outcome CSV (subject-id, w[, delta])")->required();
  c_s2->add_option("--seed", s2.seed)->capture_default_str();
  add_stage2_options(c_s2, s2, "");
  c_s2->add_option("--out", s2.out, "Output directory")->required();

  Stage1Options f1;
  Stage2Options f2;
  fs::path fit_out;
  auto* c_fit = app.add_subcommand("fit", "Run Stage 1 then Stage 2 (stage 2 options carry a stage2- prefix)");
  add_stage1_options(c_fit, f1);
  c_fit->add_option("--outcome", f2.outcome, "Outcome CSV (subject-id, w[, delta])")->required();
  add_stage2_options(c_fit, f2, "stage2-");
  c_fit->add_option("--out", fit_out, "Output directory (stage1/ and stage2/ are created)")->required();

  PredictOptions pr;
  auto* c_pr = app.add_subcommand("predict", "Predict outcomes for test covariates");
  c_pr->add_option("--stage1", pr.stage1, "Stage 1 output directory")->required();
  c_pr->add_option("--stage2", pr.stage2, "Stage 2 output directory")->required();
  c_pr->add_option("--covariates", pr.covariates, "Test covariate CSV")->required();
  c_pr->add_option("--ids", pr.ids, "CSV whose first column gives the test subject ids");
  c_pr->add_option("--out", pr.out, "Predictions CSV")->required();

  EvaluateOptions ev;
  auto* c_ev = app.add_subcommand("evaluate", "Score an allocation (kappa) or predictions (concordance error)");
  c_ev->add_option("--truth", ev.truth, "True allocation CSV");
  c_ev->add_option("--allocation", ev.allocation, "Estimated allocation CSV");
  c_ev->add_option("--outcome", ev.outcome, "Test outcome CSV (subject-id, w, delta)");
  c_ev->add_option("--predictions", ev.predictions, "Predictions CSV keyed by subject-id");
  c_ev->add_option("--column", ev.column, "Prediction column to score")->capture_default_str();
  c_ev->add_flag("--risk", ev.risk, "Larger predictions mean shorter survival");
  c_ev->add_option("--out", ev.out, "Evaluation CSV (default: stdout)");

  ReportOptions rp;
  auto* c_rp = app.add_subcommand("report", "Write plot-ready long-format CSVs");
  c_rp->add_option("--stage1", rp.stage1, "Stage 1 output directory")->required();
  c_rp->add_option("--stage2", rp.stage2, "Stage 2 output directory");
  c_rp->add_option("--truth", rp.truth, "True allocation CSV");
  c_rp->add_option("--evaluation", rp.evaluations, "label=path of an evaluate output (repeatable)");
  c_rp->add_option("--bins", rp.bins, "Histogram bins for the discount density")->capture_default_str();
  c_rp->add_option("--out", rp.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*c_simc) return dispatch([&] { return simulate_clusters(simc); });
  if (*c_sims) return dispatch([&] { return simulate_survival(sims); });
  if (*c_s1) {
    return dispatch([&] {
      fit_stage1(s1);
      return kOk;
    });
  }
  if (*c_s2) {
    return dispatch([&] {
      fit_stage2(s2);
      return kOk;
    });
  }
  if (*c_fit) {
    return dispatch([&] {
      f1.out = fit_out / "stage1";
      f2.stage1 = f1.out;
      f2.out = fit_out / "stage2";
      f2.seed = f1.seed;
      resolve(f2);
      fit_stage1(f1);
      fit_stage2(f2);
      return kOk;
    });
  }
  if (*c_pr) return dispatch([&] { return predict_cmd(pr); });
  if (*c_ev) return dispatch([&] { return evaluate_cmd(ev); });
  if (*c_rp) return dispatch([&] { return report_cmd(rp); });
  return kUsage;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace variscan::cli
