// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: acceptance [criterion ...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "support.hpp"
#include "variscan/cli.hpp"
#include "variscan/covariates.hpp"
#include "variscan/io.hpp"
#include "variscan/pdp.hpp"
#include "variscan/regression.hpp"
#include "variscan/simulate.hpp"
#include "variscan/stage1.hpp"
#include "variscan/summaries.hpp"

using namespace variscan;
using namespace variscan::testing;
namespace fs = std::filesystem;

namespace {

constexpr int kReplicates = 5;

// Clustering runs
constexpr std::uint64_t kClusterSeed = 7;
constexpr std::uint64_t kClusterChainSeed = 11;
constexpr int kClusterBurnIn = 3000;
constexpr int kClusterSamples = 1000;
constexpr int kClusterThin = 5;

// Survival runs
constexpr std::uint64_t kSurvivalSeed = 21;
constexpr std::uint64_t kSurvivalStage1Seed = 5;
constexpr std::uint64_t kSurvivalStage2Seed = 6;
constexpr int kSurvivalStage1BurnIn = 2000;
constexpr int kSurvivalStage1Samples = 400;
constexpr int kSurvivalStage2BurnIn = 5000;
constexpr int kSurvivalStage2Samples = 20000;
const double kBetaStars[] = {0.2, 0.6, 1.0};
const double kExpectedN[] = {0.72, 0.41, 0.25};

std::map<int, std::pair<bool, std::string>> verdicts;

void verdict(int id, bool pass, const std::string& detail) {
  verdicts[id] = {pass, detail};
  std::printf("  criterion %d done\n", id);
  std::fflush(stdout);
}

void note(const std::string& line) {
  std::printf("  %s\n", line.c_str());
  std::fflush(stdout);
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Criteria 1-3 share the clustering runs.
void clustering_criteria(const std::set<int>& wanted) {
  double kappa_sum = 0.0;
  int exact_count = 0;
  bool discount_ok = true;
  bool bound_ok = true;
  int bound_above_10 = 0;
  double bound_min = INFINITY;
  for (int r = 0; r < kReplicates; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    RandomSource data_rng(kClusterSeed, static_cast<std::uint64_t>(r));
    const ClusterDataset data = gen_cluster_dataset(ClusterSimSpec{}, data_rng);
    Stage1Config config;
    config.burn_in = kClusterBurnIn;
    config.samples = kClusterSamples;
    config.thin = kClusterThin;
    RandomSource rng(kClusterChainSeed, static_cast<std::uint64_t>(r));
    const Stage1Result fit = run_stage1(CovariateMatrix(data.x), config, rng);

    const double k = kappa(fit.allocation.partition, data.truth);
    const std::size_t q = fit.allocation.partition.num_clusters();
    const IntervalEstimate ci = credible_interval(fit.trace.discount);
    const double p_dp = dirichlet_posterior_prob(fit.trace.discount);
    const IntervalEstimate bf = logbf_lower_bound(fit.trace.discount_log_odds);
    kappa_sum += k;
    exact_count += q == data.num_clusters;
    discount_ok = discount_ok && ci.lower <= 0.33 && 0.33 <= ci.upper && p_dp == 0.0;
    bound_ok = bound_ok && bf.mean > 8.0;
    bound_above_10 += bf.mean > 10.0;
    bound_min = std::min(bound_min, bf.mean);
    note("replicate " + std::to_string(r) + ": Q0=" + std::to_string(data.num_clusters) +
         " q=" + std::to_string(q) + " kappa=" + fmt(k) + " d 95% (" + fmt(ci.lower, 3) + ", " +
         fmt(ci.upper, 3) + ") P(d=0)=" + fmt(p_dp, 3) + " logBF bound " + fmt(bf.mean) + " (" +
         fmt(bf.lower) + ", " + fmt(bf.upper) + ") " + fmt(seconds_since(t0), 3) + "s");
  }
  const double kappa_mean = kappa_sum / kReplicates;
  if (wanted.count(1)) {
    verdict(1, kappa_mean >= 0.995 && exact_count >= 4,
            "mean kappa " + fmt(kappa_mean) + " (need >= 0.995), q = Q0 in " + std::to_string(exact_count) + "/" +
                std::to_string(kReplicates) + " replicates (need >= 4)");
  }
  if (wanted.count(2)) {
    verdict(2, discount_ok, "95% interval covers 0.33 and P(d=0) = 0 in every replicate");
  }
  if (wanted.count(3)) {
    verdict(3, bound_ok,
            "smallest log Bayes factor bound " + fmt(bound_min) + " (need > 8); above 10 in " +
                std::to_string(bound_above_10) + "/" + std::to_string(kReplicates) + " replicates");
  }
}

void stick_breaking_criterion() {
  const PdpParams settings[] = {{1.0, 0.0}, {1.0, 0.5}, {20.0, 0.33}};
  const int draws = 100000;
  const std::size_t depth = 20;
  RandomSource rng(31, 0);
  int checked = 0, outside = 0;
  double worst = 0.0;
  for (const PdpParams& params : settings) {
    std::vector<std::vector<double>> logs(depth);
    for (auto& v : logs) v.reserve(draws);
    for (int t = 0; t < draws; ++t) {
      const StickBreakingDraw draw = stick_breaking(params, depth, rng);
      for (std::size_t h = 0; h < depth; ++h) logs[h].push_back(draw.log_weights[h]);
    }
    for (std::size_t h = 1; h <= depth; ++h) {
      const LogWeightMoments exact = log_pi_moments(params, h);
      const Moments m = moments(logs[h - 1]);
      const double z_mean = std::abs(m.mean - exact.mean) / m.se();
      const double z_var = std::abs(m.variance - exact.variance) / variance_se(logs[h - 1], m);
      for (double z : {z_mean, z_var}) {
        ++checked;
        outside += z >= 3.0;
        worst = std::max(worst, z);
      }
      if (z_mean >= 3.0 || z_var >= 3.0) {
        note("alpha1=" + fmt(params.mass) + " d=" + fmt(params.discount) + " h=" + std::to_string(h) +
             ": mean z " + fmt(z_mean, 3) + ", variance z " + fmt(z_var, 3));
      }
    }
  }
  verdict(4, outside == 0,
          std::to_string(checked - outside) + "/" + std::to_string(checked) +
              " log-weight moments within 3 SE (largest " + fmt(worst, 3) + " SE)");
}

void sampler_criterion() {
  bool ok = true;
  double worst_stage1 = 0.0, worst_stage2 = 0.0;
  for (const GewekeScore& s : stage1_geweke(50000)) {
    worst_stage1 = std::max(worst_stage1, std::abs(s.z));
    if (std::abs(s.z) >= 4.0) note("stage 1 " + s.name + " z=" + fmt(s.z, 3));
  }
  for (const GewekeScore& s : stage2_geweke(50000)) {
    worst_stage2 = std::max(worst_stage2, std::abs(s.z));
    if (std::abs(s.z) >= 4.0) note("stage 2 " + s.name + " z=" + fmt(s.z, 3));
  }
  ok = worst_stage1 < 4.0 && worst_stage2 < 4.0;

  std::vector<Gap> gaps = marginal_intercept_gaps();
  gaps.push_back(marginal_two_column_gap());
  gaps.push_back(marginal_three_column_gap());
  int gaps_ok = 0;
  for (const Gap& g : gaps) gaps_ok += g.ok();
  ok = ok && gaps_ok == static_cast<int>(gaps.size());

  double eppf_gap = 0.0;
  const auto parts = all_partitions(3);
  for (double a : {0.5, 1.0, 5.0, 20.0}) {
    for (double d : {0.0, 0.33, 0.7}) {
      double total = 0.0;
      for (const auto& labels : parts) total += std::exp(log_eppf(Partition::from_labels(labels), {a, d}));
      eppf_gap = std::max(eppf_gap, std::abs(total - 1.0));
    }
  }
  ok = ok && eppf_gap < 1e-12;
  verdict(5, ok,
          "Geweke max |z| stage 1 " + fmt(worst_stage1, 3) + ", stage 2 " + fmt(worst_stage2, 3) +
              " (need < 4); marginal likelihood oracles " + std::to_string(gaps_ok) + "/" +
              std::to_string(gaps.size()) + "; EPPF sum at p=3 off by " + fmt(eppf_gap, 2));
}

// Criteria 6-7 share the survival runs. The covariates and the split do not
// depend on beta*, so Stage 1 is fitted once per replicate.
void survival_criteria(const std::set<int>& wanted) {
  constexpr int kLevels = 3;
  double error_sum[kLevels] = {0, 0, 0};
  double n_sum[kLevels] = {0, 0, 0};
  for (int r = 0; r < kReplicates; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    std::optional<Stage1Result> s1;
    Eigen::MatrixXd shared_x;
    std::vector<int> shared_train;
    std::string line = "replicate " + std::to_string(r) + ":";
    for (int level = 0; level < kLevels; ++level) {
      SurvivalSimSpec spec;
      spec.beta_star = kBetaStars[level];
      RandomSource data_rng(kSurvivalSeed, static_cast<std::uint64_t>(r));
      const SurvivalDataset data = gen_survival_dataset(spec, data_rng);
      const auto n_train = static_cast<Eigen::Index>(data.train.size());
      const auto n_test = static_cast<Eigen::Index>(data.test.size());
      Eigen::MatrixXd x_train(n_train, data.x.cols()), x_test(n_test, data.x.cols());
      for (Eigen::Index i = 0; i < n_train; ++i) x_train.row(i) = data.x.row(data.train[i]);
      for (Eigen::Index i = 0; i < n_test; ++i) x_test.row(i) = data.x.row(data.test[i]);
      CovariateMatrix train(x_train), test(x_test);
      const Standardization st = Standardization::fit(train);
      st.apply(train);
      st.apply(test);

      if (!s1 || data.x != shared_x || data.train != shared_train) {
        Stage1Config c1;
        c1.burn_in = kSurvivalStage1BurnIn;
        c1.samples = kSurvivalStage1Samples;
        RandomSource rng1(kSurvivalStage1Seed, static_cast<std::uint64_t>(r));
        s1 = run_stage1(train, c1, rng1);
        shared_x = data.x;
        shared_train = data.train;
      }

      OutcomeData outcome;
      outcome.family = Family::aft;
      outcome.w.resize(n_train);
      for (Eigen::Index i = 0; i < n_train; ++i) {
        outcome.w(i) = data.w(data.train[i]);
        outcome.delta.push_back(data.delta[static_cast<std::size_t>(data.train[i])]);
      }
      Stage2Config c2;
      c2.burn_in = kSurvivalStage2BurnIn;
      c2.samples = kSurvivalStage2Samples;
      const Stage2Model model =
          make_stage2_model(s1->completed, s1->allocation.partition, s1->configuration.latent, outcome, c2);
      RandomSource rng2(kSurvivalStage2Seed, static_cast<std::uint64_t>(r) * kLevels + level);
      const Stage2Result s2 = run_stage2(model, c2, rng2);
      const Prediction pred = predict(s2.samples, model, test.values);

      Eigen::VectorXd w_test(n_test);
      std::vector<int> delta_test;
      for (Eigen::Index i = 0; i < n_test; ++i) {
        w_test(i) = data.w(data.test[i]);
        delta_test.push_back(data.delta[static_cast<std::size_t>(data.test[i])]);
      }
      const double err = concordance_error(w_test, delta_test, pred.w);
      error_sum[level] += err;
      n_sum[level] += s2.nonlinearity;
      line += " beta*=" + fmt(kBetaStars[level], 2) + " error " + fmt(err, 3) + " N " + fmt(s2.nonlinearity, 3) + ";";
    }
    note(line + " q=" + std::to_string(s1->allocation.partition.num_clusters()) + " " +
         fmt(seconds_since(t0), 3) + "s");
  }

  double error_mean[kLevels], n_mean[kLevels];
  for (int level = 0; level < kLevels; ++level) {
    error_mean[level] = error_sum[level] / kReplicates;
    n_mean[level] = n_sum[level] / kReplicates;
  }
  if (wanted.count(6)) {
    const bool decreasing = error_mean[0] > error_mean[1] && error_mean[1] > error_mean[2];
    verdict(6, decreasing && error_mean[2] <= 0.35,
            "mean concordance error " + fmt(error_mean[0], 3) + " / " + fmt(error_mean[1], 3) + " / " +
                fmt(error_mean[2], 3) + " at beta* 0.2 / 0.6 / 1.0 (need strictly decreasing, last <= 0.35)");
  }
  if (wanted.count(7)) {
    bool ok = n_mean[0] > n_mean[1] && n_mean[1] > n_mean[2];
    for (int level = 0; level < kLevels; ++level) ok = ok && std::abs(n_mean[level] - kExpectedN[level]) <= 0.15;
    verdict(7, ok,
            "nonlinearity " + fmt(n_mean[0], 3) + " / " + fmt(n_mean[1], 3) + " / " + fmt(n_mean[2], 3) +
                " (need within 0.15 of 0.72 / 0.41 / 0.25, decreasing)");
  }
}

// Every subcommand twice with identical arguments into separate trees.
void determinism_criterion() {
  const fs::path root = fs::temp_directory_path() / ("variscan-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  bool ok = true;
  std::vector<std::string> failed;
  for (const char* side : {"a", "b"}) {
    const std::string d = (root / side).string();
    const std::vector<std::vector<std::string>> steps = {
        {"simulate-clusters", "--seed", "3", "--n", "20", "--p", "60", "--out", d + "/clusters"},
        {"simulate-survival", "--seed", "4", "--n", "60", "--p", "50", "--predictors", "4", "--out", d + "/surv"},
        {"fit-stage1", "--covariates", d + "/clusters/covariates.csv", "--seed", "5", "--burn-in", "40", "--samples",
         "40", "--thin", "2", "--stage1b-burn-in", "20", "--stage1b-samples", "20", "--out", d + "/s1"},
        {"fit-stage1", "--covariates", d + "/surv/train_covariates.csv", "--seed", "6", "--burn-in", "40", "--samples",
         "40", "--thin", "2", "--stage1b-burn-in", "20", "--stage1b-samples", "20", "--out", d + "/s1surv"},
        {"fit-stage2", "--stage1", d + "/s1surv", "--outcome", d + "/surv/train_outcome.csv", "--seed", "7",
         "--burn-in", "100", "--samples", "100", "--out", d + "/s2"},
        {"fit", "--covariates", d + "/surv/train_covariates.csv", "--outcome", d + "/surv/train_outcome.csv", "--seed",
         "8", "--burn-in", "40", "--samples", "40", "--thin", "2", "--stage1b-burn-in", "20", "--stage1b-samples",
         "20", "--stage2-burn-in", "100", "--stage2-samples", "100", "--out", d + "/fit"},
        {"predict", "--stage1", d + "/fit/stage1", "--stage2", d + "/fit/stage2", "--covariates",
         d + "/surv/test_covariates.csv", "--ids", d + "/surv/test_outcome.csv", "--out", d + "/pred.csv"},
        {"evaluate", "--outcome", d + "/surv/test_outcome.csv", "--predictions", d + "/pred.csv", "--out",
         d + "/eval_surv.csv"},
        {"evaluate", "--truth", d + "/clusters/truth.csv", "--allocation", d + "/s1/allocation.csv", "--out",
         d + "/eval_clusters.csv"},
        {"report", "--stage1", d + "/fit/stage1", "--stage2", d + "/fit/stage2", "--evaluation",
         "variscan=" + d + "/eval_surv.csv", "--out", d + "/report"},
    };
    for (auto args : steps) {
      const std::string name = args.front();
      args.insert(args.begin(), "variscan");
      const int code = cli::run(args);
      if (code != cli::kOk) {
        ok = false;
        failed.push_back(name + " exited " + std::to_string(code));
      }
    }
  }
  std::size_t compared = 0, differing = 0;
  std::set<std::string> commands;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), root / "a");
    const fs::path other = root / "b" / rel;
    ++compared;
    if (!fs::exists(other) || io::read_text(entry.path()) != io::read_text(other)) {
      ++differing;
      note("differs: " + rel.string());
    }
  }
  for (const auto& f : failed) note(f);
  fs::remove_all(root);
  verdict(8, ok && differing == 0 && compared > 0,
          std::to_string(compared - differing) + "/" + std::to_string(compared) +
              " output files byte-identical across two runs of all 8 subcommands");
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));
  if (wanted.empty()) wanted = {1, 2, 3, 4, 5, 6, 7, 8};

  if (wanted.count(8)) determinism_criterion();
  if (wanted.count(4)) stick_breaking_criterion();
  if (wanted.count(5)) sampler_criterion();
  if (wanted.count(1) || wanted.count(2) || wanted.count(3)) clustering_criteria(wanted);
  if (wanted.count(6) || wanted.count(7)) survival_criteria(wanted);

  int failures = 0;
  for (const auto& [id, v] : verdicts) {
    std::printf("%s criterion %d: %s\n", v.first ? "PASS" : "FAIL", id, v.second.c_str());
    failures += !v.first;
  }
  return failures == 0 ? 0 : 1;
}
