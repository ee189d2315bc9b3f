#include <doctest.h>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <unistd.h>

#include "variscan/cli.hpp"
#include "variscan/io.hpp"

using namespace variscan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("variscan-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "variscan");
  return cli::run(args);
}

// key,value CSV into a map
std::map<std::string, std::string> key_values(const fs::path& path) {
  std::map<std::string, std::string> out;
  for (const auto& row : io::read_csv(path).rows) out[row.at(0)] = row.at(1);
  return out;
}

void expect_same_tree(const fs::path& a, const fs::path& b) {
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a);
    INFO(rel.string());
    REQUIRE(fs::exists(b / rel));
    CHECK(io::read_text(entry.path()) == io::read_text(b / rel));
    ++files;
  }
  CHECK(files > 0);
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  TempDir dir;
  CHECK(run({"no-such-command"}) == cli::kUsage);
  CHECK(run({}) == cli::kUsage);
  CHECK(run({"simulate-clusters"}) == cli::kUsage);
  CHECK(run({"simulate-clusters", "--out", dir / "s", "--n", "abc"}) == cli::kUsage);
  CHECK(run({"simulate-clusters", "--out", dir / "s", "--n", "10", "--p", "20"}) == cli::kOk);
  CHECK(run({"fit-stage1", "--covariates", dir / "s/covariates.csv", "--thin", "0", "--out", dir / "f"}) ==
        cli::kUsage);
  CHECK(run({"--help"}) == cli::kOk);
}

TEST_CASE("simulation and fitting are reproducible byte for byte") {
  TempDir dir;
  for (const char* out : {"a", "b"}) {
    REQUIRE(run({"simulate-clusters", "--seed", "7", "--n", "12", "--p", "30", "--out", dir / out}) == 0);
  }
  expect_same_tree(dir / "a", dir / "b");
  REQUIRE(run({"simulate-clusters", "--seed", "8", "--n", "12", "--p", "30", "--out", dir / "c"}) == 0);
  CHECK(io::read_text(dir / "a/covariates.csv") != io::read_text(dir / "c/covariates.csv"));

  const std::vector<std::string> fit{"fit-stage1", "--covariates", dir / "a/covariates.csv", "--seed", "3",
                                     "--burn-in", "20", "--samples", "20", "--thin", "1",
                                     "--stage1b-burn-in", "10", "--stage1b-samples", "10"};
  for (const char* out : {"fa", "fb"}) {
    auto args = fit;
    args.insert(args.end(), {"--out", dir / out});
    REQUIRE(run(args) == 0);
  }
  expect_same_tree(dir / "fa", dir / "fb");
}

TEST_CASE("malformed input exits with 2") {
  TempDir dir;
  io::write_text(dir / "ragged.csv", "1,2,3\n4,5,6\n7,8\n");
  CHECK(run({"fit-stage1", "--covariates", dir / "ragged.csv", "--out", dir / "o"}) == cli::kDataValidation);
  CHECK(run({"fit-stage1", "--covariates", dir / "missing.csv", "--out", dir / "o"}) == cli::kDataValidation);
}

TEST_CASE("perfect allocation scores kappa 1") {
  TempDir dir;
  REQUIRE(run({"simulate-clusters", "--seed", "2", "--n", "10", "--p", "40", "--out", dir / "s"}) == 0);
  REQUIRE(run({"evaluate", "--truth", dir / "s/truth.csv", "--allocation", dir / "s/truth.csv", "--out",
               dir / "eval.csv"}) == 0);
  const auto kv = key_values(dir / "eval.csv");
  CHECK(std::stod(kv.at("kappa")) == 1.0);
  CHECK(kv.at("clusters") == kv.at("true-clusters"));
  CHECK(io::read_config_hash(dir / "eval.csv").has_value());
}

TEST_CASE("end-to-end survival pipeline") {
  TempDir dir;
  REQUIRE(run({"simulate-survival", "--seed", "5", "--n", "60", "--p", "40", "--predictors", "4", "--out",
               dir / "data"}) == 0);
  REQUIRE(run({"fit", "--covariates", dir / "data/train_covariates.csv", "--outcome", dir / "data/train_outcome.csv",
               "--seed", "9", "--burn-in", "30", "--samples", "30", "--thin", "1", "--stage1b-burn-in", "10",
               "--stage1b-samples", "10", "--stage2-burn-in", "50", "--stage2-samples", "50", "--out",
               dir / "fit"}) == 0);
  for (const char* f : {"stage1/allocation.csv", "stage1/cocluster.csv", "stage1/trace.csv", "stage1/summary.csv",
                        "stage2/selection.csv", "stage2/omega_trace.csv", "stage2/summary.csv"}) {
    INFO(f);
    CHECK(fs::exists(dir.path / "fit" / f));
  }
  const auto s1 = key_values(dir.path / "fit/stage1/summary.csv");
  for (const char* key : {"clusters", "discount-mean", "discount-lower", "discount-upper", "logbf-bound"}) {
    INFO(key);
    CHECK(s1.count(key) == 1);
  }

  REQUIRE(run({"predict", "--stage1", dir / "fit/stage1", "--stage2", dir / "fit/stage2", "--covariates",
               dir / "data/test_covariates.csv", "--ids", dir / "data/test_outcome.csv", "--out",
               dir / "pred.csv"}) == 0);
  const io::CsvTable pred = io::read_csv(dir / "pred.csv");
  CHECK(pred.header == std::vector<std::string>{"subject-id", "y", "w", "sd", "imputed-cells"});
  CHECK(pred.rows.size() == 20);

  REQUIRE(run({"evaluate", "--outcome", dir / "data/test_outcome.csv", "--predictions", dir / "pred.csv", "--out",
               dir / "eval.csv"}) == 0);
  const double err = std::stod(key_values(dir / "eval.csv").at("concordance-error"));
  CHECK(err >= 0.0);
  CHECK(err <= 1.0);

  REQUIRE(run({"report", "--stage1", dir / "fit/stage1", "--stage2", dir / "fit/stage2", "--evaluation",
               "variscan=" + (dir / "eval.csv"), "--out", dir / "report"}) == 0);
  for (const char* f : {"cluster_sizes.csv", "discount_density.csv", "summary.csv", "selection.csv", "error_rates.csv"}) {
    INFO(f);
    CHECK(fs::exists(dir.path / "report" / f));
  }
  const auto rs = key_values(dir.path / "report/summary.csv");
  CHECK(rs.count("nonlinearity") == 1);

  // A Stage 2 run from another Stage 1 fit must not be mixed in.
  REQUIRE(run({"fit-stage1", "--covariates", dir / "data/train_covariates.csv", "--seed", "10", "--burn-in", "10",
               "--samples", "10", "--thin", "1", "--stage1b-burn-in", "5", "--stage1b-samples", "5", "--out",
               dir / "other"}) == 0);
  CHECK(run({"predict", "--stage1", dir / "other", "--stage2", dir / "fit/stage2", "--covariates",
             dir / "data/test_covariates.csv", "--out", dir / "bad.csv"}) == cli::kArtifactMismatch);

  // Tampering with a recorded config is detected.
  io::write_text(dir / "fit/stage2/config.txt", io::read_text(dir / "fit/stage2/config.txt") + "extra=1\n");
  CHECK(run({"predict", "--stage1", dir / "fit/stage1", "--stage2", dir / "fit/stage2", "--covariates",
             dir / "data/test_covariates.csv", "--out", dir / "bad.csv"}) == cli::kArtifactMismatch);
}

TEST_CASE("stage 1 resume checks the config") {
  TempDir dir;
  REQUIRE(run({"simulate-clusters", "--seed", "4", "--n", "10", "--p", "20", "--out", dir / "s"}) == 0);
  const std::vector<std::string> base{"fit-stage1", "--covariates", dir / "s/covariates.csv", "--burn-in", "5",
                                      "--samples", "5", "--thin", "1", "--stage1b-burn-in", "5",
                                      "--stage1b-samples", "5"};
  auto first = base;
  first.insert(first.end(), {"--out", dir / "a"});
  REQUIRE(run(first) == 0);
  auto again = base;
  again.insert(again.end(), {"--resume", dir / "a/checkpoint.json", "--out", dir / "b"});
  CHECK(run(again) == 0);
  auto changed = base;
  changed.insert(changed.end(), {"--alpha1", "3", "--resume", dir / "a/checkpoint.json", "--out", dir / "c"});
  CHECK(run(changed) == cli::kArtifactMismatch);
}
