#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "variscan/covariates.hpp"
#include "variscan/random.hpp"
#include "variscan/regression.hpp"
#include "variscan/stage1.hpp"

namespace variscan::checkpoint {

using Json = nlohmann::json;

constexpr int kFormatVersion = 1;

Json to_json(const RandomSource& rng);
RandomSource random_from_json(const Json& j);

Json to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);
Json to_json(const Eigen::MatrixXi& m);
Eigen::MatrixXi int_matrix_from_json(const Json& j);

Json to_json(const Stage1State& s);
Stage1State stage1_state_from_json(const Json& j);

Json to_json(const Stage2State& s);
Stage2State stage2_state_from_json(const Json& j);

Json to_json(const Stage2Sample& s);
Stage2Sample stage2_sample_from_json(const Json& j);

Json to_json(const Standardization& s);
Standardization standardization_from_json(const Json& j);

/// Sampler state plus the generator position and the config hash it was produced under.
/// Doubles are written with shortest round-trip formatting, so restore is exact.
template <class State>
struct Checkpoint {
  std::string kind;
  std::string config_hash;
  State state;
  RandomSource rng;
  Json extra = Json::object();  // caller-defined payload, e.g. imputed covariates
};

void save(const std::filesystem::path& path, const Json& j);
Json load(const std::filesystem::path& path);

void save_stage1(const std::filesystem::path& path, const Checkpoint<Stage1State>& c);
Checkpoint<Stage1State> load_stage1(const std::filesystem::path& path);
void save_stage2(const std::filesystem::path& path, const Checkpoint<Stage2State>& c);
Checkpoint<Stage2State> load_stage2(const std::filesystem::path& path);

// Throws ArtifactMismatchError unless the checkpoint was written under `expected_hash`.
void require_hash(const std::string& what, const std::string& found, const std::string& expected_hash);

}  // namespace variscan::checkpoint
