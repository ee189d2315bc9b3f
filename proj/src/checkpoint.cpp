#include "variscan/checkpoint.hpp"

#include <fstream>

#include "variscan/errors.hpp"
#include "variscan/io.hpp"

namespace variscan::checkpoint {

Json to_json(const RandomSource& rng) {
  const Philox4x32& e = rng.engine();
  return {{"seed", e.seed()}, {"stream", e.stream()}, {"counter", e.counter()}, {"lane", e.lane()}};
}

RandomSource random_from_json(const Json& j) {
  RandomSource rng(j.at("seed").get<std::uint64_t>(), j.at("stream").get<std::uint64_t>());
  rng.engine().restore(j.at("counter").get<std::uint64_t>(), j.at("lane").get<int>());
  return rng;
}

Json to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw DataValidationError("checkpoint: matrix size mismatch");
  return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

Json to_json(const Eigen::MatrixXi& m) {
  std::vector<int> data(m.data(), m.data() + m.size());
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXi int_matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<int>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw DataValidationError("checkpoint: matrix size mismatch");
  return Eigen::Map<const Eigen::MatrixXi>(data.data(), rows, cols);
}

static Json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

static Eigen::VectorXd vec_from(const Json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

Json to_json(const Stage1State& s) {
  const Stage1Hyper& h = s.hyper;
  return {
      {"labels", s.partition.labels()},
      {"atoms", s.latent.atoms},
      {"atom_counts", s.latent.atom_counts},
      {"cell_atom", to_json(s.latent.cell_atom)},
      {"z", to_json(s.indicators.z)},
      {"tau2", s.tau2},
      {"tau1_2", s.tau1_2},
      {"xi", s.xi},
      {"mass", s.pdp.mass},
      {"discount", s.pdp.discount},
      {"alpha2", s.alpha2},
      {"hyper",
       {{"base_mean", h.base_mean},
        {"base_variance", h.base_variance},
        {"tau2_shape", h.tau2_shape},
        {"tau2_scale", h.tau2_scale},
        {"tau1_2_shape", h.tau1_2_shape},
        {"tau1_2_scale", h.tau1_2_scale},
        {"iota1", h.iota1},
        {"iota0", h.iota0},
        {"tau_floor", h.tau_floor}}},
  };
}

Stage1State stage1_state_from_json(const Json& j) {
  Stage1State s;
  const auto labels = j.at("labels").get<std::vector<int>>();
  s.partition = Partition::from_labels(labels);
  s.latent.atoms = j.at("atoms").get<std::vector<double>>();
  s.latent.atom_counts = j.at("atom_counts").get<std::vector<int>>();
  s.latent.cell_atom = int_matrix_from_json(j.at("cell_atom"));
  s.indicators.z = int_matrix_from_json(j.at("z"));
  s.tau2 = j.at("tau2").get<double>();
  s.tau1_2 = j.at("tau1_2").get<double>();
  s.xi = j.at("xi").get<double>();
  s.pdp.mass = j.at("mass").get<double>();
  s.pdp.discount = j.at("discount").get<double>();
  s.alpha2 = j.at("alpha2").get<double>();
  const Json& h = j.at("hyper");
  s.hyper.base_mean = h.at("base_mean").get<double>();
  s.hyper.base_variance = h.at("base_variance").get<double>();
  s.hyper.tau2_shape = h.at("tau2_shape").get<double>();
  s.hyper.tau2_scale = h.at("tau2_scale").get<double>();
  s.hyper.tau1_2_shape = h.at("tau1_2_shape").get<double>();
  s.hyper.tau1_2_scale = h.at("tau1_2_scale").get<double>();
  s.hyper.iota1 = h.at("iota1").get<double>();
  s.hyper.iota0 = h.at("iota0").get<double>();
  s.hyper.tau_floor = h.at("tau_floor").get<double>();
  s.validate(s.latent.cell_atom.rows(), labels.size());
  return s;
}

Json to_json(const Stage2State& s) {
  return {
      {"mode", s.reps.mode == RepresentativeMode::member ? "member" : "latent"},
      {"representatives", s.reps.indices},
      {"vectors", to_json(s.reps.vectors)},
      {"knots", s.knots},
      {"gamma", s.gamma},
      {"omega", s.omega},
      {"beta", vec(s.beta)},
      {"sigma2", s.sigma2},
      {"y", vec(s.y)},
      {"scale", vec(s.scale)},
  };
}

Stage2State stage2_state_from_json(const Json& j) {
  Stage2State s;
  s.reps.mode = j.at("mode").get<std::string>() == "member" ? RepresentativeMode::member
                                                             : RepresentativeMode::latent;
  s.reps.indices = j.at("representatives").get<std::vector<int>>();
  s.reps.vectors = matrix_from_json(j.at("vectors"));
  s.knots = j.at("knots").get<std::vector<std::vector<double>>>();
  s.gamma = j.at("gamma").get<std::vector<int>>();
  s.omega = j.at("omega").get<std::array<double, 3>>();
  s.beta = vec_from(j.at("beta"));
  s.sigma2 = j.at("sigma2").get<double>();
  s.y = vec_from(j.at("y"));
  s.scale = vec_from(j.at("scale"));
  return s;
}

Json to_json(const Stage2Sample& s) {
  return {{"gamma", s.gamma},   {"representatives", s.representatives},
          {"knots", s.knots},   {"beta", vec(s.beta)},
          {"omega", s.omega},   {"sigma2", s.sigma2}};
}

Stage2Sample stage2_sample_from_json(const Json& j) {
  Stage2Sample s;
  s.gamma = j.at("gamma").get<std::vector<int>>();
  s.representatives = j.at("representatives").get<std::vector<int>>();
  s.knots = j.at("knots").get<std::vector<std::vector<double>>>();
  s.beta = vec_from(j.at("beta"));
  s.omega = j.at("omega").get<std::array<double, 3>>();
  s.sigma2 = j.at("sigma2").get<double>();
  return s;
}

Json to_json(const Standardization& s) { return {{"mean", vec(s.mean)}, {"sd", vec(s.sd)}}; }

Standardization standardization_from_json(const Json& j) {
  Standardization s;
  s.mean = vec_from(j.at("mean"));
  s.sd = vec_from(j.at("sd"));
  return s;
}

void save(const std::filesystem::path& path, const Json& j) { io::write_text(path, j.dump(1) + "\n"); }

Json load(const std::filesystem::path& path) {
  try {
    return Json::parse(io::read_text(path));
  } catch (const Json::exception& e) {
    throw DataValidationError(path.string() + ": " + e.what());
  }
}

void save_stage1(const std::filesystem::path& path, const Checkpoint<Stage1State>& c) {
  save(path, {{"format", "variscan-checkpoint"},
              {"version", kFormatVersion},
              {"kind", c.kind},
              {"config_hash", c.config_hash},
              {"rng", to_json(c.rng)},
              {"state", to_json(c.state)},
              {"extra", c.extra}});
}

template <class State, class Decode>
static Checkpoint<State> load_checkpoint(const std::filesystem::path& path, const std::string& kind, Decode decode) {
  const Json j = load(path);
  try {
    if (j.value("format", "") != "variscan-checkpoint" || j.value("version", 0) != kFormatVersion) {
      throw ArtifactMismatchError(path.string() + ": unsupported checkpoint format");
    }
    if (j.at("kind") != kind) throw ArtifactMismatchError(path.string() + ": not a " + kind + " checkpoint");
    return {kind, j.at("config_hash").get<std::string>(), decode(j.at("state")),
            random_from_json(j.at("rng")), j.value("extra", Json::object())};
  } catch (const Json::exception& e) {
    throw DataValidationError(path.string() + ": " + e.what());
  }
}

Checkpoint<Stage1State> load_stage1(const std::filesystem::path& path) {
  return load_checkpoint<Stage1State>(path, "stage1", stage1_state_from_json);
}

void save_stage2(const std::filesystem::path& path, const Checkpoint<Stage2State>& c) {
  save(path, {{"format", "variscan-checkpoint"},
              {"version", kFormatVersion},
              {"kind", c.kind},
              {"config_hash", c.config_hash},
              {"rng", to_json(c.rng)},
              {"state", to_json(c.state)},
              {"extra", c.extra}});
}

Checkpoint<Stage2State> load_stage2(const std::filesystem::path& path) {
  return load_checkpoint<Stage2State>(path, "stage2", stage2_state_from_json);
}

void require_hash(const std::string& what, const std::string& found, const std::string& expected_hash) {
  if (found != expected_hash) {
    throw ArtifactMismatchError(what + " was produced under config hash " + found + ", expected " + expected_hash);
  }
}

}  // namespace variscan::checkpoint
