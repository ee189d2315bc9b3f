#include "variscan/stage1.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "variscan/errors.hpp"
#include "variscan/kernels.hpp"
#include "variscan/sampling.hpp"

namespace variscan {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct CellStats {
  Eigen::MatrixXd sum;     // n x q, sum over member columns of x_ij
  Eigen::MatrixXd sum_sq;  // n x q
};

CellStats cell_stats(const Partition& partition, const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  const auto q = static_cast<Eigen::Index>(partition.num_clusters());
  CellStats s{Eigen::MatrixXd::Zero(n, q), Eigen::MatrixXd::Zero(n, q)};
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const int k = partition.label(j);
    s.sum.col(k) += x.col(j);
    s.sum_sq.col(k) += x.col(j).cwiseAbs2();
  }
  return s;
}

inline double log_add_exp(double a, double b) {
  const double top = std::max(a, b);
  return top + std::log(std::exp(a - top) + std::exp(b - top));
}

double sigmoid(double t) {
  return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

double observed_mean(const CovariateMatrix& x) {
  double sum = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (x.missing(i, j)) continue;
      sum += x.values(i, j);
      ++count;
    }
  }
  return count > 0 ? sum / count : 0.0;
}

double observed_variance(const CovariateMatrix& x, double mean) {
  double ss = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (x.missing(i, j)) continue;
      ss += (x.values(i, j) - mean) * (x.values(i, j) - mean);
      ++count;
    }
  }
  return count > 1 ? ss / (count - 1) : 0.0;
}

double log_inverse_gamma(double v, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(v) - scale / v;
}

// Cell log-likelihood pieces given the per-cell residual sum of squares.
inline double cell_log_lik(double rss, int members, double var) {
  return -0.5 * members * (std::log(var) + 2.0 * kLogSqrt2Pi) - 0.5 * rss / var;
}

}  // namespace

void Stage1Config::validate() const {
  auto fail = [](const std::string& what) { throw DomainError("Stage1Config: " + what); };
  if (!(alpha1 > 0.0) || !(alpha2 > 0.0)) fail("mass parameters must be positive");
  if (!(iota1 > 0.0) || !(iota0 > 0.0)) fail("iota parameters must be positive");
  if (!(tau_floor > 0.0)) fail("tau floor must be positive");
  if (aux_components < 1) fail("need at least one auxiliary component");
  if (!(ig_shape > 0.0) || !(ig_scale_factor > 0.0)) fail("inverse-gamma prior must be proper");
  if (base_variance && !(*base_variance > 0.0)) fail("base variance must be positive");
  if (!(initial_discount >= 0.0 && initial_discount < 1.0)) fail("initial discount outside [0,1)");
  if (discount_moves < 1) fail("discount_moves must be positive");
  if (burn_in < 0 || thin < 1 || samples < 0) fail("bad iteration counts");
  if (stage1b_burn_in < 0 || stage1b_samples < 1) fail("bad stage 1b iteration counts");
}

Eigen::MatrixXd LatentTable::values() const {
  Eigen::MatrixXd out(cell_atom.rows(), cell_atom.cols());
  for (Eigen::Index k = 0; k < cell_atom.cols(); ++k) {
    for (Eigen::Index i = 0; i < cell_atom.rows(); ++i) out(i, k) = atoms[cell_atom(i, k)];
  }
  return out;
}

void LatentTable::prune() {
  std::vector<int> remap(atoms.size(), -1);
  std::vector<double> kept_atoms;
  std::vector<int> kept_counts;
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    if (atom_counts[a] > 0) {
      remap[a] = static_cast<int>(kept_atoms.size());
      kept_atoms.push_back(atoms[a]);
      kept_counts.push_back(atom_counts[a]);
    }
  }
  for (Eigen::Index k = 0; k < cell_atom.cols(); ++k) {
    for (Eigen::Index i = 0; i < cell_atom.rows(); ++i) cell_atom(i, k) = remap[cell_atom(i, k)];
  }
  atoms = std::move(kept_atoms);
  atom_counts = std::move(kept_counts);
}

void LatentTable::validate() const {
  if (atoms.size() != atom_counts.size()) throw InvalidStateError("LatentTable: count size mismatch");
  std::vector<int> tally(atoms.size(), 0);
  for (Eigen::Index k = 0; k < cell_atom.cols(); ++k) {
    for (Eigen::Index i = 0; i < cell_atom.rows(); ++i) {
      const int a = cell_atom(i, k);
      if (a < 0 || static_cast<std::size_t>(a) >= atoms.size()) {
        throw InvalidStateError("LatentTable: cell points at a missing atom");
      }
      ++tally[a];
    }
  }
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    if (tally[a] != atom_counts[a]) throw InvalidStateError("LatentTable: stale atom counts");
    if (tally[a] == 0) throw InvalidStateError("LatentTable: unused atom not pruned");
    if (!std::isfinite(atoms[a])) throw InvalidStateError("LatentTable: non-finite atom");
  }
}

void Stage1State::validate(Eigen::Index n, Eigen::Index p) const {
  const auto q = static_cast<Eigen::Index>(partition.num_clusters());
  if (static_cast<Eigen::Index>(partition.size()) != p) throw InvalidStateError("Stage1State: partition size");
  if (latent.cell_atom.rows() != n || latent.cell_atom.cols() != q) {
    throw InvalidStateError("Stage1State: latent table shape");
  }
  if (indicators.z.rows() != n || indicators.z.cols() != q) {
    throw InvalidStateError("Stage1State: indicator table shape");
  }
  if ((indicators.z.array() < 0).any() || (indicators.z.array() > 1).any()) {
    throw InvalidStateError("Stage1State: indicator outside {0,1}");
  }
  latent.validate();
  const double floor2 = hyper.tau_floor * hyper.tau_floor;
  if (!(tau2 >= floor2) || !(tau1_2 > tau2)) throw InvalidStateError("Stage1State: variance ordering");
  if (!(xi > 0.0 && xi < 1.0)) throw InvalidStateError("Stage1State: xi outside (0,1)");
  pdp.validate();
}

Partition seed_partition(const Eigen::MatrixXd& x, const Stage1Config& config, RandomSource& rng,
                         int sweeps) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const double mean = x.mean();
  const double total = (x.array() - mean).square().mean();
  const double floor2 = config.tau_floor * config.tau_floor;

  // Noise scale from nearest-neighbour column distances.
  const Eigen::VectorXd norms = x.colwise().squaredNorm().transpose();
  const Eigen::MatrixXd gram = x.transpose() * x;
  std::vector<double> nearest(p, std::numeric_limits<double>::infinity());
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = 0; k < p; ++k) {
      if (k != j) nearest[j] = std::min(nearest[j], std::max(0.0, (norms(j) + norms(k) - 2.0 * gram(j, k)) / n));
    }
  }
  std::nth_element(nearest.begin(), nearest.begin() + p / 2, nearest.end());
  double tau2 = std::max(0.5 * nearest[p / 2], floor2);

  const PdpParams pdp{config.alpha1, config.initial_discount};
  std::vector<int> labels(p);
  std::iota(labels.begin(), labels.end(), 0);
  std::vector<Eigen::VectorXd> sums;
  std::vector<int> counts;
  for (Eigen::Index j = 0; j < p; ++j) {
    sums.emplace_back(x.col(j));
    counts.push_back(1);
  }
  std::vector<Partition> kept;
  std::vector<double> log_w;
  std::vector<int> options;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    const double spread = std::max(total - tau2, 0.05 * total);
    for (Eigen::Index j = 0; j < p; ++j) {
      const int k0 = labels[j];
      sums[k0] -= x.col(j);
      --counts[k0];
      log_w.clear();
      options.clear();
      int live = 0;
      for (std::size_t k = 0; k < sums.size(); ++k) {
        if (counts[k] == 0) continue;
        ++live;
        const double prec = 1.0 / spread + counts[k] / tau2;
        const double var = 1.0 / prec + tau2;
        const double rss =
            (x.col(j).array() - (mean / spread + sums[k].array() / tau2) / prec).square().sum();
        log_w.push_back(std::log(counts[k] - pdp.discount) - 0.5 * n * std::log(var) - 0.5 * rss / var);
        options.push_back(static_cast<int>(k));
      }
      const double var = spread + tau2;
      const double rss = (x.col(j).array() - mean).square().sum();
      log_w.push_back(std::log(pdp.mass + live * pdp.discount) - 0.5 * n * std::log(var) - 0.5 * rss / var);
      options.push_back(-1);
      int chosen = options[sample_categorical(log_w, rng)];
      if (chosen < 0) {
        if (counts[k0] == 0) {
          chosen = k0;
        } else {
          sums.emplace_back(Eigen::VectorXd::Zero(n));
          counts.push_back(0);
          chosen = static_cast<int>(sums.size() - 1);
        }
      }
      labels[j] = chosen;
      sums[chosen] += x.col(j);
      ++counts[chosen];
    }
    double rss = 0.0;
    int live = 0;
    for (int c : counts) live += c > 0 ? 1 : 0;
    for (Eigen::Index j = 0; j < p; ++j) rss += (x.col(j) - sums[labels[j]] / counts[labels[j]]).squaredNorm();
    if (p > live) tau2 = std::max(rss / (static_cast<double>(n) * (p - live)), floor2);
    if (2 * sweep >= sweeps) kept.push_back(Partition::from_labels(labels));
  }
  if (kept.empty()) return Partition::from_labels(labels);
  return least_squares_allocation(kept, accumulate_cocluster(kept)).partition;
}

Stage1State init_state_with_partition(const CovariateMatrix& x, const Partition& partition,
                                      const Stage1Config& config) {
  config.validate();
  x.validate();
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (static_cast<Eigen::Index>(partition.size()) != p) {
    throw DataValidationError("initial partition does not cover the covariates");
  }
  const double mean = observed_mean(x);
  const double variance = observed_variance(x, mean);
  if (!(variance > 0.0)) throw DataValidationError("degenerate input: covariates have zero variance");

  Stage1State state;
  state.partition = partition;
  const auto q = static_cast<Eigen::Index>(partition.num_clusters());
  const CellStats stats = cell_stats(partition, x.values);
  Eigen::MatrixXd cell_mean(n, q);
  for (Eigen::Index k = 0; k < q; ++k) cell_mean.col(k) = stats.sum.col(k) / partition.sizes()[k];

  // Quantize the cell means into roughly the expected number of DP atoms.
  const Eigen::Index cells = n * q;
  const double expected_atoms = config.alpha2 * std::log1p(cells / config.alpha2);
  const auto num_atoms = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::ceil(expected_atoms)), 1, cells);
  std::vector<Eigen::Index> order(cells);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return cell_mean.data()[a] < cell_mean.data()[b];
  });
  state.latent.cell_atom.resize(n, q);
  state.latent.atoms.assign(num_atoms, 0.0);
  state.latent.atom_counts.assign(num_atoms, 0);
  for (Eigen::Index r = 0; r < cells; ++r) {
    const auto a = static_cast<int>(r * num_atoms / cells);
    state.latent.cell_atom.data()[order[r]] = a;
    state.latent.atoms[a] += cell_mean.data()[order[r]];
    ++state.latent.atom_counts[a];
  }
  for (Eigen::Index a = 0; a < num_atoms; ++a) state.latent.atoms[a] /= state.latent.atom_counts[a];
  state.latent.prune();

  state.indicators.z = Eigen::MatrixXi::Ones(n, q);

  double within = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    within += (x.values.col(j) - cell_mean.col(partition.label(j))).squaredNorm();
  }
  within /= static_cast<double>(n * p);
  const double floor2 = config.tau_floor * config.tau_floor;
  state.tau2 = std::max(within, floor2);
  state.tau1_2 = std::max(variance, 4.0 * state.tau2);

  Stage1Hyper& h = state.hyper;
  h.base_mean = config.base_mean.value_or(mean);
  h.base_variance = config.base_variance.value_or(variance);
  h.tau2_shape = config.ig_shape;
  h.tau2_scale = config.ig_scale_factor * config.tau2_prior_mean.value_or(state.tau2);
  h.tau1_2_shape = config.ig_shape;
  h.tau1_2_scale = config.ig_scale_factor * config.tau1_2_prior_mean.value_or(state.tau1_2);
  h.iota1 = config.iota1;
  h.iota0 = config.iota0;
  h.tau_floor = config.tau_floor;

  state.xi = config.iota1 / (config.iota1 + config.iota0);
  state.pdp = {config.alpha1, config.initial_discount};
  state.alpha2 = config.alpha2;
  return state;
}

Stage1State init_state(const CovariateMatrix& x, const Stage1Config& config, RandomSource& rng) {
  config.validate();
  x.validate();
  const double variance = observed_variance(x, observed_mean(x));
  if (!(variance > 0.0)) throw DataValidationError("degenerate input: covariates have zero variance");
  return init_state_with_partition(x, seed_partition(x.values, config, rng), config);
}

// Gibbs update of each c_j with auxiliary latent vectors for new clusters. Fresh
// auxiliary vectors are drawn cell by cell from the nested-DP urn given all other
// cells; the indicators of a prospective new cluster are summed out and redrawn
// once it is chosen.
void update_allocations(Stage1State& state, const Eigen::MatrixXd& x, int aux_components,
                        RandomSource& rng) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const std::size_t nn = static_cast<std::size_t>(n);
  const int m_aux = aux_components;
  const auto& kern = kernels::active();

  std::vector<int> labels = state.partition.labels();
  std::vector<int> sizes = state.partition.sizes();
  auto q = static_cast<std::size_t>(sizes.size());
  std::vector<double>& atoms = state.latent.atoms;
  std::vector<int>& counts = state.latent.atom_counts;

  const double prec1 = 1.0 / state.tau2;
  const double prec0 = 1.0 / state.tau1_2;
  const double half_log_prec1 = 0.5 * std::log(prec1);
  const double half_log_prec0 = 0.5 * std::log(prec0);
  const double log_xi = std::log(state.xi);
  const double log_1m_xi = std::log1p(-state.xi);
  const double d = state.pdp.discount;
  const double mass = state.pdp.mass;
  const double alpha2 = state.alpha2;
  const double base_sd = std::sqrt(state.hyper.base_variance);

  // Column-major working copies with leading dimension n.
  std::vector<int> cell(state.latent.cell_atom.data(), state.latent.cell_atom.data() + nn * q);
  std::vector<int> z(state.indicators.z.data(), state.indicators.z.data() + nn * q);
  std::vector<double> v(nn * q), w(nn * q), half_log_det(q);
  auto refresh_column = [&](std::size_t k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < nn; ++i) {
      v[k * nn + i] = atoms[cell[k * nn + i]];
      const bool follows = z[k * nn + i] == 1;
      w[k * nn + i] = follows ? prec1 : prec0;
      acc += follows ? half_log_prec1 : half_log_prec0;
    }
    half_log_det[k] = acc;
  };
  for (std::size_t k = 0; k < q; ++k) refresh_column(k);

  auto draw_indicators = [&](std::size_t k, const double* xj) {
    for (std::size_t i = 0; i < nn; ++i) {
      const double diff = xj[i] - v[k * nn + i];
      const double lp1 = log_xi + half_log_prec1 - 0.5 * prec1 * diff * diff;
      const double lp0 = log_1m_xi + half_log_prec0 - 0.5 * prec0 * diff * diff;
      z[k * nn + i] = rng.uniform() < sigmoid(lp1 - lp0) ? 1 : 0;
    }
  };

  auto delete_cluster = [&](std::size_t k0) {
    const std::size_t last = q - 1;
    if (k0 != last) {
      std::copy_n(cell.begin() + last * nn, nn, cell.begin() + k0 * nn);
      std::copy_n(z.begin() + last * nn, nn, z.begin() + k0 * nn);
      std::copy_n(v.begin() + last * nn, nn, v.begin() + k0 * nn);
      std::copy_n(w.begin() + last * nn, nn, w.begin() + k0 * nn);
      half_log_det[k0] = half_log_det[last];
      sizes[k0] = sizes[last];
      for (int& lab : labels) {
        if (lab == static_cast<int>(last)) lab = static_cast<int>(k0);
      }
    }
    --q;
    cell.resize(q * nn);
    z.resize(q * nn);
    v.resize(q * nn);
    w.resize(q * nn);
    half_log_det.resize(q);
    sizes.resize(q);
  };

  std::vector<double> dist;
  std::vector<double> log_w;
  // Auxiliary cells: value >= 0 is a global atom, value < 0 encodes local fresh atom -(idx+1).
  std::vector<int> aux_cell(static_cast<std::size_t>(m_aux) * nn);
  std::vector<double> aux_value(static_cast<std::size_t>(m_aux) * nn);
  std::vector<std::vector<double>> aux_fresh(m_aux);

  for (Eigen::Index j = 0; j < p; ++j) {
    const double* xj = x.col(j).data();
    const auto k0 = static_cast<std::size_t>(labels[j]);
    --sizes[k0];
    const bool singleton = sizes[k0] == 0;
    if (singleton) {
      for (std::size_t i = 0; i < nn; ++i) --counts[cell[k0 * nn + i]];
    }
    const std::size_t q_rest = q - (singleton ? 1 : 0);
    const std::size_t other_cells = nn * q_rest;

    dist.resize(q);
    kern.weighted_sq_distance_batch(xj, v.data(), w.data(), nn, nn, q, dist.data());
    log_w.assign(q + m_aux, kNegInf);
    for (std::size_t k = 0; k < q; ++k) {
      if (singleton && k == k0) continue;
      log_w[k] = std::log(sizes[k] - d) + half_log_det[k] - 0.5 * dist[k];
    }

    const double log_new = std::log((mass + static_cast<double>(q_rest) * d) / m_aux);
    for (int m = 0; m < m_aux; ++m) {
      int* acell = aux_cell.data() + m * nn;
      double* aval = aux_value.data() + m * nn;
      aux_fresh[m].clear();
      if (singleton && m == 0) {
        for (std::size_t i = 0; i < nn; ++i) {
          acell[i] = cell[k0 * nn + i];
          aval[i] = atoms[acell[i]];
        }
      } else {
        for (std::size_t i = 0; i < nn; ++i) {
          const double u = rng.uniform() * (static_cast<double>(other_cells + i) + alpha2);
          if (u < alpha2) {
            aux_fresh[m].push_back(state.hyper.base_mean + base_sd * rng.normal());
            acell[i] = -static_cast<int>(aux_fresh[m].size());
            aval[i] = aux_fresh[m].back();
            continue;
          }
          const auto r = std::min(static_cast<std::size_t>(u - alpha2), other_cells + i - 1);
          if (r < other_cells) {
            std::size_t kk = r / nn;
            const std::size_t ii = r % nn;
            if (singleton && kk >= k0) ++kk;
            acell[i] = cell[kk * nn + ii];
            aval[i] = atoms[acell[i]];
          } else {
            acell[i] = acell[r - other_cells];
            aval[i] = aval[r - other_cells];
          }
        }
      }
      double ll = 0.0;
      for (std::size_t i = 0; i < nn; ++i) {
        const double diff = xj[i] - aval[i];
        const double sq = diff * diff;
        ll += log_add_exp(log_xi + half_log_prec1 - 0.5 * prec1 * sq,
                          log_1m_xi + half_log_prec0 - 0.5 * prec0 * sq);
      }
      log_w[q + m] = log_new + ll;
    }

    const std::size_t choice = sample_categorical(log_w, rng);
    if (choice < q) {
      labels[j] = static_cast<int>(choice);
      ++sizes[choice];
      if (singleton) delete_cluster(k0);
      continue;
    }
    const auto m = static_cast<int>(choice - q);
    std::size_t slot;
    if (singleton) {
      slot = k0;
    } else {
      slot = q++;
      cell.resize(q * nn);
      z.resize(q * nn);
      v.resize(q * nn);
      w.resize(q * nn);
      half_log_det.resize(q);
      sizes.resize(q);
    }
    const int* acell = aux_cell.data() + m * nn;
    std::vector<int> fresh_global(aux_fresh[m].size());
    for (std::size_t f = 0; f < aux_fresh[m].size(); ++f) {
      fresh_global[f] = static_cast<int>(atoms.size());
      atoms.push_back(aux_fresh[m][f]);
      counts.push_back(0);
    }
    for (std::size_t i = 0; i < nn; ++i) {
      const int a = acell[i] >= 0 ? acell[i] : fresh_global[-acell[i] - 1];
      cell[slot * nn + i] = a;
      ++counts[a];
      v[slot * nn + i] = atoms[a];
    }
    sizes[slot] = 1;
    labels[j] = static_cast<int>(slot);
    draw_indicators(slot, xj);
    refresh_column(slot);
  }

  // Canonical relabelling: clusters ordered by first appearance.
  Partition canonical = Partition::from_labels(labels);
  std::vector<std::size_t> old_of_new(q);
  for (Eigen::Index j = 0; j < p; ++j) old_of_new[canonical.label(j)] = static_cast<std::size_t>(labels[j]);
  Eigen::MatrixXi new_cells(n, static_cast<Eigen::Index>(q));
  Eigen::MatrixXi new_z(n, static_cast<Eigen::Index>(q));
  for (std::size_t k = 0; k < q; ++k) {
    const std::size_t src = old_of_new[k];
    for (std::size_t i = 0; i < nn; ++i) {
      new_cells(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = cell[src * nn + i];
      new_z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = z[src * nn + i];
    }
  }
  state.partition = std::move(canonical);
  state.latent.cell_atom = std::move(new_cells);
  state.indicators.z = std::move(new_z);
  state.latent.prune();
}

void update_latent_elements(Stage1State& state, const Eigen::MatrixXd& x, RandomSource& rng) {
  const Eigen::Index n = x.rows();
  const auto q = static_cast<Eigen::Index>(state.num_clusters());
  const CellStats stats = cell_stats(state.partition, x);
  const auto& sizes = state.partition.sizes();
  auto& atoms = state.latent.atoms;
  auto& counts = state.latent.atom_counts;
  auto& cells = state.latent.cell_atom;

  const double mu2 = state.hyper.base_mean;
  const double var2 = state.hyper.base_variance;
  const double log_alpha2 = std::log(state.alpha2);
  const double total_cells = static_cast<double>(n * q);
  std::vector<double> log_int(static_cast<std::size_t>(total_cells) + 2, kNegInf);
  for (std::size_t c = 1; c < log_int.size(); ++c) log_int[c] = std::log(static_cast<double>(c));

  std::vector<double> log_w;
  std::vector<std::size_t> free_slots;
  for (Eigen::Index k = 0; k < q; ++k) {
    const int members = sizes[k];
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a0 = cells(i, k);
      if (--counts[a0] == 0) free_slots.push_back(static_cast<std::size_t>(a0));
      const double prec = state.indicators.z(i, k) == 1 ? 1.0 / state.tau2 : 1.0 / state.tau1_2;
      const double s1 = stats.sum(i, k);
      const double data_prec = members * prec;

      const std::size_t num_atoms = atoms.size();
      log_w.resize(num_atoms + 1);
      for (std::size_t a = 0; a < num_atoms; ++a) {
        const double phi = atoms[a];
        log_w[a] = counts[a] > 0 ? log_int[counts[a]] + prec * phi * s1 - 0.5 * data_prec * phi * phi
                                 : kNegInf;
      }
      const double post_prec = 1.0 / var2 + data_prec;
      const double post_mean = (mu2 / var2 + s1 * prec) / post_prec;
      log_w[num_atoms] = log_alpha2 - 0.5 * std::log(var2 * post_prec) - 0.5 * mu2 * mu2 / var2 +
                         0.5 * post_prec * post_mean * post_mean;

      const std::size_t choice = sample_categorical(log_w, rng);
      std::size_t target = choice;
      if (choice == num_atoms) {
        const double phi = post_mean + rng.normal() / std::sqrt(post_prec);
        if (!free_slots.empty()) {
          target = free_slots.back();
          free_slots.pop_back();
          atoms[target] = phi;
        } else {
          atoms.push_back(phi);
          counts.push_back(0);
        }
      } else if (counts[choice] == 0) {
        throw InvalidStateError("update_latent_elements: selected an empty atom");
      }
      ++counts[target];
      cells(i, k) = static_cast<int>(target);
      // A recycled slot may have been re-populated; keep the free list honest.
      if (counts[target] == 1) {
        free_slots.erase(std::remove(free_slots.begin(), free_slots.end(), target), free_slots.end());
      }
    }
  }
  state.latent.prune();

  // Atom values given their member cells.
  const std::size_t num_atoms = atoms.size();
  std::vector<double> prec_sum(num_atoms, 1.0 / var2);
  std::vector<double> lin_sum(num_atoms, mu2 / var2);
  for (Eigen::Index k = 0; k < q; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double prec = state.indicators.z(i, k) == 1 ? 1.0 / state.tau2 : 1.0 / state.tau1_2;
      const int a = cells(i, k);
      prec_sum[a] += sizes[k] * prec;
      lin_sum[a] += stats.sum(i, k) * prec;
    }
  }
  for (std::size_t a = 0; a < num_atoms; ++a) {
    atoms[a] = lin_sum[a] / prec_sum[a] + rng.normal() / std::sqrt(prec_sum[a]);
  }
}

void update_indicators(Stage1State& state, const Eigen::MatrixXd& x, RandomSource& rng) {
  const Eigen::Index n = x.rows();
  const auto q = static_cast<Eigen::Index>(state.num_clusters());
  const CellStats stats = cell_stats(state.partition, x);
  const auto& sizes = state.partition.sizes();
  const double log_odds_prior = std::log(state.xi) - std::log1p(-state.xi);
  std::size_t ones = 0;
  for (Eigen::Index k = 0; k < q; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = state.latent.value(i, k);
      const double rss = stats.sum_sq(i, k) - 2.0 * v * stats.sum(i, k) + sizes[k] * v * v;
      const double lp1 = cell_log_lik(rss, sizes[k], state.tau2);
      const double lp0 = cell_log_lik(rss, sizes[k], state.tau1_2);
      const int zik = rng.uniform() < sigmoid(log_odds_prior + lp1 - lp0) ? 1 : 0;
      state.indicators.z(i, k) = zik;
      ones += static_cast<std::size_t>(zik);
    }
  }
  const auto zeros = static_cast<std::size_t>(n * q) - ones;
  state.xi = rng.beta(state.hyper.iota1 + ones, state.hyper.iota0 + zeros);
  // Guard against a draw that rounds onto the boundary.
  state.xi = std::clamp(state.xi, 1e-300, 1.0 - 1e-16);
}

void update_variances(Stage1State& state, const Eigen::MatrixXd& x, RandomSource& rng) {
  const Eigen::Index n = x.rows();
  const auto q = static_cast<Eigen::Index>(state.num_clusters());
  const CellStats stats = cell_stats(state.partition, x);
  const auto& sizes = state.partition.sizes();
  double rss1 = 0.0, rss0 = 0.0;
  double m1 = 0.0, m0 = 0.0;
  for (Eigen::Index k = 0; k < q; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = state.latent.value(i, k);
      const double rss =
          std::max(0.0, stats.sum_sq(i, k) - 2.0 * v * stats.sum(i, k) + sizes[k] * v * v);
      if (state.indicators.z(i, k) == 1) {
        rss1 += rss;
        m1 += sizes[k];
      } else {
        rss0 += rss;
        m0 += sizes[k];
      }
    }
  }
  const Stage1Hyper& h = state.hyper;
  const double floor2 = h.tau_floor * h.tau_floor;
  state.tau2 = sample_truncated_inverse_gamma(h.tau2_shape + 0.5 * m1, h.tau2_scale + 0.5 * rss1,
                                              floor2, state.tau1_2, rng);
  state.tau2 = std::max(state.tau2, floor2);
  state.tau1_2 = sample_truncated_inverse_gamma(h.tau1_2_shape + 0.5 * m0,
                                                h.tau1_2_scale + 0.5 * rss0,
                                                std::max(state.tau2, floor2),
                                                std::numeric_limits<double>::infinity(), rng);
  if (!(state.tau1_2 > state.tau2)) state.tau1_2 = std::nextafter(state.tau2, std::numeric_limits<double>::infinity());
}

int update_discount(Stage1State& state, int moves, RandomSource& rng) {
  const auto& sizes = state.partition.sizes();
  double current = log_eppf_sizes(sizes, state.pdp);
  int accepted = 0;
  for (int t = 0; t < moves; ++t) {
    const double proposal = rng.uniform() < 0.5 ? 0.0 : rng.uniform();
    const double proposed = log_eppf_sizes(sizes, {state.pdp.mass, proposal});
    if (std::log(rng.uniform()) < proposed - current) {
      state.pdp.discount = proposal;
      current = proposed;
      ++accepted;
    }
  }
  return accepted;
}

void update_mass_parameters(Stage1State& state, const Stage1Config& config, RandomSource& rng) {
  constexpr double kStep = 0.3;
  if (config.sample_alpha1) {
    auto log_target = [&](double a) {
      return log_eppf(state.partition, {a, state.pdp.discount}) - a + std::log(a);
    };
    const double proposal = state.pdp.mass * std::exp(kStep * rng.normal());
    if (std::log(rng.uniform()) < log_target(proposal) - log_target(state.pdp.mass)) {
      state.pdp.mass = proposal;
    }
  }
  if (config.sample_alpha2) {
    const double cells = static_cast<double>(state.latent.cell_atom.size());
    const double atoms = static_cast<double>(state.latent.num_atoms());
    auto log_target = [&](double a) {
      return atoms * std::log(a) + std::lgamma(a) - std::lgamma(a + cells) - a + std::log(a);
    };
    const double proposal = state.alpha2 * std::exp(kStep * rng.normal());
    if (std::log(rng.uniform()) < log_target(proposal) - log_target(state.alpha2)) {
      state.alpha2 = proposal;
    }
  }
}

void impute_missing(const Stage1State& state, CovariateMatrix& x, RandomSource& rng) {
  if (x.missing_count() == 0) return;
  const double sd1 = std::sqrt(state.tau2);
  const double sd0 = std::sqrt(state.tau1_2);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const int k = state.partition.label(j);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (!x.missing(i, j)) continue;
      const double sd = state.indicators.z(i, k) == 1 ? sd1 : sd0;
      x.values(i, j) = state.latent.value(i, k) + sd * rng.normal();
    }
  }
}

Stage1State sample_prior_state(Eigen::Index n, std::size_t p, const Stage1Hyper& hyper, double mass,
                               double alpha2, RandomSource& rng) {
  Stage1State state;
  state.hyper = hyper;
  state.alpha2 = alpha2;
  state.pdp = {mass, rng.uniform() < 0.5 ? 0.0 : rng.uniform()};
  state.partition = sample_partition(p, state.pdp, rng);
  const auto q = static_cast<Eigen::Index>(state.partition.num_clusters());

  LatentTable& latent = state.latent;
  latent.cell_atom.resize(n, q);
  const double base_sd = std::sqrt(hyper.base_variance);
  int seated = 0;
  for (Eigen::Index k = 0; k < q; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = rng.uniform() * (seated + alpha2);
      int a;
      if (u < alpha2) {
        a = static_cast<int>(latent.atoms.size());
        latent.atoms.push_back(hyper.base_mean + base_sd * rng.normal());
        latent.atom_counts.push_back(0);
      } else {
        // Seat proportional to table size by picking a uniformly random earlier cell.
        const auto r = std::min(static_cast<Eigen::Index>(u - alpha2), static_cast<Eigen::Index>(seated - 1));
        a = latent.cell_atom.data()[r];
      }
      latent.cell_atom.data()[k * n + i] = a;
      ++latent.atom_counts[a];
      ++seated;
    }
  }

  state.xi = rng.beta(hyper.iota1, hyper.iota0);
  state.xi = std::clamp(state.xi, 1e-300, 1.0 - 1e-16);
  state.indicators.z.resize(n, q);
  for (Eigen::Index k = 0; k < q; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) state.indicators.z(i, k) = rng.uniform() < state.xi ? 1 : 0;
  }

  const double floor2 = hyper.tau_floor * hyper.tau_floor;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 1000000) throw NumericalError("sample_prior_state: variance prior rejection failed");
    const double t2 = hyper.tau2_scale / rng.gamma(hyper.tau2_shape, 1.0);
    const double t1 = hyper.tau1_2_scale / rng.gamma(hyper.tau1_2_shape, 1.0);
    if (t2 >= floor2 && t1 > t2) {
      state.tau2 = t2;
      state.tau1_2 = t1;
      break;
    }
  }
  return state;
}

Eigen::MatrixXd sample_covariates(const Stage1State& state, RandomSource& rng) {
  const Eigen::Index n = state.latent.cell_atom.rows();
  const auto p = static_cast<Eigen::Index>(state.partition.size());
  Eigen::MatrixXd x(n, p);
  const double sd1 = std::sqrt(state.tau2);
  const double sd0 = std::sqrt(state.tau1_2);
  for (Eigen::Index j = 0; j < p; ++j) {
    const int k = state.partition.label(static_cast<std::size_t>(j));
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i, j) = state.latent.value(i, k) + (state.indicators.z(i, k) == 1 ? sd1 : sd0) * rng.normal();
    }
  }
  return x;
}

double log_likelihood(const Stage1State& state, const Eigen::MatrixXd& x) {
  const CellStats stats = cell_stats(state.partition, x);
  const auto& sizes = state.partition.sizes();
  double total = 0.0;
  for (Eigen::Index k = 0; k < stats.sum.cols(); ++k) {
    for (Eigen::Index i = 0; i < stats.sum.rows(); ++i) {
      const double v = state.latent.value(i, k);
      const double rss = stats.sum_sq(i, k) - 2.0 * v * stats.sum(i, k) + sizes[k] * v * v;
      total += cell_log_lik(rss, sizes[k], state.indicators.z(i, k) == 1 ? state.tau2 : state.tau1_2);
    }
  }
  return total;
}

double log_joint(const Stage1State& state, const Eigen::MatrixXd& x) {
  const Stage1Hyper& h = state.hyper;
  double total = log_likelihood(state, x);
  total += std::log(0.5) + log_eppf(state.partition, state.pdp);
  // Chinese-restaurant probability of the cell-to-atom seating, plus atom values.
  const double cells = static_cast<double>(state.latent.cell_atom.size());
  const double atoms = static_cast<double>(state.latent.num_atoms());
  total += atoms * std::log(state.alpha2) + std::lgamma(state.alpha2) - std::lgamma(state.alpha2 + cells);
  for (std::size_t a = 0; a < state.latent.atoms.size(); ++a) {
    total += std::lgamma(static_cast<double>(state.latent.atom_counts[a]));
    const double diff = state.latent.atoms[a] - h.base_mean;
    total += -0.5 * std::log(h.base_variance) - kLogSqrt2Pi - 0.5 * diff * diff / h.base_variance;
  }
  const auto ones = static_cast<double>(state.indicators.count_ones());
  total += ones * std::log(state.xi) + (cells - ones) * std::log1p(-state.xi);
  total += std::lgamma(h.iota1 + h.iota0) - std::lgamma(h.iota1) - std::lgamma(h.iota0) +
           (h.iota1 - 1.0) * std::log(state.xi) + (h.iota0 - 1.0) * std::log1p(-state.xi);
  total += log_inverse_gamma(state.tau2, h.tau2_shape, h.tau2_scale);
  total += log_inverse_gamma(state.tau1_2, h.tau1_2_shape, h.tau1_2_scale);
  return total;
}

void sweep(Stage1State& state, CovariateMatrix& x, const Stage1Config& config, RandomSource& rng) {
  update_allocations(state, x.values, config.aux_components, rng);
  update_latent_elements(state, x.values, rng);
  update_indicators(state, x.values, rng);
  update_variances(state, x.values, rng);
  update_discount(state, config.discount_moves, rng);
  update_mass_parameters(state, config, rng);
  impute_missing(state, x, rng);
}

Stage1Result run_stage1a(CovariateMatrix x, Stage1State state, const Stage1Config& config,
                         RandomSource& rng) {
  config.validate();
  if (config.samples == 0) throw DomainError("run_stage1: no post-burn-in samples requested");
  Stage1Result result;
  result.partitions.reserve(config.samples);
  CoclusterAccumulator acc(static_cast<std::size_t>(x.cols()));
  const long total = static_cast<long>(config.burn_in) + static_cast<long>(config.thin) * config.samples;
  for (long it = 1; it <= total; ++it) {
    sweep(state, x, config, rng);
    if (it <= config.burn_in || (it - config.burn_in) % config.thin != 0) continue;
    result.partitions.push_back(state.partition);
    acc.add(state.partition);
    Stage1Trace& tr = result.trace;
    tr.clusters.push_back(static_cast<int>(state.num_clusters()));
    tr.discount.push_back(state.pdp.discount);
    tr.discount_log_odds.push_back(discount_log_odds(state.partition, state.pdp.mass));
    tr.tau.push_back(std::sqrt(state.tau2));
    tr.tau1.push_back(std::sqrt(state.tau1_2));
    tr.xi.push_back(state.xi);
    tr.alpha1.push_back(state.pdp.mass);
    tr.log_likelihood.push_back(log_likelihood(state, x.values));
  }
  result.cocluster = acc.probabilities();
  result.allocation = least_squares_allocation(result.partitions, result.cocluster);
  result.final_state = std::move(state);
  result.completed = x.values;
  return result;
}

Stage1bResult run_stage1b(const CovariateMatrix& x_in, const Partition& allocation,
                          const Stage1Config& config, RandomSource& rng) {
  CovariateMatrix x = x_in;
  Stage1State state = init_state_with_partition(x, allocation, config);
  const Eigen::Index n = x.rows();
  const auto q = static_cast<Eigen::Index>(allocation.num_clusters());
  std::vector<Eigen::MatrixXd> latent_draws;
  std::vector<Eigen::MatrixXi> z_draws;
  std::vector<std::pair<double, double>> variance_draws;
  latent_draws.reserve(config.stage1b_samples);
  z_draws.reserve(config.stage1b_samples);
  Eigen::MatrixXd latent_sum = Eigen::MatrixXd::Zero(n, q);
  Eigen::MatrixXd z_sum = Eigen::MatrixXd::Zero(n, q);
  const long total = static_cast<long>(config.stage1b_burn_in) +
                     static_cast<long>(config.thin) * config.stage1b_samples;
  for (long it = 1; it <= total; ++it) {
    update_latent_elements(state, x.values, rng);
    update_indicators(state, x.values, rng);
    update_variances(state, x.values, rng);
    impute_missing(state, x, rng);
    if (it <= config.stage1b_burn_in || (it - config.stage1b_burn_in) % config.thin != 0) continue;
    latent_draws.push_back(state.latent.values());
    z_draws.push_back(state.indicators.z);
    variance_draws.emplace_back(state.tau2, state.tau1_2);
    latent_sum += latent_draws.back();
    z_sum += z_draws.back().cast<double>();
  }
  const double count = static_cast<double>(latent_draws.size());
  Stage1bResult out;
  out.allocation = allocation;
  out.latent_mean = latent_sum / count;
  out.indicator_mean = z_sum / count;
  // Least-squares configuration: the draw closest to the posterior means.
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < latent_draws.size(); ++s) {
    const double loss = (latent_draws[s] - out.latent_mean).squaredNorm() +
                        (z_draws[s].cast<double>() - out.indicator_mean).squaredNorm();
    if (loss < best) {
      best = loss;
      out.sample_index = s;
    }
  }
  out.latent = latent_draws[out.sample_index];
  out.indicators = z_draws[out.sample_index];
  out.tau2 = variance_draws[out.sample_index].first;
  out.tau1_2 = variance_draws[out.sample_index].second;
  return out;
}

Stage1Result run_stage1(const CovariateMatrix& x, const Stage1Config& config, RandomSource& rng) {
  Stage1State start = init_state(x, config, rng);
  Stage1Result result = run_stage1a(x, std::move(start), config, rng);
  CovariateMatrix completed = x;
  completed.values = result.completed;
  result.configuration = run_stage1b(completed, result.allocation.partition, config, rng);
  return result;
}

}  // namespace variscan
