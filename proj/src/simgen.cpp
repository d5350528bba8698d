#include "funczidm/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "funczidm/errors.hpp"
#include "funczidm/inference.hpp"
#include "funczidm/rng.hpp"

namespace funczidm {

double shape_fn(int k, double t) {
  switch (k) {
    case 1: return (-0.2 * (t - 5.0) * (t - 5.0) + 5.0) / 7.0;
    case 2: return 1.0 / (1.75 + std::exp(-1.25 * (t - 5.0)));
    case 3: return 0.07 * t;
    case 4: return 0.5;
    case 5: return 0.0;
    default: throw ValidationError("shape index must lie in 1..5");
  }
}

double SimulationTruth::beta_true(int j, int p, double t) const {
  int a = assignment(p, j);
  double sign = a < 0 ? -1.0 : 1.0;
  return sign * shape_fn(std::abs(a), t);
}

nlohmann::json SimulationTruth::to_json() const {
  auto mat_to_json = [](const auto& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(row);
    }
    return rows;
  };
  std::vector<double> theta_v(theta.data(), theta.data() + theta.size());
  return nlohmann::json{{"J", J},
                        {"N", N},
                        {"P", P},
                        {"seed", seed},
                        {"theta", theta_v},
                        {"assignment", mat_to_json(assignment)},
                        {"r", mat_to_json(r_true)},
                        {"eta", mat_to_json(eta_true)},
                        {"options",
                         {{"n_individuals", options.n_individuals},
                          {"n_covariates", options.n_covariates},
                          {"obs_min", options.obs_min},
                          {"obs_max", options.obs_max},
                          {"t_lo", options.t_lo},
                          {"t_hi", options.t_hi},
                          {"total_lo", options.total_lo},
                          {"total_hi", options.total_hi},
                          {"min_at_risk", options.min_at_risk},
                          {"n_active_taxa", options.n_active_taxa}}}};
}

SimulationTruth SimulationTruth::from_json(const nlohmann::json& js) {
  SimulationTruth t;
  t.J = js.at("J").get<int>();
  t.N = js.at("N").get<int>();
  t.P = js.at("P").get<int>();
  t.seed = js.at("seed").get<std::uint64_t>();
  const auto& o = js.at("options");
  t.options.n_individuals = o.at("n_individuals").get<int>();
  t.options.n_covariates = o.at("n_covariates").get<int>();
  t.options.obs_min = o.at("obs_min").get<int>();
  t.options.obs_max = o.at("obs_max").get<int>();
  t.options.t_lo = o.at("t_lo").get<double>();
  t.options.t_hi = o.at("t_hi").get<double>();
  t.options.total_lo = o.at("total_lo").get<long>();
  t.options.total_hi = o.at("total_hi").get<long>();
  t.options.min_at_risk = o.at("min_at_risk").get<int>();
  t.options.n_active_taxa = o.at("n_active_taxa").get<int>();
  t.theta = Eigen::Map<const Eigen::VectorXd>(js.at("theta").get<std::vector<double>>().data(),
                                              t.J);
  t.assignment.resize(t.P + 1, t.J);
  t.r_true.resize(t.N, t.J);
  t.eta_true.resize(t.N, t.J);
  for (int p = 0; p <= t.P; ++p)
    for (int j = 0; j < t.J; ++j) t.assignment(p, j) = js.at("assignment")[p][j].get<int>();
  for (int i = 0; i < t.N; ++i)
    for (int j = 0; j < t.J; ++j) {
      t.r_true(i, j) = js.at("r")[i][j].get<double>();
      t.eta_true(i, j) = js.at("eta")[i][j].get<int>();
    }
  return t;
}

std::pair<LongitudinalDataset, SimulationTruth> generate_dataset(int n_taxa, std::uint64_t seed,
                                                                 SimOptions options) {
  if (n_taxa < options.n_active_taxa)
    throw ValidationError("need at least as many taxa as active taxa");
  Rng rng(seed);
  const int n = options.n_individuals, p_count = options.n_covariates;

  SimulationTruth truth;
  truth.J = n_taxa;
  truth.N = n;
  truth.P = p_count;
  truth.seed = seed;
  truth.options = options;

  truth.assignment.resize(p_count + 1, n_taxa);
  for (int j = 0; j < n_taxa; ++j) {
    int k = static_cast<int>(rdunif(rng, 1, 4));
    truth.assignment(0, j) = rbernoulli(rng, 0.5) ? k : -k;
    for (int p = 1; p <= p_count; ++p) {
      if (j < options.n_active_taxa) {
        int kk = static_cast<int>(rdunif(rng, 1, 5));
        truth.assignment(p, j) = rbernoulli(rng, 0.5) ? kk : -kk;
      } else {
        truth.assignment(p, j) = 5;
      }
    }
  }

  truth.r_true.resize(n, n_taxa);
  for (int j = 0; j < n_taxa; ++j)
    for (int i = 0; i < n; ++i) truth.r_true(i, j) = runif(rng, -0.05, 0.05);

  truth.theta.resize(n_taxa);
  for (int j = 0; j < n_taxa; ++j) {
    switch (rdunif(rng, 0, 2)) {
      case 0: truth.theta[j] = runif(rng, 0.0, 0.15); break;
      case 1: truth.theta[j] = runif(rng, 0.15, 0.75); break;
      default: truth.theta[j] = runif(rng, 0.75, 0.90); break;
    }
  }

  // at-risk indicators, resampled per taxon until enough functional
  // observations, then whole-matrix retry if some individual ends up with no
  // at-risk taxon at all
  truth.eta_true.resize(n, n_taxa);
  for (;;) {
    for (int j = 0; j < n_taxa; ++j) {
      for (;;) {
        int at_risk = 0;
        for (int i = 0; i < n; ++i) {
          truth.eta_true(i, j) = rbernoulli(rng, truth.theta[j]) ? 1 : 0;
          at_risk += truth.eta_true(i, j);
        }
        if (at_risk >= options.min_at_risk) break;
      }
    }
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      int row_sum = 0;
      for (int j = 0; j < n_taxa; ++j) row_sum += truth.eta_true(i, j);
      ok = row_sum > 0;
    }
    if (ok) break;
  }

  // observation design
  std::vector<int> record_individual;
  std::vector<double> record_time;
  for (int i = 0; i < n; ++i) {
    int n_obs = static_cast<int>(rdunif(rng, options.obs_min, options.obs_max));
    std::vector<double> times(n_obs);
    for (double& t : times) t = runif(rng, options.t_lo, options.t_hi);
    std::sort(times.begin(), times.end());
    for (double t : times) {
      record_individual.push_back(i);
      record_time.push_back(t);
    }
  }
  const int n_rec = static_cast<int>(record_time.size());

  Eigen::MatrixXd x(n_rec, p_count);
  for (int m = 0; m < n_rec; ++m)
    for (int p = 0; p < p_count; ++p) x(m, p) = rnorm(rng);

  Eigen::MatrixXd z(n_rec, n_taxa);
  for (int m = 0; m < n_rec; ++m) {
    const int i = record_individual[m];
    const double t = record_time[m];
    Eigen::VectorXd c(n_taxa);
    double total = 0.0;
    for (int j = 0; j < n_taxa; ++j) {
      if (truth.eta_true(i, j) == 0) {
        c[j] = 0.0;
        continue;
      }
      double log_g = truth.beta_true(j, 0, t) + truth.r_true(i, j);
      for (int p = 1; p <= p_count; ++p) log_g += truth.beta_true(j, p, t) * x(m, p - 1);
      c[j] = std::max(rgamma(rng, std::exp(log_g), 1.0), 1e-100);
      total += c[j];
    }
    long depth = rdunif(rng, options.total_lo, options.total_hi);
    z.row(m) = rmultinomial(rng, depth, c / total).transpose();
  }

  std::vector<std::string> individuals, taxa;
  std::vector<CovariateMeta> covs;
  for (int i = 0; i < n; ++i) individuals.push_back("indiv_" + std::to_string(i + 1));
  for (int j = 0; j < n_taxa; ++j) taxa.push_back("taxon_" + std::to_string(j + 1));
  for (int p = 0; p < p_count; ++p)
    covs.push_back(CovariateMeta{"x" + std::to_string(p + 1), true, false, 0.0, 1.0});

  LongitudinalDataset data(std::move(individuals), std::move(taxa), std::move(covs),
                           std::move(record_individual), std::move(record_time), std::move(x),
                           std::move(z));
  return {std::move(data), std::move(truth)};
}

Eigen::VectorXd true_delta_ra(const SimulationTruth& truth, double t, int p, double v) {
  Eigen::VectorXd intercepts(truth.J), shifts(truth.J);
  for (int j = 0; j < truth.J; ++j) {
    intercepts[j] = truth.beta_true(j, 0, t);
    shifts[j] = v * truth.beta_true(j, p, t);
  }
  double m0 = intercepts.maxCoeff();
  double m1 = (intercepts + shifts).maxCoeff();
  double log_denom0 = m0 + std::log((intercepts.array() - m0).exp().sum());
  double log_denom1 = m1 + std::log(((intercepts + shifts).array() - m1).exp().sum());
  return (shifts.array() + log_denom0 - log_denom1).exp().matrix();
}

double coverage_fraction(const Eigen::MatrixXd& samples, const Eigen::VectorXd& truth,
                         double level) {
  const int grid = static_cast<int>(samples.cols());
  if (truth.size() != grid) throw ValidationError("truth/grid size mismatch");
  const double lo_p = (1.0 - level) / 2.0, hi_p = 1.0 - lo_p;
  int covered = 0;
  std::vector<double> column(samples.rows());
  for (int g = 0; g < grid; ++g) {
    Eigen::Map<Eigen::VectorXd>(column.data(), samples.rows()) = samples.col(g);
    double lo = quantile_type7(column, lo_p);
    double hi = quantile_type7(column, hi_p);
    if (lo <= truth[g] && truth[g] <= hi) ++covered;
  }
  return static_cast<double>(covered) / grid;
}

double armse(const Eigen::MatrixXd& samples, const Eigen::VectorXd& truth) {
  const int grid = static_cast<int>(samples.cols());
  if (truth.size() != grid) throw ValidationError("truth/grid size mismatch");
  double out = 0.0;
  for (int s = 0; s < samples.rows(); ++s) {
    double mse = (samples.row(s).transpose() - truth).squaredNorm() / grid;
    out += std::sqrt(mse);
  }
  return out / samples.rows();
}

double aitchison_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw ValidationError("compositions differ in length");
  for (int j = 0; j < x.size(); ++j)
    if (!(x[j] > 0.0) || !(y[j] > 0.0))
      throw ValidationError("Aitchison distance requires strictly positive compositions");
  Eigen::ArrayXd lx = x.array().log(), ly = y.array().log();
  Eigen::ArrayXd clr_x = lx - lx.mean(), clr_y = ly - ly.mean();
  return std::sqrt((clr_x - clr_y).square().sum());
}

double mean_aitchison(const PosteriorDraws& draws, const LongitudinalDataset& data,
                      const ModelDesign& design, const SimulationTruth& truth) {
  const int n_rec = data.n_records(), j_count = data.n_taxa();
  if (draws.size() == 0) throw ValidationError("no draws to score");

  // posterior mean of the subject-level composition per record
  Eigen::MatrixXd psi_mean = Eigen::MatrixXd::Zero(n_rec, j_count);
  for (int s = 0; s < draws.size(); ++s) {
    Eigen::MatrixXd log_gamma = design.w * draws.beta[s];
    for (int m = 0; m < n_rec; ++m) {
      int i = data.individual_of(m);
      double total = 0.0;
      Eigen::VectorXd psi = Eigen::VectorXd::Zero(j_count);
      for (int j = 0; j < j_count; ++j) {
        if (draws.eta[s](i, j) == 1) {
          psi[j] = std::exp(log_gamma(m, j) + draws.r[s](i, j));
          total += psi[j];
        }
      }
      psi_mean.row(m) += (psi / total).transpose();
    }
  }
  psi_mean /= draws.size();

  double sum_dist = 0.0;
  for (int m = 0; m < n_rec; ++m) {
    int i = data.individual_of(m);
    double t = data.time_of(m);
    std::vector<double> est, tru;
    double est_total = 0.0, tru_total = 0.0;
    for (int j = 0; j < j_count; ++j) {
      if (truth.eta_true(i, j) == 0) continue;
      double log_g = truth.beta_true(j, 0, t) + truth.r_true(i, j);
      for (int p = 1; p <= truth.P; ++p)
        log_g += truth.beta_true(j, p, t) * data.x()(m, p - 1);
      double g = std::exp(log_g);
      double e = std::max(psi_mean(m, j), 1e-12);
      tru.push_back(g);
      est.push_back(e);
      tru_total += g;
      est_total += e;
    }
    Eigen::VectorXd ev = Eigen::Map<Eigen::VectorXd>(est.data(), est.size()) / est_total;
    Eigen::VectorXd tv = Eigen::Map<Eigen::VectorXd>(tru.data(), tru.size()) / tru_total;
    sum_dist += aitchison_distance(ev, tv);
  }
  return sum_dist / n_rec;
}

ScoreTable score_draws(const PosteriorDraws& draws, const SimulationTruth& truth,
                       const LongitudinalDataset& data, const ModelDesign& design,
                       int grid_points) {
  const int j_count = truth.J, p_count = truth.P;
  const int n_draws = draws.size();
  if (n_draws == 0) throw ValidationError("no draws to score");
  const ModelLayout& layout = draws.layout;
  if (layout.n_blocks() != p_count + 1)
    throw ValidationError("draws and truth disagree on covariate count");

  std::vector<double> grid(grid_points);
  for (int g = 0; g < grid_points; ++g)
    grid[g] = truth.options.t_lo +
              (truth.options.t_hi - truth.options.t_lo) * g / (grid_points - 1);

  // basis rows on the grid
  Eigen::MatrixXd basis_grid(grid_points, layout.basis.df() + 1);
  for (int g = 0; g < grid_points; ++g) basis_grid.row(g) = layout.basis.evaluate(grid[g]);

  auto block_curves = [&](int s, int block) {
    // grid x taxa matrix of beta_{j,block}(t)
    const CoefBlock& bl = layout.blocks[block];
    if (bl.functional)
      return Eigen::MatrixXd(basis_grid *
                             draws.beta[s].middleRows(bl.offset, bl.size));
    return Eigen::MatrixXd(Eigen::VectorXd::Ones(grid_points) *
                           draws.beta[s].row(bl.offset));
  };

  // log sum_k exp(beta_k0(t)) per draw and grid point
  Eigen::MatrixXd log_denom0(n_draws, grid_points);
  for (int s = 0; s < n_draws; ++s) {
    Eigen::MatrixXd b0 = block_curves(s, 0);
    for (int g = 0; g < grid_points; ++g) {
      double mx = b0.row(g).maxCoeff();
      log_denom0(s, g) = mx + std::log((b0.row(g).array() - mx).exp().sum());
    }
  }

  ScoreTable table;
  table.ra95.setZero(j_count, p_count);
  table.b95.setZero(j_count, p_count);
  table.armse_ra.setZero(j_count, p_count);

  Eigen::MatrixXd samples(n_draws, grid_points), beta_samples(n_draws, grid_points);
  for (int p = 1; p <= p_count; ++p) {
    // log sum_k exp(beta_k0 + v beta_kp) per draw/grid (v = 1)
    Eigen::MatrixXd log_denom_p(n_draws, grid_points);
    std::vector<Eigen::MatrixXd> bp_cache(n_draws);
    for (int s = 0; s < n_draws; ++s) {
      Eigen::MatrixXd shifted = block_curves(s, 0) + block_curves(s, p);
      for (int g = 0; g < grid_points; ++g) {
        double mx = shifted.row(g).maxCoeff();
        log_denom_p(s, g) = mx + std::log((shifted.row(g).array() - mx).exp().sum());
      }
      bp_cache[s] = block_curves(s, p);
    }

    // truth on the grid
    Eigen::MatrixXd omega(grid_points, j_count);
    for (int g = 0; g < grid_points; ++g) omega.row(g) = true_delta_ra(truth, grid[g], p);

    for (int j = 0; j < j_count; ++j) {
      Eigen::VectorXd beta_truth(grid_points);
      for (int g = 0; g < grid_points; ++g) beta_truth[g] = truth.beta_true(j, p, grid[g]);
      for (int s = 0; s < n_draws; ++s) {
        beta_samples.row(s) = bp_cache[s].col(j).transpose();
        samples.row(s) = (bp_cache[s].col(j).transpose().array() + log_denom0.row(s).array() -
                          log_denom_p.row(s).array())
                             .exp();
      }
      table.ra95(j, p - 1) = coverage_fraction(samples, omega.col(j));
      table.b95(j, p - 1) = coverage_fraction(beta_samples, beta_truth);
      table.armse_ra(j, p - 1) = armse(samples, omega.col(j));
    }
  }
  const int active = truth.options.n_active_taxa;
  table.ra95_active = table.ra95.topRows(active).mean();
  table.b95_active = table.b95.topRows(active).mean();
  table.armse_active = table.armse_ra.topRows(active).mean();
  if (j_count > active) {
    table.ra95_nonactive = table.ra95.bottomRows(j_count - active).mean();
    table.b95_nonactive = table.b95.bottomRows(j_count - active).mean();
    table.armse_nonactive = table.armse_ra.bottomRows(j_count - active).mean();
  }
  table.mead = mean_aitchison(draws, data, design, truth);
  return table;
}

void write_score_csv(const ScoreTable& table, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open '" + path + "' for writing");
  os.precision(10);
  os << "model,MeAD,RA95_active,B95_active,ARMSE_active,"
        "RA95_nonactive,B95_nonactive,ARMSE_nonactive\n";
  os << "FunC-ZIDM," << table.mead << ',' << table.ra95_active << ',' << table.b95_active << ','
     << table.armse_active << ',' << table.ra95_nonactive << ',' << table.b95_nonactive << ','
     << table.armse_nonactive << '\n';
}

void save_truth(const SimulationTruth& truth, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open '" + path + "' for writing");
  os << truth.to_json().dump(2) << '\n';
}

SimulationTruth load_truth(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open '" + path + "'");
  nlohmann::json j;
  is >> j;
  return SimulationTruth::from_json(j);
}

void write_dataset_csv(const LongitudinalDataset& data, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open '" + path + "' for writing");
  os.precision(17);
  os << "id,time";
  for (const auto& cov : data.covariates()) os << ',' << cov.name;
  for (const auto& taxon : data.taxa_names()) os << ',' << taxon;
  os << '\n';
  for (int m = 0; m < data.n_records(); ++m) {
    os << data.individual_labels()[data.individual_of(m)] << ',' << data.time_of(m);
    for (int p = 0; p < data.n_covariates(); ++p) os << ',' << data.x()(m, p);
    for (int j = 0; j < data.n_taxa(); ++j) os << ',' << static_cast<long>(data.z()(m, j));
    os << '\n';
  }
}

}  // namespace funczidm
