#include "funczidm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "funczidm/errors.hpp"

namespace funczidm {

namespace {

// log-concentration row for every taxon at (t, x): beta_j0(t) + x . beta_j(t)
Eigen::VectorXd log_concentration_row(const Eigen::MatrixXd& beta, const ModelLayout& layout,
                                      double t, const Eigen::VectorXd& x) {
  Eigen::RowVectorXd w = layout.profile_row(t, x);
  return (w * beta).transpose();
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::ArrayXd shifted = logits.array() - logits.maxCoeff();
  Eigen::ArrayXd e = shifted.exp();
  return (e / e.sum()).matrix();
}

}  // namespace

Eigen::VectorXd relative_abundance(const Eigen::MatrixXd& beta, const ModelLayout& layout,
                                   double t, const CovariateProfile& profile) {
  return softmax(log_concentration_row(beta, layout, t, profile.at(t)));
}

Eigen::VectorXd subject_relative_abundance(
    const Eigen::MatrixXd& beta, const Eigen::MatrixXd& r,
    const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& eta,
    const ModelLayout& layout, int individual, double t, const Eigen::VectorXd& x) {
  Eigen::VectorXd logits = log_concentration_row(beta, layout, t, x);
  logits += r.row(individual).transpose();
  double shift = logits.maxCoeff();
  Eigen::VectorXd out(logits.size());
  double total = 0.0;
  for (int j = 0; j < logits.size(); ++j) {
    out[j] = eta(individual, j) == 1 ? std::exp(logits[j] - shift) : 0.0;
    total += out[j];
  }
  if (total <= 0.0) throw ValidationError("individual has no at-risk taxa");
  return out / total;
}

Eigen::VectorXd delta_ra(const Eigen::MatrixXd& beta, const ModelLayout& layout, double t,
                         const CovariateProfile& profile, int p, double v) {
  Eigen::VectorXd x = profile.at(t);
  Eigen::VectorXd logits = log_concentration_row(beta, layout, t, x);
  Eigen::VectorXd x_shift = x;
  x_shift[p] += v;
  Eigen::VectorXd logits_shift = log_concentration_row(beta, layout, t, x_shift);

  double m0 = logits.maxCoeff(), m1 = logits_shift.maxCoeff();
  double log_denom = m0 + std::log((logits.array() - m0).exp().sum());
  double log_denom_shift = m1 + std::log((logits_shift.array() - m1).exp().sum());
  // exp(v beta_jp(t)) == exp(logits_shift - logits) elementwise
  return ((logits_shift - logits).array() + log_denom - log_denom_shift).exp().matrix();
}

double hill_diversity(const Eigen::VectorXd& psi, double l) {
  if (l >= 1.0 || l < 0.0)
    throw ValidationError(
        "diversity order l must lie in [0,1): order 1 always returns the number of taxa");
  double out;
  if (l == 0.0) {
    double h = 0.0;
    for (int j = 0; j < psi.size(); ++j)
      if (psi[j] > 0.0) h -= psi[j] * std::log(psi[j]);
    out = std::exp(h);
  } else {
    double s = 0.0;
    for (int j = 0; j < psi.size(); ++j)
      if (psi[j] > 0.0) s += std::pow(psi[j], 1.0 - l);
    out = std::pow(s, 1.0 / l);
  }
  return out;
}

double delta_diversity(const Eigen::MatrixXd& beta, const ModelLayout& layout, double t,
                       const CovariateProfile& profile, int p, double v, double l) {
  Eigen::VectorXd x = profile.at(t);
  CovariateProfile base{x, nullptr, profile.description};
  CovariateProfile shifted{x, nullptr, profile.description};
  shifted.x[p] += v;
  double div_base = hill_diversity(relative_abundance(beta, layout, t, base), l);
  double div_shift = hill_diversity(relative_abundance(beta, layout, t, shifted), l);
  return div_shift / div_base;
}

double quantile_type7(std::vector<double> values, double prob) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  double h = (static_cast<double>(values.size()) - 1.0) * prob;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - lo) * (values[lo + 1] - values[lo]);
}

FunctionalSummary summarize_function(int n_draws,
                                     const std::function<double(int, double)>& evaluator,
                                     const std::vector<double>& grid, double level,
                                     std::string label) {
  if (n_draws <= 0) throw ValidationError("summary needs at least one draw");
  FunctionalSummary out;
  out.grid = grid;
  out.level = level;
  out.label = std::move(label);
  out.mean.resize(grid.size());
  out.lower.resize(grid.size());
  out.upper.resize(grid.size());
  std::vector<double> samples(n_draws);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double sum = 0.0;
    for (int s = 0; s < n_draws; ++s) {
      samples[s] = evaluator(s, grid[g]);
      sum += samples[s];
    }
    out.mean[g] = sum / n_draws;
    out.lower[g] = quantile_type7(samples, (1.0 - level) / 2.0);
    out.upper[g] = quantile_type7(samples, 1.0 - (1.0 - level) / 2.0);
  }
  return out;
}

void write_summary_csv(const FunctionalSummary& summary, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open '" + path + "' for writing");
  os.precision(17);
  os << "t,mean,lower,upper\n";
  for (std::size_t g = 0; g < summary.grid.size(); ++g)
    os << summary.grid[g] << ',' << summary.mean[g] << ',' << summary.lower[g] << ','
       << summary.upper[g] << '\n';
}

Eigen::MatrixXd heatmap_delta_ra(const PosteriorDraws& draws, int j, int p,
                                 const std::vector<double>& t_grid,
                                 const std::vector<double>& v_grid,
                                 const CovariateProfile& profile) {
  Eigen::MatrixXd surface = Eigen::MatrixXd::Zero(t_grid.size(), v_grid.size());
  for (int s = 0; s < draws.size(); ++s)
    for (std::size_t a = 0; a < t_grid.size(); ++a)
      for (std::size_t b = 0; b < v_grid.size(); ++b)
        surface(a, b) +=
            delta_ra(draws.beta[s], draws.layout, t_grid[a], profile, p, v_grid[b])[j];
  return surface / draws.size();
}

Eigen::MatrixXd heatmap_delta_div(const PosteriorDraws& draws, int p,
                                  const std::vector<double>& t_grid,
                                  const std::vector<double>& v_grid,
                                  const CovariateProfile& profile, double l) {
  Eigen::MatrixXd surface = Eigen::MatrixXd::Zero(t_grid.size(), v_grid.size());
  for (int s = 0; s < draws.size(); ++s)
    for (std::size_t a = 0; a < t_grid.size(); ++a)
      for (std::size_t b = 0; b < v_grid.size(); ++b)
        surface(a, b) +=
            delta_diversity(draws.beta[s], draws.layout, t_grid[a], profile, p, v_grid[b], l);
  return surface / draws.size();
}

void write_heatmap_csv(const Eigen::MatrixXd& surface, const std::vector<double>& t_grid,
                       const std::vector<double>& v_grid, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open '" + path + "' for writing");
  os.precision(17);
  os << "t";
  for (double v : v_grid) os << ",v=" << v;
  os << '\n';
  for (std::size_t a = 0; a < t_grid.size(); ++a) {
    os << t_grid[a];
    for (std::size_t b = 0; b < v_grid.size(); ++b) os << ',' << surface(a, b);
    os << '\n';
  }
}

PpcResult posterior_predictive(const PosteriorDraws& draws, const LongitudinalDataset& data,
                               const ModelDesign& design, std::uint64_t seed,
                               bool keep_replicates) {
  const int j_count = data.n_taxa();
  const int n_rec = data.n_records();
  const int n_draws = draws.size();
  if (n_draws == 0) throw ValidationError("posterior predictive needs retained draws");
  Rng rng(seed);

  Eigen::MatrixXd obs_prop(n_rec, j_count);
  for (int m = 0; m < n_rec; ++m)
    obs_prop.row(m) = data.z().row(m) / data.z_dot()[m];
  Eigen::VectorXd obs_mean = obs_prop.colwise().mean();
  Eigen::MatrixXd centered = obs_prop.rowwise() - obs_mean.transpose();
  Eigen::MatrixXd obs_cov = centered.transpose() * centered / std::max(1, n_rec - 1);

  PpcResult result;
  result.observed_mean_ra = obs_mean;
  result.observed_cov = obs_cov;
  result.mean_ra_pvalue = Eigen::VectorXd::Zero(j_count);
  result.cov_pvalue = Eigen::MatrixXd::Zero(j_count, j_count);

  Eigen::MatrixXd rep(n_rec, j_count);
  for (int s = 0; s < n_draws; ++s) {
    Eigen::MatrixXd log_gamma = design.w * draws.beta[s];
    for (int m = 0; m < n_rec; ++m) {
      int i = data.individual_of(m);
      Eigen::VectorXd c(j_count);
      double total = 0.0;
      for (int j = 0; j < j_count; ++j) {
        if (draws.eta[s](i, j) == 1) {
          double g = std::exp(log_gamma(m, j) + draws.r[s](i, j));
          c[j] = std::max(rgamma(rng, g, 1.0), 1e-100);
        } else {
          c[j] = 0.0;
        }
        total += c[j];
      }
      Eigen::VectorXd z_rep =
          rmultinomial(rng, static_cast<long>(data.z_dot()[m]), c / total);
      rep.row(m) = z_rep.transpose() / data.z_dot()[m];
    }
    Eigen::VectorXd rep_mean = rep.colwise().mean();
    for (int j = 0; j < j_count; ++j)
      if (rep_mean[j] >= obs_mean[j]) result.mean_ra_pvalue[j] += 1.0;
    Eigen::MatrixXd rep_centered = rep.rowwise() - rep_mean.transpose();
    Eigen::MatrixXd rep_cov = rep_centered.transpose() * rep_centered / std::max(1, n_rec - 1);
    for (int j = 0; j < j_count; ++j)
      for (int k = 0; k < j_count; ++k)
        if (rep_cov(j, k) >= obs_cov(j, k)) result.cov_pvalue(j, k) += 1.0;
    if (keep_replicates)
      result.replicates.push_back(
          (rep.array().colwise() * data.z_dot().array()).matrix());
  }
  result.mean_ra_pvalue /= n_draws;
  result.cov_pvalue /= n_draws;
  return result;
}

}  // namespace funczidm
