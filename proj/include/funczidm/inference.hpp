/*
 Post-hoc inferential quantities evaluated over posterior draws: relative
 abundance curves, multiplicative differences in relative abundance and Hill
 diversity, pointwise credible bands, and posterior predictive replication.
*/
#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "funczidm/model.hpp"
#include "funczidm/rng.hpp"
#include "funczidm/sampler.hpp"

namespace funczidm {

struct CovariateProfile {
  Eigen::VectorXd x;                              // constant profile (length P)
  std::function<Eigen::VectorXd(double)> x_of_t;  // optional time-varying profile
  std::string description;

  Eigen::VectorXd at(double t) const { return x_of_t ? x_of_t(t) : x; }
  static CovariateProfile zeros(int p, std::string tag = "baseline") {
    return CovariateProfile{Eigen::VectorXd::Zero(p), nullptr, std::move(tag)};
  }
};

// Population-level relative abundance (no random intercepts): softmax over
// taxa of beta_j0(t) + x(t) . beta_j(t), max-shifted before exponentiation.
Eigen::VectorXd relative_abundance(const Eigen::MatrixXd& beta, const ModelLayout& layout,
                                   double t, const CovariateProfile& profile);

// Subject-level composition for one individual: at-risk-masked softmax
// including the draw's random intercept column.
Eigen::VectorXd subject_relative_abundance(
    const Eigen::MatrixXd& beta, const Eigen::MatrixXd& r,
    const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& eta,
    const ModelLayout& layout, int individual, double t, const Eigen::VectorXd& x);

// Multiplicative difference in relative abundance for a v-unit shift of
// covariate p; identical to the elementwise ratio of relative abundances at
// the shifted and unshifted profiles.
Eigen::VectorXd delta_ra(const Eigen::MatrixXd& beta, const ModelLayout& layout, double t,
                         const CovariateProfile& profile, int p, double v);

// Hill diversity of order l in [0,1); l = 0 takes the Shannon limit.
double hill_diversity(const Eigen::VectorXd& psi, double l);

// Multiplicative difference in Hill diversity for a v-unit shift of covariate p.
double delta_diversity(const Eigen::MatrixXd& beta, const ModelLayout& layout, double t,
                       const CovariateProfile& profile, int p, double v, double l);

struct FunctionalSummary {
  std::vector<double> grid;
  std::vector<double> mean, lower, upper;
  double level = 0.95;
  std::string label;
};

// Pointwise mean and central credible band of any per-draw functional.
FunctionalSummary summarize_function(int n_draws,
                                     const std::function<double(int, double)>& evaluator,
                                     const std::vector<double>& grid, double level = 0.95,
                                     std::string label = "");

// Type-7 empirical quantile (R default); operates on a scratch copy.
double quantile_type7(std::vector<double> values, double prob);

void write_summary_csv(const FunctionalSummary& summary, const std::string& path);

// Mean surface over a t x v grid for deltaRA (taxon j) or deltaDiv.
Eigen::MatrixXd heatmap_delta_ra(const PosteriorDraws& draws, int j, int p,
                                 const std::vector<double>& t_grid,
                                 const std::vector<double>& v_grid,
                                 const CovariateProfile& profile);
Eigen::MatrixXd heatmap_delta_div(const PosteriorDraws& draws, int p,
                                  const std::vector<double>& t_grid,
                                  const std::vector<double>& v_grid,
                                  const CovariateProfile& profile, double l);
void write_heatmap_csv(const Eigen::MatrixXd& surface, const std::vector<double>& t_grid,
                       const std::vector<double>& v_grid, const std::string& path);

struct PpcResult {
  Eigen::VectorXd observed_mean_ra;       // per taxon, mean over records of z/zdot
  Eigen::VectorXd mean_ra_pvalue;         // P(rep >= obs) per taxon
  Eigen::MatrixXd observed_cov;           // J x J covariance of observed proportions
  Eigen::MatrixXd cov_pvalue;             // P(rep >= obs) per taxa pair
  std::vector<Eigen::MatrixXd> replicates;  // optional replicated count tables
};

// Per retained draw, replicate counts record by record (Gamma(gamma,1) on the
// draw's at-risk set, normalized, multinomial with the observed total), and
// compare mean relative abundances and pairwise covariance structure.
PpcResult posterior_predictive(const PosteriorDraws& draws, const LongitudinalDataset& data,
                               const ModelDesign& design, std::uint64_t seed,
                               bool keep_replicates = false);

}  // namespace funczidm
