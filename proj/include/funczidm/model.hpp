/*
 Model core: the concentration regression, the zero-inflated gamma
 reparameterization of the Dirichlet-multinomial, prior hierarchies, and the
 augmented log joint every sampler move targets.

 Concentration regression per taxon j and record (i, t):
   log gamma_ij(t) = beta_j0(t) + sum_p beta_jp(t) x_ip(t) + r_ij,
 with beta_jp(t) = b(t) . beta*_jp expanded over the shared spline basis.
 Counts arise as z_i(t) ~ Multinomial(zdot, c_i(t)/T_i(t)) with
 c_ij(t) | eta_ij ~ (1-eta) delta_0 + eta Gamma(gamma_ij(t), 1); a per-record
 latent u_i(t) with joint factor u^{zdot-1} exp(-u T) makes every c update
 conditionally conjugate.
*/
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "funczidm/basis.hpp"
#include "funczidm/data.hpp"

namespace funczidm {

struct Hyperparameters {
  double alpha = 0.01;  // at-risk Beta
  double beta = 10.0;
  double a = 3.0;  // phi^-2 ~ Gamma(a, b)
  double b = 9.0;
  double zeta = 100.0;  // kappa^-2 ~ Gamma(zeta, rho), shape/rate
  double rho = 900.0;
  int D = 4;                // spline degrees of freedom
  double l_default = 0.75;  // Hill diversity order

  void validate() const;
  nlohmann::json to_json() const;
  static Hyperparameters from_json(const nlohmann::json& j);
};

// One coefficient block per covariate plus the functional intercept (block 0).
struct CoefBlock {
  int covariate;    // -1 for the intercept block
  bool functional;  // constant blocks hold a single coefficient
  int offset;       // first column in the expanded design
  int size;         // D+1 or 1
};

// Everything needed to evaluate beta_jp(t) from a stored coefficient matrix;
// serialized with the draws so post-processing never needs the raw data.
struct ModelLayout {
  SplineBasis basis;
  std::vector<CoefBlock> blocks;
  int n_coef = 0;

  int n_blocks() const { return static_cast<int>(blocks.size()); }
  // count of horseshoe-shrunk coefficients in a block (block 0 excludes the
  // constant beta*_j00, which keeps its Normal(0,1) prior)
  int shrunk_count(int block) const { return block == 0 ? blocks[block].size - 1 : blocks[block].size; }
  int shrunk_offset(int block) const { return block == 0 ? blocks[block].offset + 1 : blocks[block].offset; }

  // beta_jp(t) for taxon column j of a (n_coef x J) coefficient matrix
  double coef_value(const Eigen::MatrixXd& beta, int j, int block, double t) const;
  // expanded design row for covariate profile x at time t (no random effect)
  Eigen::RowVectorXd profile_row(double t, const Eigen::VectorXd& x) const;

  nlohmann::json to_json(const std::vector<std::string>& covariate_names) const;
  static ModelLayout from_json(const nlohmann::json& j);
};

struct ModelDesign {
  ModelLayout layout;
  Eigen::MatrixXd w;  // records x n_coef expanded design
};

// Shared basis over the pooled observed times; constant-flagged covariates get
// single-column blocks.
ModelDesign build_design(const LongitudinalDataset& data, const SplineBasis& basis);

struct ParameterState {
  Eigen::MatrixXd beta;  // n_coef x J
  Eigen::MatrixXd r;     // N x J
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> eta;  // N x J
  Eigen::MatrixXd c;     // records x J, zero exactly where eta is zero
  Eigen::VectorXd u;     // per record
  Eigen::MatrixXd lambda2, nu;  // n_blocks x J local scales + auxiliaries
  Eigen::VectorXd tau2, xi;     // per taxon
  Eigen::VectorXd kappa2;       // per taxon slab scale
  Eigen::VectorXd phi2;         // per taxon random-intercept variance

  // throws ValidationError on any violated invariant
  void validate(const LongitudinalDataset& data, const ModelLayout& layout) const;
};

// Regularized-horseshoe coefficient variance kappa^2 lambda^2 tau^2 /
// (kappa^2 + lambda^2 tau^2), evaluated in harmonic form for overflow safety.
inline double shrinkage_variance(double kappa2, double lambda2, double tau2) {
  return 1.0 / (1.0 / kappa2 + (1.0 / lambda2) * (1.0 / tau2));
}

// log gamma_ij(t) for one record/taxon; throws DivergenceError if non-finite.
double log_concentration(const ParameterState& state, const ModelDesign& design,
                         const LongitudinalDataset& data, int record, int j);

// ---- augmented log joint, up to state-independent constants ----
// Split into the additive pieces the sampler exploits; log_joint sums them.

// (zdot-1) log u - u T + sum_j z log c for one record
double log_joint_record_term(const ParameterState& state, const LongitudinalDataset& data,
                             int record);
// sum over records of i of the Gamma(gamma,1) log density of c_ij(t); 0 when eta=0
double log_joint_c_prior_pair(const ParameterState& state, const ModelDesign& design,
                              const LongitudinalDataset& data, int i, int j);
// marginalized beta-binomial over one eta column
double log_joint_eta_column(const ParameterState& state, const Hyperparameters& hyper, int j);
// coefficient, random-intercept, and variance-hierarchy priors for taxon j
double log_joint_priors_taxon(const ParameterState& state, const ModelLayout& layout,
                              const Hyperparameters& hyper, int j);

double log_joint(const ParameterState& state, const LongitudinalDataset& data,
                 const ModelDesign& design, const Hyperparameters& hyper);

}  // namespace funczidm
