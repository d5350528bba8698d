/*
 Small deterministic datasets and states for unit tests.
*/
#pragma once

#include <string>
#include <vector>

#include "funczidm/data.hpp"
#include "funczidm/model.hpp"
#include "funczidm/rng.hpp"

namespace fixtures {

using namespace funczidm;

// n individuals x obs records, J taxa, P covariates; when with_constant is
// true the last covariate is flagged constant-coefficient. Some (i, j) pairs
// are forced all-zero so eligible at-risk toggles exist.
inline LongitudinalDataset small_data(int n = 4, int obs = 3, int j_count = 3, int p_count = 2,
                                      std::uint64_t seed = 5, bool with_constant = false,
                                      long depth = 30) {
  Rng rng(seed);
  std::vector<std::string> individuals, taxa;
  std::vector<CovariateMeta> covs;
  for (int i = 0; i < n; ++i) individuals.push_back("id" + std::to_string(i + 1));
  for (int j = 0; j < j_count; ++j) taxa.push_back("taxon_" + std::to_string(j + 1));
  for (int p = 0; p < p_count; ++p) {
    bool functional = !(with_constant && p == p_count - 1);
    covs.push_back(CovariateMeta{"x" + std::to_string(p + 1), functional, false, 0.0, 1.0});
  }

  std::vector<int> rec_ind;
  std::vector<double> rec_time;
  const int n_rec = n * obs;
  Eigen::MatrixXd x(n_rec, p_count), z(n_rec, j_count);
  // per-pair presence mask; taxon 0 is always present so every row has mass
  Eigen::MatrixXd present = Eigen::MatrixXd::Zero(n, j_count);
  for (int i = 0; i < n; ++i) {
    present(i, 0) = 1.0;
    for (int j = 1; j < j_count; ++j) present(i, j) = rbernoulli(rng, 0.65) ? 1.0 : 0.0;
  }
  int m = 0;
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < obs; ++o, ++m) {
      rec_ind.push_back(i);
      rec_time.push_back(10.0 * (o + runif(rng, 0.05, 0.95)) / obs);
      for (int p = 0; p < p_count; ++p) x(m, p) = rnorm(rng);
      Eigen::VectorXd weights(j_count);
      for (int j = 0; j < j_count; ++j)
        weights[j] = present(i, j) * std::exp(rnorm(rng, 0.0, 0.5));
      z.row(m) = rmultinomial(rng, depth, weights).transpose();
      if (z.row(m).sum() < 1.0) z(m, 0) = 1.0;  // guard against degenerate multinomial
    }
  }
  return LongitudinalDataset(std::move(individuals), std::move(taxa), std::move(covs),
                             std::move(rec_ind), std::move(rec_time), std::move(x),
                             std::move(z));
}

// A valid random state: eta honors the positive-count constraint, latents come
// from their conditionals given the drawn coefficients.
inline ParameterState random_state(const LongitudinalDataset& data, const ModelDesign& design,
                                   const Hyperparameters& hyper, Rng& rng) {
  ParameterState st;
  const int n = data.n_individuals(), j_count = data.n_taxa();
  const int n_blocks = design.layout.n_blocks();
  st.beta.resize(design.layout.n_coef, j_count);
  for (int j = 0; j < j_count; ++j)
    for (int q = 0; q < st.beta.rows(); ++q) st.beta(q, j) = rnorm(rng, 0.0, 0.3);
  st.r.resize(n, j_count);
  for (int j = 0; j < j_count; ++j)
    for (int i = 0; i < n; ++i) st.r(i, j) = rnorm(rng, 0.0, 0.1);
  st.eta.resize(n, j_count);
  for (int j = 0; j < j_count; ++j)
    for (int i = 0; i < n; ++i)
      st.eta(i, j) = data.any_positive(i, j) ? 1 : (rbernoulli(rng, 0.5) ? 1 : 0);
  st.lambda2.resize(n_blocks, j_count);
  st.nu.resize(n_blocks, j_count);
  st.tau2.resize(j_count);
  st.xi.resize(j_count);
  st.kappa2.resize(j_count);
  st.phi2.resize(j_count);
  for (int j = 0; j < j_count; ++j) {
    st.xi[j] = rinvgamma(rng, 0.5, 1.0);
    st.tau2[j] = rinvgamma(rng, 0.5, 1.0 / st.xi[j]);
    st.kappa2[j] = rinvgamma(rng, hyper.zeta, hyper.rho);
    st.phi2[j] = rinvgamma(rng, hyper.a, hyper.b);
    for (int bl = 0; bl < n_blocks; ++bl) {
      st.nu(bl, j) = rinvgamma(rng, 0.5, 1.0);
      st.lambda2(bl, j) = rinvgamma(rng, 0.5, 1.0 / st.nu(bl, j));
    }
  }
  st.c.setZero(data.n_records(), j_count);
  st.u.resize(data.n_records());
  for (int j = 0; j < j_count; ++j)
    for (int m = 0; m < data.n_records(); ++m)
      if (st.eta(data.individual_of(m), j) == 1) {
        double g = std::exp(design.w.row(m) * st.beta.col(j) +
                            st.r(data.individual_of(m), j));
        st.c(m, j) = std::max(rgamma(rng, g, 1.0), 1e-100);
      }
  for (int m = 0; m < data.n_records(); ++m)
    st.u[m] = rgamma(rng, data.z_dot()[m], st.c.row(m).sum());
  return st;
}

}  // namespace fixtures
