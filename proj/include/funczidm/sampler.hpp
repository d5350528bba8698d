/*
 MH-within-Gibbs kernel: conjugate Gibbs moves for the latents and variances,
 MH moves for the at-risk flags, coefficient blocks, random intercepts, and
 slab scales, with burn-in proposal adaptation and multi-chain orchestration.

 Sweep order per iteration: u -> c -> eta -> beta* blocks -> r ->
 horseshoe (lambda2, nu, tau2, xi) -> kappa2 -> phi2.
*/
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "funczidm/model.hpp"
#include "funczidm/rng.hpp"

namespace funczidm {

struct SamplerConfig {
  long iterations = 85000;
  long burn_in = 45000;
  long thin = 40;
  std::uint64_t seed = 1;
  int n_chains = 4;
  long adapt_window = 250;
  double target_accept_block = 0.30;   // whole-block beta proposals
  double target_accept_scalar = 0.44;  // scalar r and log-kappa walks
  double beta_proposal_sd = 0.30;
  double r_proposal_sd = 0.50;
  double kappa_proposal_sd = 0.50;
  long checkpoint_every = 1000;  // cache drift control
  double drift_tol = 1e-6;
  double beta_divergence_bound = 50.0;
  long progress_every = 0;  // 0: iterations/20
  bool check_invariants =
#ifdef NDEBUG
      false;
#else
      true;
#endif

  void validate() const;
  nlohmann::json to_json() const;
  static SamplerConfig from_json(const nlohmann::json& j);
};

struct AcceptanceSummary {
  Eigen::MatrixXd beta_rate;  // n_blocks x J, post-burn-in
  Eigen::MatrixXd r_rate;     // N x J
  Eigen::VectorXd kappa_rate;
  double eta_rate = 0.0;
  long eta_proposals = 0;

  nlohmann::json summary_json() const;
};

struct PosteriorDraws {
  ModelLayout layout;
  std::vector<std::string> taxa_names, covariate_names, individual_labels;
  Hyperparameters hyper;
  SamplerConfig config;
  std::uint64_t seed = 0;
  int chain_label = 0;

  std::vector<Eigen::MatrixXd> beta;  // n_coef x J per retained draw
  std::vector<Eigen::MatrixXd> r;     // N x J
  std::vector<Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>> eta;
  std::vector<Eigen::VectorXd> phi2, kappa2, tau2;
  std::vector<Eigen::MatrixXd> lambda2;  // n_blocks x J
  AcceptanceSummary acceptance;

  int size() const { return static_cast<int>(beta.size()); }
  int n_taxa() const { return static_cast<int>(taxa_names.size()); }
};

// ---- standalone horseshoe block updates (unit-testable pieces) ----
// Independence-MH with the unregularized inverse-gamma full conditional as the
// proposal; exact for the regularized target. m may be 0 (prior-only chain).
void horseshoe_local_update(Rng& rng, double& lambda2, double& nu, double ssr, int m,
                            double tau2, double kappa2);
void horseshoe_global_update(Rng& rng, double& tau2, double& xi,
                             const std::vector<double>& ssr_blocks,
                             const std::vector<double>& lambda2_blocks,
                             const std::vector<int>& m_blocks, double kappa2);

class Sampler {
 public:
  Sampler(const LongitudinalDataset& data, const ModelDesign& design,
          const Hyperparameters& hyper, const SamplerConfig& config, std::uint64_t seed,
          int chain_label = 0);

  // Initialization protocol: beta ~ U(-.75,.75), r ~ U(-.05,.05), eta = 1 iff
  // any positive count, variance hierarchy from its priors, c ~ Gamma(gamma,1)
  // on the at-risk set, u from its full conditional.
  void initialize();

  // Individual moves, public so tests and the coherence harness can drive them.
  void update_u();
  void update_c();
  void update_eta();
  void update_beta_block(int j, int block);
  void update_all_beta();
  void update_r_scalar(int i, int j);
  void update_all_r();
  void update_horseshoe();
  void update_kappa();
  void update_phi();

  void sweep(long iteration);
  PosteriorDraws run();

  // Log MH ratios for a forced proposal (detailed-balance checks).
  double beta_block_log_ratio(int j, int block, const Eigen::VectorXd& delta) const;
  double r_log_ratio(int i, int j, double delta) const;
  double kappa_log_ratio(int j, double new_log_kappa2) const;
  double eta_toggle_log_ratio(int i, int j) const;

  ParameterState& state() { return state_; }
  const ParameterState& state() const { return state_; }
  Rng& rng() { return rng_; }

  // Full cache rebuild from the current state; returns max drift absorbed.
  double refresh_caches();
  // Resync every cache after the state was edited from outside (tests,
  // coherence harnesses); validates the edited state.
  void rebuild_from_state();
  // Data changed under us (coherence harness): refresh count-derived caches.
  void on_counts_changed();

  double current_log_joint() const;
  const Eigen::MatrixXd& beta_scales() const { return beta_scale_; }
  const Eigen::MatrixXd& r_scales() const { return r_scale_; }

 private:
  const LongitudinalDataset& data_;
  const ModelDesign& design_;
  Hyperparameters hyper_;
  SamplerConfig config_;
  Rng rng_;
  int chain_label_;

  ParameterState state_;

  // caches, single-writer
  Eigen::MatrixXd log_gamma_, gamma_;  // records x J
  Eigen::MatrixXd log_c_;              // records x J, valid on the at-risk set
  Eigen::VectorXd t_sum_;              // per record
  std::vector<std::vector<int>> at_risk_records_;  // per taxon

  // proposal scales + acceptance ledgers
  Eigen::MatrixXd beta_scale_, r_scale_;
  Eigen::VectorXd kappa_scale_;
  Eigen::MatrixXd beta_acc_, beta_try_, r_acc_, r_try_;  // cumulative
  Eigen::VectorXd kappa_acc_, kappa_try_;
  long eta_acc_ = 0, eta_try_ = 0;
  Eigen::MatrixXd beta_acc_win_, r_acc_win_;  // adaptation windows
  Eigen::VectorXd kappa_acc_win_;

  void rebuild_at_risk_lists();
  void adapt_proposals();
  void reset_acceptance_counters();
  void check_divergence(long iteration);
  void dump_diagnostics(const std::string& reason, long iteration) const;
};

// Runs config.n_chains chains with seeds seed, seed+1, ...; parallel workers
// capped by the FUNCZIDM_WORKERS environment variable (default 4).
std::vector<PosteriorDraws> run_chains(const LongitudinalDataset& data,
                                       const ModelDesign& design,
                                       const Hyperparameters& hyper,
                                       const SamplerConfig& config);

}  // namespace funczidm
