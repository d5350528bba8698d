#include "funczidm/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "funczidm/densities.hpp"
#include "funczidm/errors.hpp"

namespace funczidm {

namespace {
constexpr double kCFloor = 1e-100;  // keeps log c finite for near-zero shapes
}

void SamplerConfig::validate() const {
  if (iterations < 0 || burn_in < 0) throw ValidationError("iteration counts must be nonnegative");
  if (iterations > 0 && burn_in >= iterations)
    throw ValidationError("burn_in must be smaller than iterations");
  if (thin < 1) throw ValidationError("thin must be >= 1");
  if (n_chains < 1) throw ValidationError("need at least one chain");
  if (adapt_window < 1) throw ValidationError("adapt_window must be >= 1");
  if (target_accept_block <= 0 || target_accept_block >= 1 || target_accept_scalar <= 0 ||
      target_accept_scalar >= 1)
    throw ValidationError("target acceptance rates must lie in (0,1)");
}

nlohmann::json SamplerConfig::to_json() const {
  return nlohmann::json{{"iterations", iterations},
                        {"burn_in", burn_in},
                        {"thin", thin},
                        {"seed", seed},
                        {"n_chains", n_chains},
                        {"adapt_window", adapt_window},
                        {"target_accept_block", target_accept_block},
                        {"target_accept_scalar", target_accept_scalar},
                        {"beta_proposal_sd", beta_proposal_sd},
                        {"r_proposal_sd", r_proposal_sd},
                        {"kappa_proposal_sd", kappa_proposal_sd},
                        {"checkpoint_every", checkpoint_every},
                        {"drift_tol", drift_tol},
                        {"beta_divergence_bound", beta_divergence_bound}};
}

SamplerConfig SamplerConfig::from_json(const nlohmann::json& j) {
  SamplerConfig c;
  auto get = [&j](const char* k, auto& target) {
    if (j.contains(k)) target = j.at(k).get<std::decay_t<decltype(target)>>();
  };
  get("iterations", c.iterations);
  get("burn_in", c.burn_in);
  get("thin", c.thin);
  get("seed", c.seed);
  get("n_chains", c.n_chains);
  get("adapt_window", c.adapt_window);
  get("target_accept_block", c.target_accept_block);
  get("target_accept_scalar", c.target_accept_scalar);
  get("beta_proposal_sd", c.beta_proposal_sd);
  get("r_proposal_sd", c.r_proposal_sd);
  get("kappa_proposal_sd", c.kappa_proposal_sd);
  get("checkpoint_every", c.checkpoint_every);
  get("drift_tol", c.drift_tol);
  get("beta_divergence_bound", c.beta_divergence_bound);
  c.validate();
  return c;
}

nlohmann::json AcceptanceSummary::summary_json() const {
  auto stats = [](const Eigen::MatrixXd& m) {
    if (m.size() == 0) return nlohmann::json{{"mean", 0.0}, {"min", 0.0}, {"max", 0.0}};
    return nlohmann::json{{"mean", m.mean()}, {"min", m.minCoeff()}, {"max", m.maxCoeff()}};
  };
  return nlohmann::json{{"beta", stats(beta_rate)},
                        {"r", stats(r_rate)},
                        {"kappa", stats(kappa_rate)},
                        {"eta", {{"rate", eta_rate}, {"proposals", eta_proposals}}}};
}

// ---- horseshoe block updates ----

namespace {
// log N(block; 0, sigma2_reg) - log N(block; 0, lambda2 tau2) summed over the
// block, dropping constants shared by both; the independence-MH correction.
double regularization_term(double ssr, int m, double lambda2, double tau2, double kappa2) {
  if (m == 0) return 0.0;
  double unreg = lambda2 * tau2;
  double reg = shrinkage_variance(kappa2, lambda2, tau2);
  return -0.5 * m * std::log(reg) - ssr / (2.0 * reg) + 0.5 * m * std::log(unreg) +
         ssr / (2.0 * unreg);
}
}  // namespace

void horseshoe_local_update(Rng& rng, double& lambda2, double& nu, double ssr, int m,
                            double tau2, double kappa2) {
  double proposal = rinvgamma(rng, 0.5 * (m + 1), 1.0 / nu + ssr / (2.0 * tau2));
  double log_accept = regularization_term(ssr, m, proposal, tau2, kappa2) -
                      regularization_term(ssr, m, lambda2, tau2, kappa2);
  if (std::isfinite(log_accept) && std::log(runif(rng)) < log_accept) lambda2 = proposal;
  nu = rinvgamma(rng, 1.0, 1.0 + 1.0 / lambda2);
}

void horseshoe_global_update(Rng& rng, double& tau2, double& xi,
                             const std::vector<double>& ssr_blocks,
                             const std::vector<double>& lambda2_blocks,
                             const std::vector<int>& m_blocks, double kappa2) {
  int m_total = 0;
  double rate = 1.0 / xi;
  for (std::size_t b = 0; b < ssr_blocks.size(); ++b) {
    m_total += m_blocks[b];
    rate += 0.5 * ssr_blocks[b] / lambda2_blocks[b];
  }
  double proposal = rinvgamma(rng, 0.5 * (m_total + 1), rate);
  double log_accept = 0.0;
  for (std::size_t b = 0; b < ssr_blocks.size(); ++b)
    log_accept += regularization_term(ssr_blocks[b], m_blocks[b], lambda2_blocks[b], proposal,
                                      kappa2) -
                  regularization_term(ssr_blocks[b], m_blocks[b], lambda2_blocks[b], tau2,
                                      kappa2);
  if (std::isfinite(log_accept) && std::log(runif(rng)) < log_accept) tau2 = proposal;
  xi = rinvgamma(rng, 1.0, 1.0 + 1.0 / tau2);
}

// ---- Sampler ----

Sampler::Sampler(const LongitudinalDataset& data, const ModelDesign& design,
                 const Hyperparameters& hyper, const SamplerConfig& config,
                 std::uint64_t seed, int chain_label)
    : data_(data),
      design_(design),
      hyper_(hyper),
      config_(config),
      rng_(seed),
      chain_label_(chain_label) {
  hyper_.validate();
  config_.validate();
  const int n_rec = data_.n_records(), n_tax = data_.n_taxa(), n_ind = data_.n_individuals();
  const int n_blocks = design_.layout.n_blocks();

  state_.beta.setZero(design_.layout.n_coef, n_tax);
  state_.r.setZero(n_ind, n_tax);
  state_.eta.setZero(n_ind, n_tax);
  state_.c.setZero(n_rec, n_tax);
  state_.u.setOnes(n_rec);
  state_.lambda2.setOnes(n_blocks, n_tax);
  state_.nu.setOnes(n_blocks, n_tax);
  state_.tau2.setOnes(n_tax);
  state_.xi.setOnes(n_tax);
  state_.kappa2.setOnes(n_tax);
  state_.phi2.setOnes(n_tax);

  log_gamma_.setZero(n_rec, n_tax);
  gamma_.setOnes(n_rec, n_tax);
  log_c_.setZero(n_rec, n_tax);
  t_sum_.setZero(n_rec);

  beta_scale_.setConstant(n_blocks, n_tax, config_.beta_proposal_sd);
  r_scale_.setConstant(n_ind, n_tax, config_.r_proposal_sd);
  kappa_scale_.setConstant(n_tax, config_.kappa_proposal_sd);
  beta_acc_.setZero(n_blocks, n_tax);
  beta_try_.setZero(n_blocks, n_tax);
  r_acc_.setZero(n_ind, n_tax);
  r_try_.setZero(n_ind, n_tax);
  kappa_acc_.setZero(n_tax);
  kappa_try_.setZero(n_tax);
  beta_acc_win_.setZero(n_blocks, n_tax);
  r_acc_win_.setZero(n_ind, n_tax);
  kappa_acc_win_.setZero(n_tax);
}

void Sampler::initialize() {
  const int n_tax = data_.n_taxa(), n_ind = data_.n_individuals(), n_rec = data_.n_records();
  const int n_blocks = design_.layout.n_blocks();

  for (int j = 0; j < n_tax; ++j)
    for (int q = 0; q < state_.beta.rows(); ++q) state_.beta(q, j) = runif(rng_, -0.75, 0.75);
  for (int j = 0; j < n_tax; ++j)
    for (int i = 0; i < n_ind; ++i) state_.r(i, j) = runif(rng_, -0.05, 0.05);
  for (int j = 0; j < n_tax; ++j)
    for (int i = 0; i < n_ind; ++i) state_.eta(i, j) = data_.any_positive(i, j) ? 1 : 0;

  for (int j = 0; j < n_tax; ++j) {
    state_.kappa2[j] = rinvgamma(rng_, hyper_.zeta, hyper_.rho);
    state_.phi2[j] = rinvgamma(rng_, hyper_.a, hyper_.b);
    state_.xi[j] = rinvgamma(rng_, 0.5, 1.0);
    state_.tau2[j] = rinvgamma(rng_, 0.5, 1.0 / state_.xi[j]);
    for (int bl = 0; bl < n_blocks; ++bl) {
      state_.nu(bl, j) = rinvgamma(rng_, 0.5, 1.0);
      state_.lambda2(bl, j) = rinvgamma(rng_, 0.5, 1.0 / state_.nu(bl, j));
    }
  }

  log_gamma_ = design_.w * state_.beta;
  for (int m = 0; m < n_rec; ++m) log_gamma_.row(m) += state_.r.row(data_.individual_of(m));
  gamma_ = log_gamma_.array().exp();

  for (int j = 0; j < n_tax; ++j)
    for (int m = 0; m < n_rec; ++m) {
      if (state_.eta(data_.individual_of(m), j) == 1) {
        double draw = std::max(rgamma(rng_, gamma_(m, j), 1.0), kCFloor);
        state_.c(m, j) = draw;
        log_c_(m, j) = std::log(draw);
      } else {
        state_.c(m, j) = 0.0;
      }
    }
  t_sum_ = state_.c.rowwise().sum();
  update_u();
  rebuild_at_risk_lists();
}

void Sampler::rebuild_at_risk_lists() {
  at_risk_records_.assign(data_.n_taxa(), {});
  for (int j = 0; j < data_.n_taxa(); ++j)
    for (int m = 0; m < data_.n_records(); ++m)
      if (state_.eta(data_.individual_of(m), j) == 1) at_risk_records_[j].push_back(m);
}

void Sampler::update_u() {
  for (int m = 0; m < data_.n_records(); ++m) {
    if (!(t_sum_[m] > 0.0))
      throw DivergenceError("record " + std::to_string(m) +
                            " has no at-risk mass but a positive total count");
    state_.u[m] = rgamma(rng_, data_.z_dot()[m], t_sum_[m]);
  }
}

void Sampler::update_c() {
  const int n_rec = data_.n_records();
  for (int j = 0; j < data_.n_taxa(); ++j) {
    for (int m = 0; m < n_rec; ++m) {
      if (state_.eta(data_.individual_of(m), j) == 0) {
        state_.c(m, j) = 0.0;
        continue;
      }
      double shape = data_.z()(m, j) + gamma_(m, j);
      if (!std::isfinite(shape)) throw DivergenceError("non-finite gamma shape in c update");
      double draw = std::max(rgamma(rng_, shape, 1.0 + state_.u[m]), kCFloor);
      state_.c(m, j) = draw;
      log_c_(m, j) = std::log(draw);
    }
  }
  t_sum_ = state_.c.rowwise().sum();
}

double Sampler::eta_toggle_log_ratio(int i, int j) const {
  const int n = data_.n_individuals();
  double s = 0.0;
  for (int ii = 0; ii < n; ++ii) s += state_.eta(ii, j);
  auto [b, e] = data_.records_of(i);
  double gamma_log1pu = 0.0;
  for (int m = b; m < e; ++m) gamma_log1pu += gamma_(m, j) * std::log1p(state_.u[m]);
  if (state_.eta(i, j) == 0)
    return -gamma_log1pu + std::log(hyper_.alpha + s) - std::log(hyper_.beta + n - 1 - s);
  return gamma_log1pu + std::log(hyper_.beta + n - s) - std::log(hyper_.alpha + s - 1);
}

void Sampler::update_eta() {
  const int n = data_.n_individuals();
  for (int j = 0; j < data_.n_taxa(); ++j) {
    for (int i = 0; i < n; ++i) {
      if (data_.any_positive(i, j)) continue;  // eta pinned to 1 by positive counts
      ++eta_try_;
      double log_accept = eta_toggle_log_ratio(i, j);
      if (!(std::log(runif(rng_)) < log_accept)) continue;
      ++eta_acc_;
      auto [b, e] = data_.records_of(i);
      if (state_.eta(i, j) == 0) {
        state_.eta(i, j) = 1;
        for (int m = b; m < e; ++m) {
          double draw = std::max(rgamma(rng_, gamma_(m, j), 1.0 + state_.u[m]), kCFloor);
          state_.c(m, j) = draw;
          log_c_(m, j) = std::log(draw);
          t_sum_[m] += draw;
        }
      } else {
        state_.eta(i, j) = 0;
        for (int m = b; m < e; ++m) {
          t_sum_[m] -= state_.c(m, j);
          state_.c(m, j) = 0.0;
        }
      }
    }
  }
  rebuild_at_risk_lists();
}

double Sampler::beta_block_log_ratio(int j, int block, const Eigen::VectorXd& delta) const {
  const CoefBlock& bl = design_.layout.blocks[block];
  Eigen::VectorXd shift = design_.w.middleCols(bl.offset, bl.size) * delta;
  double out = 0.0;
  for (int m : at_risk_records_[j]) {
    double g = gamma_(m, j);
    double g_new = g * std::exp(shift[m]);
    out += (g_new - g) * log_c_(m, j) - std::lgamma(g_new) + std::lgamma(g);
  }
  for (int d = 0; d < bl.size; ++d) {
    double var = (block == 0 && d == 0)
                     ? 1.0
                     : shrinkage_variance(state_.kappa2[j], state_.lambda2(block, j),
                                          state_.tau2[j]);
    double old_v = state_.beta(bl.offset + d, j), new_v = old_v + delta[d];
    out += (old_v * old_v - new_v * new_v) / (2.0 * var);
  }
  return out;
}

void Sampler::update_beta_block(int j, int block) {
  const CoefBlock& bl = design_.layout.blocks[block];
  Eigen::VectorXd delta(bl.size);
  for (int d = 0; d < bl.size; ++d) delta[d] = beta_scale_(block, j) * rnorm(rng_);

  beta_try_(block, j) += 1.0;
  double log_accept = beta_block_log_ratio(j, block, delta);
  if (!std::isfinite(log_accept) || !(std::log(runif(rng_)) < log_accept)) return;

  beta_acc_(block, j) += 1.0;
  beta_acc_win_(block, j) += 1.0;
  state_.beta.col(j).segment(bl.offset, bl.size) += delta;
  Eigen::VectorXd shift = design_.w.middleCols(bl.offset, bl.size) * delta;
  log_gamma_.col(j) += shift;
  gamma_.col(j) = log_gamma_.col(j).array().exp();
}

void Sampler::update_all_beta() {
  for (int j = 0; j < data_.n_taxa(); ++j)
    for (int bl = 0; bl < design_.layout.n_blocks(); ++bl) update_beta_block(j, bl);
}

double Sampler::r_log_ratio(int i, int j, double delta) const {
  double out = 0.0;
  if (state_.eta(i, j) == 1) {
    double mult = std::exp(delta);
    auto [b, e] = data_.records_of(i);
    for (int m = b; m < e; ++m) {
      double g = gamma_(m, j);
      double g_new = g * mult;
      out += (g_new - g) * log_c_(m, j) - std::lgamma(g_new) + std::lgamma(g);
    }
  }
  double old_v = state_.r(i, j), new_v = old_v + delta;
  out += (old_v * old_v - new_v * new_v) / (2.0 * state_.phi2[j]);
  return out;
}

void Sampler::update_r_scalar(int i, int j) {
  double delta = r_scale_(i, j) * rnorm(rng_);
  r_try_(i, j) += 1.0;
  double log_accept = r_log_ratio(i, j, delta);
  if (!std::isfinite(log_accept) || !(std::log(runif(rng_)) < log_accept)) return;
  r_acc_(i, j) += 1.0;
  r_acc_win_(i, j) += 1.0;
  state_.r(i, j) += delta;
  auto [b, e] = data_.records_of(i);
  for (int m = b; m < e; ++m) {
    log_gamma_(m, j) += delta;
    gamma_(m, j) = std::exp(log_gamma_(m, j));
  }
}

void Sampler::update_all_r() {
  for (int j = 0; j < data_.n_taxa(); ++j)
    for (int i = 0; i < data_.n_individuals(); ++i) update_r_scalar(i, j);
}

void Sampler::update_horseshoe() {
  const int n_blocks = design_.layout.n_blocks();
  std::vector<double> ssr(n_blocks), lam(n_blocks);
  std::vector<int> m_counts(n_blocks);
  for (int j = 0; j < data_.n_taxa(); ++j) {
    for (int bl = 0; bl < n_blocks; ++bl) {
      int off = design_.layout.shrunk_offset(bl), cnt = design_.layout.shrunk_count(bl);
      ssr[bl] = state_.beta.col(j).segment(off, cnt).squaredNorm();
      m_counts[bl] = cnt;
      horseshoe_local_update(rng_, state_.lambda2(bl, j), state_.nu(bl, j), ssr[bl], cnt,
                             state_.tau2[j], state_.kappa2[j]);
      lam[bl] = state_.lambda2(bl, j);
    }
    horseshoe_global_update(rng_, state_.tau2[j], state_.xi[j], ssr, lam, m_counts,
                            state_.kappa2[j]);
  }
}

double Sampler::kappa_log_ratio(int j, double new_log_kappa2) const {
  auto log_target = [&](double log_k2) {
    double k2 = std::exp(log_k2);
    double out = -hyper_.zeta * log_k2 - hyper_.rho / k2;
    for (int bl = 0; bl < design_.layout.n_blocks(); ++bl) {
      int off = design_.layout.shrunk_offset(bl), cnt = design_.layout.shrunk_count(bl);
      double ssr = state_.beta.col(j).segment(off, cnt).squaredNorm();
      double var = shrinkage_variance(k2, state_.lambda2(bl, j), state_.tau2[j]);
      out += -0.5 * cnt * std::log(var) - ssr / (2.0 * var);
    }
    return out;
  };
  return log_target(new_log_kappa2) - log_target(std::log(state_.kappa2[j]));
}

void Sampler::update_kappa() {
  for (int j = 0; j < data_.n_taxa(); ++j) {
    double proposal = std::log(state_.kappa2[j]) + kappa_scale_[j] * rnorm(rng_);
    kappa_try_[j] += 1.0;
    double log_accept = kappa_log_ratio(j, proposal);
    if (!std::isfinite(log_accept) || !(std::log(runif(rng_)) < log_accept)) continue;
    kappa_acc_[j] += 1.0;
    kappa_acc_win_[j] += 1.0;
    state_.kappa2[j] = std::exp(proposal);
  }
}

void Sampler::update_phi() {
  const int n = data_.n_individuals();
  for (int j = 0; j < data_.n_taxa(); ++j) {
    double ssr = state_.r.col(j).squaredNorm();
    state_.phi2[j] = 1.0 / rgamma(rng_, hyper_.a + 0.5 * n, hyper_.b + 0.5 * ssr);
  }
}

void Sampler::adapt_proposals() {
  const double w = static_cast<double>(config_.adapt_window);
  for (int j = 0; j < beta_scale_.cols(); ++j)
    for (int bl = 0; bl < beta_scale_.rows(); ++bl)
      beta_scale_(bl, j) *=
          std::exp(beta_acc_win_(bl, j) / w - config_.target_accept_block);
  for (int j = 0; j < r_scale_.cols(); ++j)
    for (int i = 0; i < r_scale_.rows(); ++i)
      r_scale_(i, j) *= std::exp(r_acc_win_(i, j) / w - config_.target_accept_scalar);
  for (int j = 0; j < kappa_scale_.size(); ++j)
    kappa_scale_[j] *= std::exp(kappa_acc_win_[j] / w - config_.target_accept_scalar);
  beta_acc_win_.setZero();
  r_acc_win_.setZero();
  kappa_acc_win_.setZero();
}

void Sampler::reset_acceptance_counters() {
  beta_acc_.setZero();
  beta_try_.setZero();
  r_acc_.setZero();
  r_try_.setZero();
  kappa_acc_.setZero();
  kappa_try_.setZero();
  eta_acc_ = 0;
  eta_try_ = 0;
}

double Sampler::refresh_caches() {
  Eigen::MatrixXd fresh = design_.w * state_.beta;
  for (int m = 0; m < data_.n_records(); ++m)
    fresh.row(m) += state_.r.row(data_.individual_of(m));
  double drift = (fresh - log_gamma_).cwiseAbs().maxCoeff();
  Eigen::VectorXd t_fresh = state_.c.rowwise().sum();
  drift = std::max(drift, (t_fresh - t_sum_).cwiseAbs().maxCoeff());
  log_gamma_ = std::move(fresh);
  gamma_ = log_gamma_.array().exp();
  t_sum_ = std::move(t_fresh);
  return drift;
}

void Sampler::rebuild_from_state() {
  state_.validate(data_, design_.layout);
  refresh_caches();
  for (int j = 0; j < data_.n_taxa(); ++j)
    for (int m = 0; m < data_.n_records(); ++m)
      if (state_.eta(data_.individual_of(m), j) == 1)
        log_c_(m, j) = std::log(state_.c(m, j));
  rebuild_at_risk_lists();
}

void Sampler::on_counts_changed() {
  for (int i = 0; i < data_.n_individuals(); ++i)
    for (int j = 0; j < data_.n_taxa(); ++j)
      if (data_.any_positive(i, j) && state_.eta(i, j) == 0)
        throw ValidationError("replacement counts contradict a structural zero");
}

double Sampler::current_log_joint() const {
  return log_joint(state_, data_, design_, hyper_);
}

void Sampler::dump_diagnostics(const std::string& reason, long iteration) const {
  std::ostringstream os;
  os << "[chain " << chain_label_ << "] divergence at iteration " << iteration << ": " << reason
     << "\n  max |beta| = " << state_.beta.cwiseAbs().maxCoeff()
     << ", max |r| = " << state_.r.cwiseAbs().maxCoeff()
     << ", max kappa2 = " << state_.kappa2.maxCoeff()
     << ", max tau2 = " << state_.tau2.maxCoeff();
  std::cerr << os.str() << std::endl;
}

void Sampler::check_divergence(long iteration) {
  double max_beta = state_.beta.cwiseAbs().maxCoeff();
  if (max_beta > config_.beta_divergence_bound || !std::isfinite(max_beta)) {
    dump_diagnostics("coefficient magnitude " + std::to_string(max_beta) + " exceeded bound",
                     iteration);
    throw DivergenceError("chain diverged: |beta| exceeded " +
                          std::to_string(config_.beta_divergence_bound));
  }
}

void Sampler::sweep(long iteration) {
  update_u();
  update_c();
  update_eta();
  update_all_beta();
  update_all_r();
  update_horseshoe();
  update_kappa();
  update_phi();

  if (iteration < config_.burn_in && (iteration + 1) % config_.adapt_window == 0)
    adapt_proposals();
  check_divergence(iteration);
  if (config_.checkpoint_every > 0 && (iteration + 1) % config_.checkpoint_every == 0) {
    double drift = refresh_caches();
    if (drift > config_.drift_tol) {
      dump_diagnostics("cache drift " + std::to_string(drift), iteration);
      throw DivergenceError("incremental cache drift exceeded tolerance");
    }
  }
  if (config_.check_invariants) state_.validate(data_, design_.layout);
}

PosteriorDraws Sampler::run() {
  initialize();

  PosteriorDraws draws;
  draws.layout = design_.layout;
  draws.taxa_names = data_.taxa_names();
  for (const auto& cov : data_.covariates()) draws.covariate_names.push_back(cov.name);
  draws.individual_labels = data_.individual_labels();
  draws.hyper = hyper_;
  draws.config = config_;
  draws.seed = config_.seed;
  draws.chain_label = chain_label_;

  const long n_keep =
      config_.thin > 0 ? std::max<long>(0, (config_.iterations - config_.burn_in)) / config_.thin
                       : 0;
  draws.beta.reserve(n_keep);

  long progress_every = config_.progress_every > 0
                            ? config_.progress_every
                            : std::max<long>(1, config_.iterations / 20);
  for (long it = 0; it < config_.iterations; ++it) {
    sweep(it);
    if (it + 1 == config_.burn_in) reset_acceptance_counters();
    if (it >= config_.burn_in && (it - config_.burn_in + 1) % config_.thin == 0) {
      draws.beta.push_back(state_.beta);
      draws.r.push_back(state_.r);
      draws.eta.push_back(state_.eta);
      draws.phi2.push_back(state_.phi2);
      draws.kappa2.push_back(state_.kappa2);
      draws.tau2.push_back(state_.tau2);
      draws.lambda2.push_back(state_.lambda2);
    }
    if ((it + 1) % progress_every == 0) {
      std::ostringstream os;
      os << "[chain " << chain_label_ << "] iter " << (it + 1) << "/" << config_.iterations
         << " log-joint=" << current_log_joint()
         << " acc(beta)=" << (beta_try_.sum() > 0 ? beta_acc_.sum() / beta_try_.sum() : 0.0)
         << " acc(r)=" << (r_try_.sum() > 0 ? r_acc_.sum() / r_try_.sum() : 0.0)
         << " acc(eta)=" << (eta_try_ > 0 ? static_cast<double>(eta_acc_) / eta_try_ : 0.0)
         << " acc(kappa)=" << (kappa_try_.sum() > 0 ? kappa_acc_.sum() / kappa_try_.sum() : 0.0);
      std::cerr << os.str() << std::endl;
    }
  }

  auto rate = [](const Eigen::MatrixXd& acc, const Eigen::MatrixXd& tries) {
    return (tries.array() > 0).select(acc.array() / tries.array().max(1.0), 0.0).matrix().eval();
  };
  draws.acceptance.beta_rate = rate(beta_acc_, beta_try_);
  draws.acceptance.r_rate = rate(r_acc_, r_try_);
  draws.acceptance.kappa_rate = rate(kappa_acc_, kappa_try_).col(0);
  draws.acceptance.eta_rate = eta_try_ > 0 ? static_cast<double>(eta_acc_) / eta_try_ : 0.0;
  draws.acceptance.eta_proposals = eta_try_;
  return draws;
}

std::vector<PosteriorDraws> run_chains(const LongitudinalDataset& data,
                                       const ModelDesign& design, const Hyperparameters& hyper,
                                       const SamplerConfig& config) {
  config.validate();
  int workers = 4;
  if (const char* env = std::getenv("FUNCZIDM_WORKERS")) {
    int parsed = std::atoi(env);
    if (parsed >= 1) workers = parsed;
  }
  workers = std::min(workers, config.n_chains);

  std::vector<PosteriorDraws> out(config.n_chains);
  std::vector<std::exception_ptr> errors(config.n_chains);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int k = next.fetch_add(1);
      if (k >= config.n_chains) return;
      try {
        SamplerConfig chain_config = config;
        chain_config.seed = config.seed + static_cast<std::uint64_t>(k);
        Sampler sampler(data, design, hyper, chain_config, chain_config.seed, k);
        out[k] = sampler.run();
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
  return out;
}

}  // namespace funczidm
