/*
 Synthetic-data protocol and evaluation metrics: the five coefficient shapes,
 the zero-inflation mixture, the resampling rule for sparse taxa, and the
 coverage / ARMSE / Aitchison scoring harness.
*/
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "funczidm/data.hpp"
#include "funczidm/sampler.hpp"

namespace funczidm {

// f_1..f_5; f_5 is the null shape
double shape_fn(int k, double t);

struct SimOptions {
  int n_individuals = 50;
  int n_covariates = 10;
  int obs_min = 3, obs_max = 10;        // observations per individual
  double t_lo = 0.0, t_hi = 10.0;       // observation window
  long total_lo = 1000, total_hi = 10000;  // sequencing depth per record
  int min_at_risk = 5;                  // resample rule threshold
  int n_active_taxa = 4;                // taxa with direct covariate effects
};

struct SimulationTruth {
  int J = 0, N = 0, P = 0;
  std::uint64_t seed = 0;
  SimOptions options;
  // signed shape index per (block, taxon): row 0 is the intercept, rows 1..P
  // the covariates; value +-k means +-f_k
  Eigen::MatrixXi assignment;
  Eigen::MatrixXd r_true;  // N x J
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> eta_true;
  Eigen::VectorXd theta;   // at-risk probability per taxon

  // true beta_jp(t); p = 0 is the intercept
  double beta_true(int j, int p, double t) const;

  nlohmann::json to_json() const;
  static SimulationTruth from_json(const nlohmann::json& j);
};

std::pair<LongitudinalDataset, SimulationTruth> generate_dataset(int n_taxa, std::uint64_t seed,
                                                                 SimOptions options = {});

// True multiplicative difference in relative abundance at x = 0 for a v-unit
// shift of covariate p (1-based over truth blocks); the scoring oracle.
Eigen::VectorXd true_delta_ra(const SimulationTruth& truth, double t, int p, double v = 1.0);

// ---- per-(j,p) statistics over a sample matrix (draws x grid) ----
// fraction of grid points whose central 95% sample interval covers the truth
double coverage_fraction(const Eigen::MatrixXd& samples, const Eigen::VectorXd& truth,
                         double level = 0.95);
// mean over draws of the RMSE over the grid
double armse(const Eigen::MatrixXd& samples, const Eigen::VectorXd& truth);

double aitchison_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Mean Aitchison distance over records between the posterior-mean
// subject-level composition and the truth, restricted to the taxa at risk
// under the true eta.
double mean_aitchison(const PosteriorDraws& draws, const LongitudinalDataset& data,
                      const ModelDesign& design, const SimulationTruth& truth);

struct ScoreTable {
  Eigen::MatrixXd ra95, b95, armse_ra;  // J x P, covariate blocks only
  double ra95_active = 0, b95_active = 0, armse_active = 0;
  double ra95_nonactive = 0, b95_nonactive = 0, armse_nonactive = 0;
  double mead = 0;
};

ScoreTable score_draws(const PosteriorDraws& draws, const SimulationTruth& truth,
                       const LongitudinalDataset& data, const ModelDesign& design,
                       int grid_points = 101);

void write_score_csv(const ScoreTable& table, const std::string& path);

void save_truth(const SimulationTruth& truth, const std::string& path);
SimulationTruth load_truth(const std::string& path);

// dataset CSV in the ingestion schema (id, time, covariates, counts)
void write_dataset_csv(const LongitudinalDataset& data, const std::string& path);

}  // namespace funczidm
