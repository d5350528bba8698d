#include <doctest.h>

#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "funczidm/inference.hpp"
#include "funczidm/simgen.hpp"
#include "support/test_util.hpp"

using namespace funczidm;

TEST_CASE("coefficient shapes match their defining formulas") {
  CHECK(shape_fn(1, 5.0) == doctest::Approx(5.0 / 7.0));
  CHECK(shape_fn(1, 0.0) == doctest::Approx(0.0));
  CHECK(shape_fn(2, 5.0) == doctest::Approx(1.0 / 2.75));
  CHECK(shape_fn(3, 10.0) == doctest::Approx(0.7));
  for (double t : {0.0, 2.5, 7.1}) {
    CHECK(shape_fn(4, t) == 0.5);
    CHECK(shape_fn(5, t) == 0.0);
  }
}

TEST_CASE("generator honors the design protocol") {
  const int j_count = 12;
  std::vector<double> pooled_times, pooled_x;
  std::map<int, int> obs_counts;
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    auto [data, truth] = generate_dataset(j_count, seed);
    CHECK(data.n_individuals() == 50);
    CHECK(data.n_taxa() == j_count);
    CHECK(data.n_covariates() == 10);

    for (int i = 0; i < 50; ++i) {
      auto [b, e] = data.records_of(i);
      int n_obs = e - b;
      CHECK(n_obs >= 3);
      CHECK(n_obs <= 10);
      obs_counts[n_obs] += 1;
    }
    for (int m = 0; m < data.n_records(); ++m) {
      pooled_times.push_back(data.time_of(m));
      pooled_x.push_back(data.x()(m, 0));
      CHECK(data.z_dot()[m] >= 1000);
      CHECK(data.z_dot()[m] <= 10000);
    }

    // intercepts use shapes 1..4, active taxa any of 1..5, null taxa exactly 5
    for (int j = 0; j < j_count; ++j) {
      int a0 = std::abs(truth.assignment(0, j));
      CHECK(a0 >= 1);
      CHECK(a0 <= 4);
      for (int p = 1; p <= truth.P; ++p) {
        int ap = std::abs(truth.assignment(p, j));
        if (j >= truth.options.n_active_taxa) CHECK(ap == 5);
        else {
          CHECK(ap >= 1);
          CHECK(ap <= 5);
        }
      }
    }

    // at-risk resampling rule and zero-inflation mixture range
    for (int j = 0; j < j_count; ++j) {
      int at_risk = 0;
      for (int i = 0; i < 50; ++i) at_risk += truth.eta_true(i, j);
      CHECK(at_risk >= truth.options.min_at_risk);
      CHECK(truth.theta[j] >= 0.0);
      CHECK(truth.theta[j] <= 0.90);
    }

    // random intercepts stay inside the uniform support
    CHECK(truth.r_true.maxCoeff() <= 0.05);
    CHECK(truth.r_true.minCoeff() >= -0.05);

    // counts respect the structural zeros
    for (int m = 0; m < data.n_records(); ++m)
      for (int j = 0; j < j_count; ++j)
        if (truth.eta_true(data.individual_of(m), j) == 0) CHECK(data.z()(m, j) == 0.0);
  }

  // distributional checks over the pooled seeds
  double ks_t = testutil::ks_pvalue(pooled_times, [](double t) { return t / 10.0; });
  CHECK(ks_t > 0.001);
  double ks_x = testutil::ks_pvalue(pooled_x, [](double v) {
    return 0.5 * std::erfc(-v * M_SQRT1_2);
  });
  CHECK(ks_x > 0.001);
  // chi-square for the DiscreteUniform(3,10) observation counts
  double expected = 250.0 / 8.0, chi2 = 0.0;
  for (int k = 3; k <= 10; ++k) {
    double diff = obs_counts[k] - expected;
    chi2 += diff * diff / expected;
  }
  CHECK(chi2 < 24.32);  // chi-square(7) at p = 0.001
}

TEST_CASE("effect magnitudes stay within the stated multiplicative range") {
  auto [data, truth] = generate_dataset(8, 99);
  (void)data;
  double f_max = 0.0;
  for (int g = 0; g <= 100; ++g) {
    double t = 0.1 * g;
    for (int j = 0; j < truth.J; ++j)
      for (int p = 1; p <= truth.P; ++p)
        f_max = std::max(f_max, std::abs(truth.beta_true(j, p, t)));
  }
  CHECK(f_max <= 5.0 / 7.0 + 1e-12);
  CHECK(std::exp(f_max) <= 2.05);
  CHECK(std::exp(-f_max) >= 0.48);
}

TEST_CASE("true delta RA: null covariates, compositional coupling, ratio identity") {
  auto [data, truth] = generate_dataset(10, 7);
  (void)data;

  // a covariate whose assignments are all null gives exactly ones
  SimulationTruth nulltruth = truth;
  for (int j = 0; j < truth.J; ++j) nulltruth.assignment(1, j) = 5;
  Eigen::VectorXd ones = true_delta_ra(nulltruth, 3.3, 1);
  for (int j = 0; j < truth.J; ++j) CHECK(ones[j] == doctest::Approx(1.0).epsilon(1e-14));

  // omega for null taxa moves through the denominator, not assumed 1
  Eigen::VectorXd omega = true_delta_ra(truth, 5.0, 1);
  bool some_null_taxon_deviates = false;
  for (int j = truth.options.n_active_taxa; j < truth.J; ++j)
    if (std::abs(omega[j] - 1.0) > 1e-6) some_null_taxon_deviates = true;
  CHECK(some_null_taxon_deviates);

  // matches the ratio of population relative abundances under the truth
  for (double t : {0.0, 2.0, 6.7, 10.0}) {
    for (int p : {1, 4}) {
      Eigen::VectorXd om = true_delta_ra(truth, t, p);
      Eigen::VectorXd base(truth.J), shifted(truth.J);
      for (int j = 0; j < truth.J; ++j) {
        base[j] = std::exp(truth.beta_true(j, 0, t));
        shifted[j] = std::exp(truth.beta_true(j, 0, t) + truth.beta_true(j, p, t));
      }
      base /= base.sum();
      shifted /= shifted.sum();
      for (int j = 0; j < truth.J; ++j)
        CHECK(om[j] == doctest::Approx(shifted[j] / base[j]).epsilon(1e-12));
    }
  }

  // two-taxon hand case: beta_1p = log 2 constant, beta_2p = 0
  SimulationTruth two;
  two.J = 2;
  two.N = 1;
  two.P = 1;
  two.assignment.setZero(2, 2);
  two.assignment(0, 0) = 4;
  two.assignment(0, 1) = 4;  // equal intercepts cancel
  two.assignment(1, 0) = 4;
  two.assignment(1, 1) = 5;
  // f4 = 0.5; scale v to get log 2 in the exponent
  double v = std::log(2.0) / 0.5;
  Eigen::VectorXd hand = true_delta_ra(two, 5.0, 1, v);
  CHECK(hand[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(hand[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("coverage fraction: degenerate and calibrated cases") {
  const int grid = 101;
  Eigen::VectorXd truth(grid);
  for (int g = 0; g < grid; ++g) truth[g] = std::sin(0.1 * g);

  Eigen::MatrixXd exact = truth.transpose().replicate(50, 1);
  CHECK(coverage_fraction(exact, truth) == doctest::Approx(1.0));
  CHECK(armse(exact, truth) == doctest::Approx(0.0));

  Eigen::MatrixXd off = exact.array() + 10.0;
  CHECK(coverage_fraction(off, truth) == doctest::Approx(0.0));

  // normal scatter around the truth covers at roughly the nominal rate
  Rng rng(71);
  const int n_draws = 500;
  Eigen::MatrixXd scattered(n_draws, grid);
  for (int s = 0; s < n_draws; ++s)
    for (int g = 0; g < grid; ++g) scattered(s, g) = truth[g] + rnorm(rng, 0.0, 0.7);
  CHECK(coverage_fraction(scattered, truth) == doctest::Approx(0.95).epsilon(0.04));
}

TEST_CASE("ARMSE: constant offset and the double-loop oracle") {
  const int grid = 11, n_draws = 7;
  Eigen::VectorXd truth(grid);
  for (int g = 0; g < grid; ++g) truth[g] = 0.3 * g;

  Eigen::MatrixXd single = truth.transpose().array() + 0.37;
  CHECK(armse(single, truth) == doctest::Approx(0.37).epsilon(1e-12));

  Rng rng(72);
  Eigen::MatrixXd samples(n_draws, grid);
  for (int s = 0; s < n_draws; ++s)
    for (int g = 0; g < grid; ++g) samples(s, g) = rnorm(rng, 0.0, 1.0);
  double oracle = 0.0;
  for (int s = 0; s < n_draws; ++s) {
    double mse = 0.0;
    for (int g = 0; g < grid; ++g)
      mse += (samples(s, g) - truth[g]) * (samples(s, g) - truth[g]);
    oracle += std::sqrt(mse / grid);
  }
  oracle /= n_draws;
  CHECK(armse(samples, truth) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("Aitchison distance: axioms and the closed-form two-part case") {
  Eigen::VectorXd x(2), y(2);
  x << 0.8, 0.2;
  y << 0.5, 0.5;
  double expected = std::sqrt(2.0) * std::abs(std::log(4.0)) / 2.0;
  CHECK(aitchison_distance(x, y) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(aitchison_distance(x, x) == doctest::Approx(0.0));
  CHECK(aitchison_distance(x, y) == doctest::Approx(aitchison_distance(y, x)).epsilon(1e-14));
  // scale invariance in each argument
  CHECK(aitchison_distance(3.7 * x, y) == doctest::Approx(aitchison_distance(x, y)).epsilon(1e-12));

  Eigen::VectorXd with_zero(2);
  with_zero << 1.0, 0.0;
  CHECK_THROWS(aitchison_distance(with_zero, y));
}

TEST_CASE("score table: a chain pinned at a representable truth is perfect") {
  // constant-only truth (f4/f5) lies exactly in the spline span
  SimOptions options;
  options.n_individuals = 8;
  options.n_covariates = 2;
  options.total_lo = 200;
  options.total_hi = 400;
  options.min_at_risk = 3;
  options.n_active_taxa = 2;
  auto [data, truth] = generate_dataset(4, 11, options);
  for (int j = 0; j < truth.J; ++j) {
    truth.assignment(0, j) = (j % 2 == 0) ? 4 : -4;
    for (int p = 1; p <= truth.P; ++p)
      truth.assignment(p, j) = (j < 2 && p == 1) ? 4 : 5;
  }

  SplineBasis basis = SplineBasis::build(data.times(), 4);
  ModelDesign design = build_design(data, basis);

  PosteriorDraws draws;
  draws.layout = design.layout;
  draws.taxa_names = data.taxa_names();
  draws.covariate_names = {"x1", "x2"};
  draws.individual_labels = data.individual_labels();
  for (int s = 0; s < 20; ++s) {
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(design.layout.n_coef, truth.J);
    for (int j = 0; j < truth.J; ++j)
      for (int bl = 0; bl <= truth.P; ++bl)
        beta(design.layout.blocks[bl].offset, j) = truth.beta_true(j, bl, 0.0);
    draws.beta.push_back(beta);
    Eigen::MatrixXd r = truth.r_true;
    draws.r.push_back(r);
    draws.eta.push_back(truth.eta_true);
    draws.phi2.push_back(Eigen::VectorXd::Ones(truth.J));
    draws.kappa2.push_back(Eigen::VectorXd::Ones(truth.J));
    draws.tau2.push_back(Eigen::VectorXd::Ones(truth.J));
    draws.lambda2.push_back(Eigen::MatrixXd::Ones(design.layout.n_blocks(), truth.J));
  }

  ScoreTable table = score_draws(draws, truth, data, design);
  CHECK(table.ra95_active == doctest::Approx(1.0));
  CHECK(table.b95_active == doctest::Approx(1.0));
  CHECK(table.ra95_nonactive == doctest::Approx(1.0));
  CHECK(table.armse_active == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(table.mead == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("truth serialization round-trips") {
  auto [data, truth] = generate_dataset(6, 21);
  (void)data;
  SimulationTruth back = SimulationTruth::from_json(truth.to_json());
  CHECK(back.J == truth.J);
  CHECK(back.assignment == truth.assignment);
  CHECK(back.r_true == truth.r_true);
  CHECK(back.eta_true == truth.eta_true);
  CHECK(back.theta == truth.theta);
  CHECK(back.options.total_lo == truth.options.total_lo);
}
