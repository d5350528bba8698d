#include <doctest.h>

#include <cmath>

#include "funczidm/densities.hpp"
#include "funczidm/errors.hpp"
#include "funczidm/model.hpp"
#include "support/fixtures.hpp"
#include "support/test_util.hpp"

using namespace funczidm;

TEST_CASE("shrinkage variance") {
  CHECK(shrinkage_variance(1.0, 1.0, 1.0) == doctest::Approx(0.5));
  // saturates at the slab scale when the local-global product explodes
  CHECK(shrinkage_variance(4.0, 1e12, 1.0) == doctest::Approx(4.0).epsilon(1e-6));
  // direct formula evaluation away from the limits
  double kappa2 = 9.0, lt = 0.01;
  CHECK(shrinkage_variance(kappa2, lt, 1.0) ==
        doctest::Approx(kappa2 * lt / (kappa2 + lt)).epsilon(1e-12));
  CHECK(shrinkage_variance(2.0, 3.0, 0.5) > 0.0);
  CHECK(shrinkage_variance(2.0, 3.0, 0.5) < std::min(2.0, 1.5));
}

TEST_CASE("log concentration: constants survive") {
  auto data = fixtures::small_data(3, 2, 2, 2, 9);
  SplineBasis basis = SplineBasis::build(data.times(), 4);
  ModelDesign design = build_design(data, basis);
  Hyperparameters hyper;
  Rng rng(1);
  ParameterState st = fixtures::random_state(data, design, hyper, rng);

  st.beta.setZero();
  st.r.setZero();
  st.beta(design.layout.blocks[0].offset, 0) = 0.7;
  st.r(data.individual_of(0), 0) = 0.1;
  CHECK(log_concentration(st, design, data, 0, 0) == doctest::Approx(0.8));
}

TEST_CASE("log concentration: constant-coefficient covariate is a plain linear term") {
  auto data = fixtures::small_data(3, 2, 2, 2, 10, /*with_constant=*/true);
  SplineBasis basis = SplineBasis::build(data.times(), 4);
  ModelDesign design = build_design(data, basis);
  REQUIRE_FALSE(design.layout.blocks[2].functional);
  REQUIRE(design.layout.blocks[2].size == 1);

  Hyperparameters hyper;
  Rng rng(2);
  ParameterState st = fixtures::random_state(data, design, hyper, rng);
  st.beta.setZero();
  st.r.setZero();
  st.beta(design.layout.blocks[2].offset, 1) = 0.5;

  int record = 3;
  double x = data.x()(record, 1);
  CHECK(log_concentration(st, design, data, record, 1) == doctest::Approx(0.5 * x));
}

TEST_CASE("log concentration matches a term-by-term expansion") {
  auto data = fixtures::small_data(4, 3, 3, 2, 11, /*with_constant=*/true);
  SplineBasis basis = SplineBasis::build(data.times(), 5);
  ModelDesign design = build_design(data, basis);
  Hyperparameters hyper;
  hyper.D = 5;
  Rng rng(3);
  ParameterState st = fixtures::random_state(data, design, hyper, rng);

  for (int m = 0; m < data.n_records(); ++m) {
    double t = data.time_of(m);
    Eigen::RowVectorXd b = basis.evaluate(t);
    for (int j = 0; j < data.n_taxa(); ++j) {
      // expand every spline coefficient independently of the design matrix
      double expected = 0.0;
      for (int bl = 0; bl < design.layout.n_blocks(); ++bl) {
        const CoefBlock& blk = design.layout.blocks[bl];
        double coef = 0.0;
        if (blk.functional)
          for (int d = 0; d < blk.size; ++d) coef += b[d] * st.beta(blk.offset + d, j);
        else
          coef = st.beta(blk.offset, j);
        expected += coef * (blk.covariate < 0 ? 1.0 : data.x()(m, blk.covariate));
      }
      expected += st.r(data.individual_of(m), j);
      CHECK(log_concentration(st, design, data, m, j) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("log joint shifts correctly in one random intercept") {
  auto data = fixtures::small_data(4, 3, 3, 2, 12);
  SplineBasis basis = SplineBasis::build(data.times(), 4);
  ModelDesign design = build_design(data, basis);
  Hyperparameters hyper;
  Rng rng(4);
  ParameterState st = fixtures::random_state(data, design, hyper, rng);

  const int i = 1, j = 0;
  const double delta = 0.137;
  ParameterState shifted = st;
  shifted.r(i, j) += delta;

  double diff = log_joint(shifted, data, design, hyper) - log_joint(st, data, design, hyper);

  // independent per-term evaluation of everything that moves with r_ij
  double expected = log_normal_pdf(st.r(i, j) + delta, 0.0, st.phi2[j]) -
                    log_normal_pdf(st.r(i, j), 0.0, st.phi2[j]);
  if (st.eta(i, j) == 1) {
    auto [b, e] = data.records_of(i);
    for (int m = b; m < e; ++m) {
      double g = std::exp(log_concentration(st, design, data, m, j));
      double g_new = g * std::exp(delta);
      expected += (g_new - g) * std::log(st.c(m, j)) - std::lgamma(g_new) + std::lgamma(g);
    }
  }
  CHECK(diff == doctest::Approx(expected).epsilon(1e-8));
}

TEST_CASE("finite differences match the analytic coefficient gradient") {
  auto data = fixtures::small_data(4, 3, 3, 2, 13);
  SplineBasis basis = SplineBasis::build(data.times(), 4);
  ModelDesign design = build_design(data, basis);
  Hyperparameters hyper;
  Rng rng(5);

  for (int rep = 0; rep < 5; ++rep) {
    ParameterState st = fixtures::random_state(data, design, hyper, rng);
    int j = static_cast<int>(rdunif(rng, 0, data.n_taxa() - 1));
    int block = static_cast<int>(rdunif(rng, 0, design.layout.n_blocks() - 1));
    const CoefBlock& blk = design.layout.blocks[block];
    int d = static_cast<int>(rdunif(rng, 0, blk.size - 1));
    int q = blk.offset + d;

    double analytic = 0.0;
    for (int m = 0; m < data.n_records(); ++m) {
      if (st.eta(data.individual_of(m), j) == 0) continue;
      double g = std::exp(log_concentration(st, design, data, m, j));
      analytic += (std::log(st.c(m, j)) - testutil::digamma(g)) * g * design.w(m, q);
    }
    double var = (block == 0 && d == 0)
                     ? 1.0
                     : shrinkage_variance(st.kappa2[j], st.lambda2(block, j), st.tau2[j]);
    analytic -= st.beta(q, j) / var;

    const double h = 1e-5;
    ParameterState up = st, down = st;
    up.beta(q, j) += h;
    down.beta(q, j) -= h;
    double fd = (log_joint(up, data, design, hyper) - log_joint(down, data, design, hyper)) /
                (2.0 * h);
    CHECK(fd == doctest::Approx(analytic).epsilon(1e-5));
  }
}

TEST_CASE("structural zero toggle changes only the c terms and the column prior") {
  auto data = fixtures::small_data(5, 3, 4, 2, 14);
  SplineBasis basis = SplineBasis::build(data.times(), 4);
  ModelDesign design = build_design(data, basis);
  Hyperparameters hyper;
  Rng rng(6);
  ParameterState st = fixtures::random_state(data, design, hyper, rng);

  // find an eligible pair currently at risk
  int pick_i = -1, pick_j = -1;
  for (int j = 0; j < data.n_taxa() && pick_i < 0; ++j)
    for (int i = 0; i < data.n_individuals() && pick_i < 0; ++i)
      if (!data.any_positive(i, j) && st.eta(i, j) == 1) {
        pick_i = i;
        pick_j = j;
      }
  REQUIRE(pick_i >= 0);

  ParameterState off = st;
  off.eta(pick_i, pick_j) = 0;
  auto [b, e] = data.records_of(pick_i);
  for (int m = b; m < e; ++m) off.c(m, pick_j) = 0.0;

  double diff = log_joint(off, data, design, hyper) - log_joint(st, data, design, hyper);
  double expected = log_joint_eta_column(off, hyper, pick_j) -
                    log_joint_eta_column(st, hyper, pick_j) -
                    log_joint_c_prior_pair(st, design, data, pick_i, pick_j);
  for (int m = b; m < e; ++m) expected += st.u[m] * st.c(m, pick_j);  // e^{-uT} shrinks
  CHECK(diff == doctest::Approx(expected).epsilon(1e-8));
}

TEST_CASE("positive count under a structural zero is rejected") {
  auto data = fixtures::small_data(3, 2, 2, 1, 15);
  SplineBasis basis = SplineBasis::build(data.times(), 4);
  ModelDesign design = build_design(data, basis);
  Hyperparameters hyper;
  Rng rng(7);
  ParameterState st = fixtures::random_state(data, design, hyper, rng);
  // taxon 0 always has positive counts in the fixture
  st.eta(0, 0) = 0;
  auto [b, e] = data.records_of(0);
  for (int m = b; m < e; ++m) st.c(m, 0) = 0.0;
  CHECK_THROWS_AS(log_joint(st, data, design, hyper), ValidationError);
}

TEST_CASE("log joint decomposes additively over the cached term families") {
  auto data = fixtures::small_data(4, 3, 3, 2, 16);
  SplineBasis basis = SplineBasis::build(data.times(), 4);
  ModelDesign design = build_design(data, basis);
  Hyperparameters hyper;
  Rng rng(8);
  ParameterState st = fixtures::random_state(data, design, hyper, rng);

  double total = 0.0;
  for (int m = 0; m < data.n_records(); ++m) total += log_joint_record_term(st, data, m);
  for (int j = 0; j < data.n_taxa(); ++j) {
    for (int i = 0; i < data.n_individuals(); ++i)
      total += log_joint_c_prior_pair(st, design, data, i, j);
    total += log_joint_eta_column(st, hyper, j);
    total += log_joint_priors_taxon(st, design.layout, hyper, j);
  }
  CHECK(total == doctest::Approx(log_joint(st, data, design, hyper)).epsilon(1e-8));
}

TEST_CASE("compositions derived from a valid state live on the at-risk simplex") {
  auto data = fixtures::small_data(4, 3, 4, 2, 17);
  SplineBasis basis = SplineBasis::build(data.times(), 4);
  ModelDesign design = build_design(data, basis);
  Hyperparameters hyper;
  Rng rng(9);
  ParameterState st = fixtures::random_state(data, design, hyper, rng);
  st.validate(data, design.layout);

  for (int m = 0; m < data.n_records(); ++m) {
    double t = st.c.row(m).sum();
    double psi_sum = 0.0;
    for (int j = 0; j < data.n_taxa(); ++j) {
      double psi = st.c(m, j) / t;
      if (st.eta(data.individual_of(m), j) == 1) CHECK(psi > 0.0);
      else CHECK(psi == 0.0);
      psi_sum += psi;
    }
    CHECK(psi_sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("augmented joint integrates back to the Dirichlet-multinomial mass") {
  // one individual, one record, two taxa; integrate the augmented joint over
  // (u, c1, c2) numerically and compare with the closed-form DM pmf
  const double gamma1 = 1.3, gamma2 = 0.8;
  auto dm_pmf = [&](long z1, long z2) {
    long zdot = z1 + z2;
    double coef = std::lgamma(zdot + 1.0) - std::lgamma(z1 + 1.0) - std::lgamma(z2 + 1.0);
    double num = std::lgamma(gamma1 + z1) + std::lgamma(gamma2 + z2) -
                 std::lgamma(gamma1 + gamma2 + zdot);
    double den = std::lgamma(gamma1) + std::lgamma(gamma2) - std::lgamma(gamma1 + gamma2);
    return std::exp(coef + num - den);
  };

  auto quad_pmf = [&](long z1, long z2) {
    long zdot = z1 + z2;
    // integrand in (c1, c2): Gamma priors times the u-integral of the
    // augmented record factor u^{zdot-1} exp(-uT) / Gamma(zdot)
    auto inner_u = [&](double t_sum) {
      return testutil::integrate(
          [&](double y) {
            double u = y / (1.0 - y);
            double jac = 1.0 / ((1.0 - y) * (1.0 - y));
            double log_f = (zdot - 1.0) * std::log(u) - u * t_sum - std::lgamma(zdot);
            return std::exp(log_f) * jac;
          },
          1e-12, 1.0 - 1e-12, 120);
    };
    double coef = std::exp(std::lgamma(zdot + 1.0) - std::lgamma(z1 + 1.0) -
                           std::lgamma(z2 + 1.0));
    auto integrand = [&](double c1, double c2) {
      double t_sum = c1 + c2;
      double log_c_terms = z1 * std::log(c1) + z2 * std::log(c2);
      double log_prior = log_gamma_pdf(c1, gamma1, 1.0) + log_gamma_pdf(c2, gamma2, 1.0);
      return std::exp(log_c_terms + log_prior) * inner_u(t_sum);
    };
    return coef * testutil::integrate(
                      [&](double y1) {
                        double c1 = y1 / (1.0 - y1);
                        double j1 = 1.0 / ((1.0 - y1) * (1.0 - y1));
                        return j1 * testutil::integrate(
                                        [&](double y2) {
                                          double c2 = y2 / (1.0 - y2);
                                          double j2 = 1.0 / ((1.0 - y2) * (1.0 - y2));
                                          return j2 * integrand(c1, c2);
                                        },
                                        1e-12, 1.0 - 1e-12, 60);
                      },
                      1e-12, 1.0 - 1e-12, 60);
  };

  for (auto [z1, z2] : {std::pair<long, long>{3, 0}, {2, 2}, {1, 3}, {4, 0}}) {
    double exact = dm_pmf(z1, z2);
    double numeric = quad_pmf(z1, z2);
    CHECK(std::abs(numeric - exact) / exact < 1e-2);
  }
}
