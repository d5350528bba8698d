/*
 Random draw helpers shared by the sampler, the data generator, and tests.

 Conventions: Gamma is shape/rate, inverse-gamma density is
 x^{-shape-1} exp(-scale/x). One engine per chain; draws are deterministic
 given the seed and the build.
*/
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace funczidm {

using Rng = std::mt19937_64;

inline double runif(Rng& g, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline double rnorm(Rng& g, double mean = 0.0, double sd = 1.0) {
  return std::normal_distribution<double>(mean, sd)(g);
}

inline double rgamma(Rng& g, double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(g);
}

inline double rinvgamma(Rng& g, double shape, double scale) {
  return 1.0 / rgamma(g, shape, scale);
}

inline double rbeta(Rng& g, double a, double b) {
  double x = rgamma(g, a, 1.0);
  double y = rgamma(g, b, 1.0);
  return x / (x + y);
}

inline bool rbernoulli(Rng& g, double p) { return runif(g) < p; }

// inclusive on both ends
inline long rdunif(Rng& g, long lo, long hi) {
  return std::uniform_int_distribution<long>(lo, hi)(g);
}

// n trials over probs (need not be normalized); sequential binomial conditioning
inline Eigen::VectorXd rmultinomial(Rng& g, long n, const Eigen::VectorXd& probs) {
  const int k = static_cast<int>(probs.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(k);
  double remaining_mass = probs.sum();
  long remaining = n;
  for (int j = 0; j < k && remaining > 0; ++j) {
    if (j == k - 1) {
      out[j] = static_cast<double>(remaining);
      break;
    }
    double p = probs[j] <= 0.0 ? 0.0 : probs[j] / remaining_mass;
    if (p > 1.0) p = 1.0;
    long d = (p >= 1.0) ? remaining
                        : std::binomial_distribution<long>(remaining, p)(g);
    out[j] = static_cast<double>(d);
    remaining -= d;
    remaining_mass -= probs[j];
  }
  return out;
}

}  // namespace funczidm
