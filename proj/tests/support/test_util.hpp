/*
 Shared test oracles: a recursive B-spline reference, digamma, quadrature,
 one-sample KS, and batch-means standard errors for autocorrelated chains.
 Everything here is deliberately independent of the library implementations.
*/
#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <utility>
#include <vector>

namespace testutil {

// Textbook recursive Cox-de Boor definition; O(2^degree) per call.
inline double bspline_recursive(const std::vector<double>& knots, int i, int degree, double x) {
  if (degree == 0) return (knots[i] <= x && x < knots[i + 1]) ? 1.0 : 0.0;
  double left = 0.0, right = 0.0;
  double dl = knots[i + degree] - knots[i];
  double dr = knots[i + degree + 1] - knots[i + 1];
  if (dl > 0.0) left = (x - knots[i]) / dl * bspline_recursive(knots, i, degree - 1, x);
  if (dr > 0.0)
    right = (knots[i + degree + 1] - x) / dr * bspline_recursive(knots, i + 1, degree - 1, x);
  return left + right;
}

inline double digamma(double x) {
  double acc = 0.0;
  while (x < 6.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  double inv = 1.0 / x, inv2 = inv * inv;
  return acc + std::log(x) - 0.5 * inv -
         inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0));
}

// Composite Gauss-Legendre (5-point) on [a, b] with n panels.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        int panels = 200) {
  static const double nodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                  0.5384693101056831, 0.9061798459386640};
  static const double weights[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                    0.4786286704993665, 0.2369268850561891};
  double h = (b - a) / panels, total = 0.0;
  for (int p = 0; p < panels; ++p) {
    double mid = a + (p + 0.5) * h;
    for (int k = 0; k < 5; ++k) total += weights[k] * f(mid + 0.5 * h * nodes[k]);
  }
  return total * 0.5 * h;
}

// One-sample Kolmogorov-Smirnov p-value (asymptotic) against a given CDF.
inline double ks_pvalue(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    double f = cdf(samples[k]);
    d = std::max(d, std::abs(f - static_cast<double>(k) / n));
    d = std::max(d, std::abs(static_cast<double>(k + 1) / n - f));
  }
  double lambda = d * (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n));
  double p = 0.0;
  for (int k = 1; k <= 100; ++k)
    p += 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

// Batch-means mean and standard error for a (possibly autocorrelated) chain.
inline std::pair<double, double> batch_mean_se(const std::vector<double>& chain) {
  const std::size_t n = chain.size();
  const std::size_t n_batches = static_cast<std::size_t>(std::floor(std::sqrt(double(n))));
  const std::size_t batch = n / n_batches;
  std::vector<double> means;
  for (std::size_t b = 0; b < n_batches; ++b) {
    double s = 0.0;
    for (std::size_t k = b * batch; k < (b + 1) * batch; ++k) s += chain[k];
    means.push_back(s / batch);
  }
  double grand = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
  double var = 0.0;
  for (double m : means) var += (m - grand) * (m - grand);
  var /= (means.size() - 1);
  return {grand, std::sqrt(var / means.size())};
}

// z-score for the difference of two independent estimates with standard errors.
inline double z_score(double m1, double se1, double m2, double se2) {
  return (m1 - m2) / std::sqrt(se1 * se1 + se2 * se2);
}

inline double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

inline double var_of(const std::vector<double>& v) {
  double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / (v.size() - 1);
}

}  // namespace testutil
