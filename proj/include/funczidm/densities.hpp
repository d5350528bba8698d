/*
 Log-density kernels used by the joint and the samplers.
*/
#pragma once

#include <cmath>

namespace funczidm {

inline double log_normal_pdf(double x, double mean, double var) {
  double d = x - mean;
  return -0.5 * std::log(2.0 * M_PI * var) - d * d / (2.0 * var);
}

// density x^{shape-1} exp(-rate x) rate^shape / Gamma(shape)
inline double log_gamma_pdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

// density x^{-shape-1} exp(-scale/x) scale^shape / Gamma(shape)
inline double log_invgamma_pdf(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

inline double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

}  // namespace funczidm
