/*
 Cubic B-spline basis for the functional coefficients.

 Every functional coefficient is beta_jp(t) = b(t) . beta*_jp with
 b(t) = [1, b_1(t), ..., b_D(t)]: the full clamped cubic basis has D+1
 functions, the first one is dropped, and a constant 1 is prepended so a
 coefficient vector [beta0, 0, ..., 0] yields the constant function beta0.
*/
#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace funczidm {

class SplineBasis {
 public:
  static constexpr int kDegree = 3;

  // Boundary knots at min/max of the observed times, D-3 interior knots at
  // equally spaced quantiles of the distinct times. Requires D >= 4 and at
  // least 2 distinct times.
  static SplineBasis build(const std::vector<double>& observed_times, int df);

  // Explicit construction from a stored spec (chain metadata round-trip).
  SplineBasis(int df, std::vector<double> interior_knots, double t_min, double t_max);

  // Uninitialized placeholder; evaluation throws until a real basis is assigned.
  SplineBasis() = default;

  // the clamp counter is per-instance diagnostics; copies start from its value
  SplineBasis(const SplineBasis& o)
      : df_(o.df_), interior_knots_(o.interior_knots_), t_min_(o.t_min_), t_max_(o.t_max_),
        knots_(o.knots_), clamp_count_(o.clamp_count_.load()) {}
  SplineBasis& operator=(const SplineBasis& o) {
    df_ = o.df_;
    interior_knots_ = o.interior_knots_;
    t_min_ = o.t_min_;
    t_max_ = o.t_max_;
    knots_ = o.knots_;
    clamp_count_.store(o.clamp_count_.load());
    return *this;
  }

  // Row [1, b_1(t), ..., b_D(t)], length df()+1. t outside the boundary is
  // clamped and counted.
  Eigen::RowVectorXd evaluate(double t) const;

  // All df()+1 clamped cubic basis functions (pre-drop); sums to 1 on the
  // boundary interval. Used by partition-of-unity checks and tests.
  Eigen::RowVectorXd evaluate_full(double t) const;

  int df() const { return df_; }
  int columns() const { return df_; }
  double t_min() const { return t_min_; }
  double t_max() const { return t_max_; }
  const std::vector<double>& interior_knots() const { return interior_knots_; }
  std::uint64_t clamp_count() const { return clamp_count_.load(); }

  nlohmann::json to_json() const;
  static SplineBasis from_json(const nlohmann::json& j);

  bool operator==(const SplineBasis& o) const {
    return df_ == o.df_ && interior_knots_ == o.interior_knots_ &&
           t_min_ == o.t_min_ && t_max_ == o.t_max_;
  }

 private:
  int df_ = 0;
  std::vector<double> interior_knots_;
  double t_min_ = 0.0, t_max_ = 0.0;
  std::vector<double> knots_;  // clamped: 4x t_min, interior, 4x t_max
  mutable std::atomic<std::uint64_t> clamp_count_{0};

  void build_knot_vector();
};

// Type-7 quantile of a sorted vector (R default), used for knot placement.
double sorted_quantile(const std::vector<double>& sorted_values, double prob);

}  // namespace funczidm
