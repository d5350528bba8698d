#include "funczidm/basis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "funczidm/errors.hpp"

namespace funczidm {

double sorted_quantile(const std::vector<double>& v, double prob) {
  const std::size_t n = v.size();
  if (n == 1) return v[0];
  double h = static_cast<double>(n - 1) * prob;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo >= n - 1) return v[n - 1];
  double frac = h - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

SplineBasis SplineBasis::build(const std::vector<double>& observed_times, int df) {
  if (df < 4)
    throw ValidationError("insufficient degrees of freedom: basis requires D >= 4, got D=" +
                          std::to_string(df));
  std::set<double> distinct(observed_times.begin(), observed_times.end());
  if (distinct.size() < 2)
    throw ValidationError("basis requires at least 2 distinct observed times");
  std::vector<double> sorted(distinct.begin(), distinct.end());

  const int n_interior = df - 3;
  std::vector<double> interior(n_interior);
  for (int k = 0; k < n_interior; ++k)
    interior[k] = sorted_quantile(sorted, static_cast<double>(k + 1) / (n_interior + 1));

  return SplineBasis(df, std::move(interior), sorted.front(), sorted.back());
}

SplineBasis::SplineBasis(int df, std::vector<double> interior_knots, double t_min, double t_max)
    : df_(df), interior_knots_(std::move(interior_knots)), t_min_(t_min), t_max_(t_max) {
  if (df_ < 4) throw ValidationError("insufficient degrees of freedom");
  if (!(t_min_ < t_max_)) throw ValidationError("basis boundary must satisfy t_min < t_max");
  if (static_cast<int>(interior_knots_.size()) != df_ - 3)
    throw ValidationError("cubic basis with df=" + std::to_string(df_) + " needs " +
                          std::to_string(df_ - 3) + " interior knots");
  for (double k : interior_knots_)
    if (!(k > t_min_ && k < t_max_))
      throw ValidationError("interior knots must lie strictly inside the boundary");
  if (!std::is_sorted(interior_knots_.begin(), interior_knots_.end()))
    throw ValidationError("interior knots must be sorted");
  build_knot_vector();
}

void SplineBasis::build_knot_vector() {
  knots_.clear();
  knots_.reserve(interior_knots_.size() + 8);
  for (int i = 0; i < 4; ++i) knots_.push_back(t_min_);
  knots_.insert(knots_.end(), interior_knots_.begin(), interior_knots_.end());
  for (int i = 0; i < 4; ++i) knots_.push_back(t_max_);
}

Eigen::RowVectorXd SplineBasis::evaluate_full(double t) const {
  if (knots_.empty()) throw ValidationError("basis is not initialized");
  if (t < t_min_ || t > t_max_) {
    clamp_count_.fetch_add(1, std::memory_order_relaxed);
    t = std::clamp(t, t_min_, t_max_);
  }
  const int n_basis = df_ + 1;  // interior + 4
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(n_basis);

  // knot span k with knots_[k] <= t < knots_[k+1]; t == t_max falls in the
  // last non-degenerate span
  int k = 3;
  const int k_max = n_basis - 1;  // == interior + 3
  while (k < k_max && t >= knots_[k + 1]) ++k;

  // Cox-de Boor triangular scheme: the 4 nonzero cubic values at t
  double vals[4] = {1.0, 0.0, 0.0, 0.0};
  double left[4], right[4];
  for (int d = 1; d <= kDegree; ++d) {
    left[d] = t - knots_[k + 1 - d];
    right[d] = knots_[k + d] - t;
    double saved = 0.0;
    for (int r = 0; r < d; ++r) {
      double denom = right[r + 1] + left[d - r];
      double term = vals[r] / denom;
      vals[r] = saved + right[r + 1] * term;
      saved = left[d - r] * term;
    }
    vals[d] = saved;
  }
  for (int i = 0; i <= kDegree; ++i) out[k - kDegree + i] = vals[i];
  return out;
}

Eigen::RowVectorXd SplineBasis::evaluate(double t) const {
  Eigen::RowVectorXd full = evaluate_full(t);
  Eigen::RowVectorXd row(df_ + 1);
  row[0] = 1.0;
  row.segment(1, df_) = full.segment(1, df_);
  return row;
}

nlohmann::json SplineBasis::to_json() const {
  return nlohmann::json{{"degree", kDegree},
                        {"df", df_},
                        {"interior_knots", interior_knots_},
                        {"boundary", {t_min_, t_max_}}};
}

SplineBasis SplineBasis::from_json(const nlohmann::json& j) {
  return SplineBasis(j.at("df").get<int>(),
                     j.at("interior_knots").get<std::vector<double>>(),
                     j.at("boundary").at(0).get<double>(),
                     j.at("boundary").at(1).get<double>());
}

}  // namespace funczidm
