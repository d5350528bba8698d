#include "funczidm/data.hpp"

#include <cmath>
#include <set>

#include "funczidm/errors.hpp"

namespace funczidm {

LongitudinalDataset::LongitudinalDataset(std::vector<std::string> individual_labels,
                                         std::vector<std::string> taxa_names,
                                         std::vector<CovariateMeta> covariates,
                                         std::vector<int> record_individual,
                                         std::vector<double> record_time,
                                         Eigen::MatrixXd x, Eigen::MatrixXd z)
    : individual_labels_(std::move(individual_labels)),
      taxa_names_(std::move(taxa_names)),
      covariates_(std::move(covariates)),
      record_individual_(std::move(record_individual)),
      record_time_(std::move(record_time)),
      x_(std::move(x)),
      z_(std::move(z)) {
  validate_and_index();
}

void LongitudinalDataset::validate_and_index() {
  const int n_rec = n_records();
  const int n_ind = n_individuals();
  if (n_rec == 0) throw ValidationError("dataset has no records");
  if (static_cast<int>(record_individual_.size()) != n_rec ||
      x_.rows() != n_rec || z_.rows() != n_rec)
    throw ValidationError("record arrays have inconsistent lengths");
  if (x_.cols() != n_covariates())
    throw ValidationError("covariate matrix width does not match covariate metadata");
  if (z_.cols() != n_taxa())
    throw ValidationError("count matrix width does not match taxa names");

  individual_range_.assign(n_ind, {-1, -1});
  int prev = -1;
  for (int m = 0; m < n_rec; ++m) {
    int i = record_individual_[m];
    if (i < 0 || i >= n_ind) throw ValidationError("record references unknown individual");
    if (i != prev) {
      if (individual_range_[i].first != -1)
        throw ValidationError("records must be grouped by individual");
      individual_range_[i].first = m;
      prev = i;
    }
    individual_range_[i].second = m + 1;
  }
  for (int i = 0; i < n_ind; ++i) {
    auto [b, e] = individual_range_[i];
    if (b < 0) throw ValidationError("individual '" + individual_labels_[i] + "' has no records");
    std::set<double> times;
    for (int m = b; m < e; ++m) times.insert(record_time_[m]);
    if (static_cast<int>(times.size()) != e - b)
      throw ValidationError("individual '" + individual_labels_[i] + "' has duplicate times");
  }

  for (int m = 0; m < n_rec; ++m)
    for (int j = 0; j < n_taxa(); ++j) {
      double v = z_(m, j);
      if (v < 0 || std::floor(v) != v || !std::isfinite(v))
        throw ValidationError("counts must be nonnegative integers");
    }

  for (int p = 0; p < n_covariates(); ++p) {
    if (!covariates_[p].scaled) continue;
    double mean = x_.col(p).mean();
    double sd = std::sqrt((x_.col(p).array() - mean).square().sum() /
                          std::max(1, n_rec - 1));
    if (std::abs(mean) > 1e-8 || std::abs(sd - 1.0) > 1e-8)
      throw ValidationError("covariate '" + covariates_[p].name +
                            "' is flagged scaled but has pooled mean/sd away from 0/1");
  }

  refresh_count_summaries();
}

void LongitudinalDataset::refresh_count_summaries() {
  const int n_rec = n_records();
  z_dot_ = z_.rowwise().sum();
  for (int m = 0; m < n_rec; ++m)
    if (z_dot_[m] < 1.0)
      throw ValidationError("record " + std::to_string(m) +
                            " has an all-zero count row (rejected at ingestion)");
  any_positive_.setZero(n_individuals(), n_taxa());
  for (int m = 0; m < n_rec; ++m) {
    int i = record_individual_[m];
    for (int j = 0; j < n_taxa(); ++j)
      if (z_(m, j) > 0) any_positive_(i, j) = 1;
  }
}

void LongitudinalDataset::set_counts(Eigen::MatrixXd z) {
  if (z.rows() != z_.rows() || z.cols() != z_.cols())
    throw ValidationError("replacement count table has different shape");
  z_ = std::move(z);
  refresh_count_summaries();
}

}  // namespace funczidm
