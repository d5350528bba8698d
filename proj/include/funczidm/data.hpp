/*
 Long-format repeated-measures count data: per record an individual, a time,
 a covariate vector, and a count vector over the taxa.
*/
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace funczidm {

struct CovariateMeta {
  std::string name;
  bool functional = true;  // false: constant coefficient beta_jp(t) = beta_jp
  bool scaled = false;     // centered and scaled across all observations
  double center = 0.0;     // applied transform: (x - center) / scale
  double scale = 1.0;
};

class LongitudinalDataset {
 public:
  // records must be grouped by individual; times within an individual distinct;
  // every record needs a positive total count.
  LongitudinalDataset(std::vector<std::string> individual_labels,
                      std::vector<std::string> taxa_names,
                      std::vector<CovariateMeta> covariates,
                      std::vector<int> record_individual,
                      std::vector<double> record_time,
                      Eigen::MatrixXd x,   // records x P
                      Eigen::MatrixXd z);  // records x J, nonnegative integers

  int n_individuals() const { return static_cast<int>(individual_labels_.size()); }
  int n_taxa() const { return static_cast<int>(taxa_names_.size()); }
  int n_covariates() const { return static_cast<int>(covariates_.size()); }
  int n_records() const { return static_cast<int>(record_time_.size()); }

  const std::vector<std::string>& individual_labels() const { return individual_labels_; }
  const std::vector<std::string>& taxa_names() const { return taxa_names_; }
  const std::vector<CovariateMeta>& covariates() const { return covariates_; }

  int individual_of(int record) const { return record_individual_[record]; }
  double time_of(int record) const { return record_time_[record]; }
  const std::vector<double>& times() const { return record_time_; }
  // [begin, end) record range of one individual
  std::pair<int, int> records_of(int individual) const { return individual_range_[individual]; }

  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::MatrixXd& z() const { return z_; }
  const Eigen::VectorXd& z_dot() const { return z_dot_; }
  // true iff individual i has a positive count for taxon j at any time
  bool any_positive(int i, int j) const { return any_positive_(i, j) != 0; }

  // Replace the count table (test harnesses that regenerate data against a
  // fixed design); derived quantities are recomputed.
  void set_counts(Eigen::MatrixXd z);

 private:
  std::vector<std::string> individual_labels_;
  std::vector<std::string> taxa_names_;
  std::vector<CovariateMeta> covariates_;
  std::vector<int> record_individual_;
  std::vector<double> record_time_;
  Eigen::MatrixXd x_, z_;

  Eigen::VectorXd z_dot_;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> any_positive_;
  std::vector<std::pair<int, int>> individual_range_;

  void validate_and_index();
  void refresh_count_summaries();
};

}  // namespace funczidm
