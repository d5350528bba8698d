/*
 CSV ingestion and run configuration: covariate declarations (functional or
 constant, scaling, categorical expansion against a reference level), the
 minimum-individuals taxa filter, and record validation.
*/
#pragma once

#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "funczidm/data.hpp"
#include "funczidm/model.hpp"
#include "funczidm/sampler.hpp"

namespace funczidm {

struct CovariateConfig {
  std::string name;
  bool categorical = false;
  std::string reference;  // categorical: the level absorbed into the baseline
  bool scale = false;     // continuous: center and scale across all observations
  bool functional = true;
};

struct RunConfig {
  std::string data_path;
  std::string output_dir = ".";
  std::string id_column = "id";
  std::string time_column = "time";
  std::vector<CovariateConfig> covariates;
  int taxa_min_individuals = 5;
  Hyperparameters hyper;
  SamplerConfig sampler;
  double inference_t_lo = std::numeric_limits<double>::quiet_NaN();
  double inference_t_hi = std::numeric_limits<double>::quiet_NaN();

  static RunConfig from_json_file(const std::string& path);
  static RunConfig from_json(const nlohmann::json& j);
};

struct IngestReport {
  int rejected_records = 0;  // all-zero count rows dropped with a message
  int dropped_taxa = 0;      // below the minimum-individuals threshold
  std::vector<std::string> messages;
};

// Long-format CSV: id column, time column, declared covariate columns, and
// every remaining column is a taxon count.
LongitudinalDataset ingest_csv(const std::string& path, const RunConfig& config,
                               IngestReport* report = nullptr);

}  // namespace funczidm
