#include "funczidm/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "funczidm/errors.hpp"

namespace funczidm {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_number(const std::string& cell, const std::string& context) {
  if (cell.empty()) throw ValidationError("empty cell in column '" + context + "'");
  char* end = nullptr;
  double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size() || !std::isfinite(v))
    throw ValidationError("non-numeric cell '" + cell + "' in column '" + context + "'");
  return v;
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig cfg;
  if (j.contains("data")) cfg.data_path = j.at("data").get<std::string>();
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("id_column")) cfg.id_column = j.at("id_column").get<std::string>();
  if (j.contains("time_column")) cfg.time_column = j.at("time_column").get<std::string>();
  if (j.contains("taxa_min_individuals"))
    cfg.taxa_min_individuals = j.at("taxa_min_individuals").get<int>();
  if (j.contains("covariates")) {
    for (const auto& jc : j.at("covariates")) {
      CovariateConfig cc;
      cc.name = jc.at("name").get<std::string>();
      std::string type = jc.value("type", "continuous");
      cc.categorical = type == "categorical";
      if (cc.categorical) {
        if (!jc.contains("reference"))
          throw ValidationError("categorical covariate '" + cc.name +
                                "' needs a declared reference level");
        cc.reference = jc.at("reference").get<std::string>();
      } else {
        cc.scale = jc.value("scale", false);
      }
      cc.functional = jc.value("functional", true);
      cfg.covariates.push_back(cc);
    }
  }
  if (j.contains("hyper")) cfg.hyper = Hyperparameters::from_json(j.at("hyper"));
  if (j.contains("sampler")) cfg.sampler = SamplerConfig::from_json(j.at("sampler"));
  if (j.contains("inference_window")) {
    cfg.inference_t_lo = j.at("inference_window").at(0).get<double>();
    cfg.inference_t_hi = j.at("inference_window").at(1).get<double>();
  }
  return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw ValidationError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

LongitudinalDataset ingest_csv(const std::string& path, const RunConfig& config,
                               IngestReport* report) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open data file '" + path + "'");
  IngestReport local_report;
  IngestReport& rep = report ? *report : local_report;

  std::string line;
  if (!std::getline(is, line)) throw ValidationError("data file is empty");
  std::vector<std::string> header = split_csv_line(line);
  auto column_of = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw ValidationError("column '" + name + "' not found in '" + path + "'");
    return static_cast<int>(it - header.begin());
  };

  const int id_col = column_of(config.id_column);
  const int time_col = column_of(config.time_column);
  std::vector<int> cov_cols;
  std::set<int> claimed{id_col, time_col};
  for (const auto& cc : config.covariates) {
    int col = column_of(cc.name);
    cov_cols.push_back(col);
    claimed.insert(col);
  }
  std::vector<int> count_cols;
  std::vector<std::string> taxa_names;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (claimed.count(c)) continue;
    count_cols.push_back(c);
    taxa_names.push_back(header[c]);
  }
  if (count_cols.empty()) throw ValidationError("no count columns found after covariates");

  struct RawRecord {
    std::string id;
    double time;
    std::vector<std::string> cov_cells;
    std::vector<double> counts;
  };
  std::vector<RawRecord> raw;
  std::set<std::pair<std::string, double>> seen;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ValidationError("line " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(header.size()));
    RawRecord rec;
    rec.id = cells[id_col];
    rec.time = parse_number(cells[time_col], config.time_column);
    if (!seen.insert({rec.id, rec.time}).second)
      throw ValidationError("duplicate (id, time) pair at line " + std::to_string(line_no));
    for (int c : cov_cols) rec.cov_cells.push_back(cells[c]);
    double total = 0.0;
    for (std::size_t k = 0; k < count_cols.size(); ++k) {
      double v = parse_number(cells[count_cols[k]], taxa_names[k]);
      if (v < 0 || std::floor(v) != v)
        throw ValidationError("negative or non-integer count at line " +
                              std::to_string(line_no));
      rec.counts.push_back(v);
      total += v;
    }
    if (total < 1.0) {
      ++rep.rejected_records;
      rep.messages.push_back("rejected all-zero count row at line " + std::to_string(line_no));
      continue;
    }
    raw.push_back(std::move(rec));
  }
  if (raw.empty()) throw ValidationError("no valid records after ingestion");

  // taxa filter: keep taxa with at least K individuals having a nonzero count
  std::vector<std::set<std::string>> taxon_individuals(taxa_names.size());
  for (const auto& rec : raw)
    for (std::size_t j = 0; j < taxa_names.size(); ++j)
      if (rec.counts[j] > 0) taxon_individuals[j].insert(rec.id);
  std::vector<int> kept_taxa;
  for (std::size_t j = 0; j < taxa_names.size(); ++j) {
    if (static_cast<int>(taxon_individuals[j].size()) >= config.taxa_min_individuals)
      kept_taxa.push_back(static_cast<int>(j));
    else
      ++rep.dropped_taxa;
  }
  if (kept_taxa.empty()) throw ValidationError("taxa filter removed every taxon");

  // rows that lose all counts to the filter are rejected like raw all-zero rows
  std::vector<RawRecord> filtered;
  for (auto& rec : raw) {
    double total = 0.0;
    std::vector<double> kept_counts(kept_taxa.size());
    for (std::size_t k = 0; k < kept_taxa.size(); ++k) {
      kept_counts[k] = rec.counts[kept_taxa[k]];
      total += kept_counts[k];
    }
    if (total < 1.0) {
      ++rep.rejected_records;
      rep.messages.push_back("rejected record (" + rec.id +
                             ", t=" + std::to_string(rec.time) +
                             "): all counts in filtered taxa");
      continue;
    }
    rec.counts = std::move(kept_counts);
    filtered.push_back(std::move(rec));
  }
  raw = std::move(filtered);
  std::vector<std::string> kept_names;
  for (int j : kept_taxa) kept_names.push_back(taxa_names[j]);

  // expanded covariate columns: continuous as-is, categorical as indicators
  // for every non-reference level (sorted for determinism)
  std::vector<CovariateMeta> metas;
  std::vector<std::vector<double>> columns;  // per expanded covariate
  for (std::size_t ci = 0; ci < config.covariates.size(); ++ci) {
    const CovariateConfig& cc = config.covariates[ci];
    if (!cc.categorical) {
      std::vector<double> col(raw.size());
      for (std::size_t m = 0; m < raw.size(); ++m)
        col[m] = parse_number(raw[m].cov_cells[ci], cc.name);
      metas.push_back(CovariateMeta{cc.name, cc.functional, cc.scale, 0.0, 1.0});
      columns.push_back(std::move(col));
    } else {
      std::set<std::string> levels;
      for (const auto& rec : raw) levels.insert(rec.cov_cells[ci]);
      if (!levels.count(cc.reference))
        throw ValidationError("reference level '" + cc.reference + "' of '" + cc.name +
                              "' never occurs in the data");
      for (const std::string& level : levels) {
        if (level == cc.reference) continue;
        std::vector<double> col(raw.size());
        for (std::size_t m = 0; m < raw.size(); ++m)
          col[m] = raw[m].cov_cells[ci] == level ? 1.0 : 0.0;
        metas.push_back(CovariateMeta{cc.name + "=" + level, cc.functional, false, 0.0, 1.0});
        columns.push_back(std::move(col));
      }
    }
  }

  // center/scale flagged columns across all observations
  for (std::size_t p = 0; p < metas.size(); ++p) {
    if (!metas[p].scaled) continue;
    double mean = 0.0;
    for (double v : columns[p]) mean += v;
    mean /= columns[p].size();
    double ss = 0.0;
    for (double v : columns[p]) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / std::max<std::size_t>(1, columns[p].size() - 1));
    if (!(sd > 0))
      throw ValidationError("covariate '" + metas[p].name + "' is constant; cannot scale");
    for (double& v : columns[p]) v = (v - mean) / sd;
    metas[p].center = mean;
    metas[p].scale = sd;
  }

  // group records by individual (order of first appearance), sort times
  std::vector<std::string> individuals;
  std::map<std::string, int> individual_index;
  for (const auto& rec : raw)
    if (!individual_index.count(rec.id)) {
      individual_index[rec.id] = static_cast<int>(individuals.size());
      individuals.push_back(rec.id);
    }
  std::vector<int> order(raw.size());
  for (std::size_t m = 0; m < raw.size(); ++m) order[m] = static_cast<int>(m);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    int ia = individual_index[raw[a].id], ib = individual_index[raw[b].id];
    if (ia != ib) return ia < ib;
    return raw[a].time < raw[b].time;
  });

  const int n_rec = static_cast<int>(raw.size());
  std::vector<int> record_individual(n_rec);
  std::vector<double> record_time(n_rec);
  Eigen::MatrixXd x(n_rec, static_cast<int>(metas.size()));
  Eigen::MatrixXd z(n_rec, static_cast<int>(kept_names.size()));
  for (int m = 0; m < n_rec; ++m) {
    const RawRecord& rec = raw[order[m]];
    record_individual[m] = individual_index[rec.id];
    record_time[m] = rec.time;
    for (std::size_t p = 0; p < metas.size(); ++p) x(m, static_cast<int>(p)) = columns[p][order[m]];
    for (std::size_t j = 0; j < kept_names.size(); ++j) z(m, static_cast<int>(j)) = rec.counts[j];
  }

  for (const std::string& msg : rep.messages) std::cerr << "[ingest] " << msg << '\n';
  return LongitudinalDataset(std::move(individuals), std::move(kept_names), std::move(metas),
                             std::move(record_individual), std::move(record_time), std::move(x),
                             std::move(z));
}

}  // namespace funczidm
