/*
 Command-line surface: fit / simulate / score / infer / export.

 Exit codes: 0 success, 2 validation error, 3 divergence abort.
*/
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "funczidm/draws_io.hpp"
#include "funczidm/errors.hpp"
#include "funczidm/inference.hpp"
#include "funczidm/ingest.hpp"
#include "funczidm/sampler.hpp"
#include "funczidm/simgen.hpp"

namespace fs = std::filesystem;
using namespace funczidm;

namespace {

struct FitArgs {
  std::string config_path, data_override, out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> chains;
  std::optional<long> iters, burnin, thin;
};

struct SimArgs {
  int taxa = 50;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  int individuals = 50, covariates = 10;
};

struct ScoreArgs {
  std::vector<std::string> chains;
  std::string truth_path, data_path, out_path = "metrics.csv";
};

struct InferArgs {
  std::vector<std::string> chains;
  std::string quantity = "RA", taxon, covariate, out_path = "inference.csv";
  std::string profile_path;
  int grid = 100;
  double v = 1.0;
  std::optional<double> l;
  std::vector<double> v_grid;  // lo hi n -> heatmap
  std::vector<double> window;  // lo hi
};

struct ExportArgs {
  std::string chain, family = "beta", out_path;
};

LongitudinalDataset ingest_for_truth(const std::string& data_path,
                                     const SimulationTruth& truth) {
  RunConfig cfg;
  cfg.taxa_min_individuals = 1;  // simulated data is scored unfiltered
  for (int p = 0; p < truth.P; ++p)
    cfg.covariates.push_back(CovariateConfig{"x" + std::to_string(p + 1), false, "", false, true});
  return ingest_csv(data_path, cfg);
}

PosteriorDraws load_pooled(const std::vector<std::string>& paths) {
  std::vector<PosteriorDraws> chains;
  for (const auto& p : paths) chains.push_back(load_draws(p));
  return pool_chains(chains);
}

int resolve_index(const std::string& token, const std::vector<std::string>& names,
                  const char* what) {
  auto it = std::find(names.begin(), names.end(), token);
  if (it != names.end()) return static_cast<int>(it - names.begin());
  try {
    int idx = std::stoi(token);
    if (idx >= 1 && idx <= static_cast<int>(names.size())) return idx - 1;
  } catch (...) {
  }
  throw ValidationError(std::string(what) + " '" + token + "' not found (use a name or 1-based index)");
}

int run_fit(const FitArgs& args) {
  RunConfig config = RunConfig::from_json_file(args.config_path);
  if (!args.data_override.empty()) config.data_path = args.data_override;
  if (args.seed) config.sampler.seed = *args.seed;
  if (args.chains) config.sampler.n_chains = *args.chains;
  if (args.iters) config.sampler.iterations = *args.iters;
  if (args.burnin) config.sampler.burn_in = *args.burnin;
  if (args.thin) config.sampler.thin = *args.thin;
  std::string out_dir = args.out_dir != "." ? args.out_dir : config.output_dir;
  fs::create_directories(out_dir);

  IngestReport report;
  LongitudinalDataset data = ingest_csv(config.data_path, config, &report);
  std::cerr << "[fit] " << data.n_records() << " records, " << data.n_individuals()
            << " individuals, " << data.n_taxa() << " taxa ("
            << report.rejected_records << " rows rejected, " << report.dropped_taxa
            << " taxa filtered)\n";

  SplineBasis basis = SplineBasis::build(data.times(), config.hyper.D);
  ModelDesign design = build_design(data, basis);
  std::vector<PosteriorDraws> chains = run_chains(data, design, config.hyper, config.sampler);

  nlohmann::json summary;
  summary["chains"] = nlohmann::json::array();
  for (const auto& draws : chains) {
    std::string path =
        (fs::path(out_dir) / ("chain_" + std::to_string(draws.chain_label) + ".fczd")).string();
    save_draws(draws, path);
    nlohmann::json entry = draws.acceptance.summary_json();
    entry["path"] = path;
    entry["draws"] = draws.size();
    entry["seed"] = draws.seed;
    summary["chains"].push_back(entry);
    std::cerr << "[fit] chain " << draws.chain_label << ": " << draws.size()
              << " retained draws -> " << path << '\n';
  }
  std::ofstream os(fs::path(out_dir) / "fit_summary.json");
  os << summary.dump(2) << '\n';
  return 0;
}

int run_simulate(const SimArgs& args) {
  SimOptions options;
  options.n_individuals = args.individuals;
  options.n_covariates = args.covariates;
  auto [data, truth] = generate_dataset(args.taxa, args.seed, options);
  fs::create_directories(args.out_dir);
  std::string data_path = (fs::path(args.out_dir) / "sim_data.csv").string();
  std::string truth_path = (fs::path(args.out_dir) / "sim_truth.json").string();
  write_dataset_csv(data, data_path);
  save_truth(truth, truth_path);

  // ready-to-fit config for the generated dataset
  nlohmann::json cov = nlohmann::json::array();
  for (int p = 0; p < truth.P; ++p)
    cov.push_back({{"name", "x" + std::to_string(p + 1)}, {"type", "continuous"}});
  nlohmann::json cfg{{"data", data_path},
                     {"output_dir", args.out_dir},
                     {"taxa_min_individuals", 1},
                     {"covariates", cov}};
  std::ofstream os(fs::path(args.out_dir) / "sim_config.json");
  os << cfg.dump(2) << '\n';
  std::cerr << "[simulate] " << data.n_records() << " records over " << args.taxa
            << " taxa -> " << data_path << '\n';
  return 0;
}

int run_score(const ScoreArgs& args) {
  SimulationTruth truth = load_truth(args.truth_path);
  LongitudinalDataset data = ingest_for_truth(args.data_path, truth);
  PosteriorDraws draws = load_pooled(args.chains);
  ModelDesign design = build_design(data, draws.layout.basis);
  ScoreTable table = score_draws(draws, truth, data, design);
  write_score_csv(table, args.out_path);
  std::cout << "RA95_active=" << table.ra95_active << " B95_active=" << table.b95_active
            << " ARMSE_active=" << table.armse_active << " RA95_nonactive="
            << table.ra95_nonactive << " MeAD=" << table.mead << '\n';
  return 0;
}

int run_infer(const InferArgs& args) {
  PosteriorDraws draws = load_pooled(args.chains);
  const ModelLayout& layout = draws.layout;
  double lo = layout.basis.t_min(), hi = layout.basis.t_max();
  if (args.window.size() == 2) {
    lo = args.window[0];
    hi = args.window[1];
  }
  std::vector<double> grid(args.grid);
  for (int g = 0; g < args.grid; ++g)
    grid[g] = lo + (hi - lo) * g / std::max(1, args.grid - 1);

  CovariateProfile profile = CovariateProfile::zeros(static_cast<int>(draws.covariate_names.size()));
  if (!args.profile_path.empty()) {
    std::ifstream is(args.profile_path);
    if (!is) throw ValidationError("cannot open profile '" + args.profile_path + "'");
    nlohmann::json j;
    is >> j;
    for (auto it = j.begin(); it != j.end(); ++it) {
      int p = resolve_index(it.key(), draws.covariate_names, "covariate");
      profile.x[p] = it.value().get<double>();
    }
    profile.description = args.profile_path;
  }

  double l = args.l ? *args.l : draws.hyper.l_default;
  auto need_taxon = [&]() { return resolve_index(args.taxon, draws.taxa_names, "taxon"); };
  auto need_cov = [&]() { return resolve_index(args.covariate, draws.covariate_names, "covariate"); };

  // block index of covariate p is p+1 (block 0 is the intercept)
  if (args.quantity == "beta") {
    int j = need_taxon();
    int block = args.covariate.empty() ? 0 : need_cov() + 1;
    auto summary = summarize_function(
        draws.size(),
        [&](int s, double t) { return layout.coef_value(draws.beta[s], j, block, t); }, grid,
        0.95, "beta:" + args.taxon);
    write_summary_csv(summary, args.out_path);
  } else if (args.quantity == "RA") {
    int j = need_taxon();
    auto summary = summarize_function(
        draws.size(),
        [&](int s, double t) { return relative_abundance(draws.beta[s], layout, t, profile)[j]; },
        grid, 0.95, "RA:" + args.taxon);
    write_summary_csv(summary, args.out_path);
  } else if (args.quantity == "deltaRA") {
    int j = need_taxon();
    int p = need_cov();
    if (args.v_grid.size() == 3) {
      std::vector<double> vg(static_cast<int>(args.v_grid[2]));
      for (std::size_t k = 0; k < vg.size(); ++k)
        vg[k] = args.v_grid[0] +
                (args.v_grid[1] - args.v_grid[0]) * k / std::max<std::size_t>(1, vg.size() - 1);
      write_heatmap_csv(heatmap_delta_ra(draws, j, p, grid, vg, profile), grid, vg,
                        args.out_path);
    } else {
      auto summary = summarize_function(
          draws.size(),
          [&](int s, double t) { return delta_ra(draws.beta[s], layout, t, profile, p, args.v)[j]; },
          grid, 0.95, "deltaRA:" + args.taxon);
      write_summary_csv(summary, args.out_path);
    }
  } else if (args.quantity == "deltaDiv") {
    int p = need_cov();
    if (args.v_grid.size() == 3) {
      std::vector<double> vg(static_cast<int>(args.v_grid[2]));
      for (std::size_t k = 0; k < vg.size(); ++k)
        vg[k] = args.v_grid[0] +
                (args.v_grid[1] - args.v_grid[0]) * k / std::max<std::size_t>(1, vg.size() - 1);
      write_heatmap_csv(heatmap_delta_div(draws, p, grid, vg, profile, l), grid, vg,
                        args.out_path);
    } else {
      auto summary = summarize_function(
          draws.size(),
          [&](int s, double t) {
            return delta_diversity(draws.beta[s], layout, t, profile, p, args.v, l);
          },
          grid, 0.95, "deltaDiv");
      write_summary_csv(summary, args.out_path);
    }
  } else {
    throw ValidationError("unknown quantity '" + args.quantity +
                          "' (expected beta|RA|deltaRA|deltaDiv)");
  }
  std::cerr << "[infer] wrote " << args.out_path << '\n';
  return 0;
}

int run_export(const ExportArgs& args) {
  PosteriorDraws draws = load_draws(args.chain);
  std::string out = args.out_path.empty() ? args.family + ".csv" : args.out_path;
  export_family_csv(draws, args.family, out);
  std::cerr << "[export] wrote " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Functional concurrent zero-inflated Dirichlet-multinomial regression"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Run MCMC chains on a dataset");
  fit->add_option("--config", fit_args.config_path, "Run configuration (JSON)")->required();
  fit->add_option("--data", fit_args.data_override, "Override the config's data path");
  fit->add_option("--out", fit_args.out_dir, "Output directory");
  fit->add_option("--seed", fit_args.seed, "Base seed (chain k uses seed+k)");
  fit->add_option("--chains", fit_args.chains, "Number of chains");
  fit->add_option("--iters", fit_args.iters, "Total iterations per chain");
  fit->add_option("--burnin", fit_args.burnin, "Burn-in iterations");
  fit->add_option("--thin", fit_args.thin, "Keep every thin-th post-burn-in state");

  SimArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset with known truth");
  sim->add_option("--taxa", sim_args.taxa, "Number of taxa");
  sim->add_option("--seed", sim_args.seed, "Generator seed");
  sim->add_option("--out", sim_args.out_dir, "Output directory");
  sim->add_option("--individuals", sim_args.individuals, "Number of individuals");
  sim->add_option("--covariates", sim_args.covariates, "Number of covariates");

  ScoreArgs score_args;
  auto* score = app.add_subcommand("score", "Score chains against a simulation truth");
  score->add_option("--chain", score_args.chains, "Chain file(s)")->required();
  score->add_option("--truth", score_args.truth_path, "Truth JSON")->required();
  score->add_option("--data", score_args.data_path, "Dataset CSV")->required();
  score->add_option("--out", score_args.out_path, "Metrics CSV");

  InferArgs infer_args;
  auto* infer = app.add_subcommand("infer", "Posterior curves and heatmaps");
  infer->add_option("--chain", infer_args.chains, "Chain file(s)")->required();
  infer->add_option("--quantity", infer_args.quantity, "beta|RA|deltaRA|deltaDiv");
  infer->add_option("--taxon", infer_args.taxon, "Taxon name or 1-based index");
  infer->add_option("--covariate", infer_args.covariate, "Covariate name or 1-based index");
  infer->add_option("--grid", infer_args.grid, "Time grid points");
  infer->add_option("--v", infer_args.v, "Covariate shift");
  infer->add_option("--l", infer_args.l, "Hill diversity order in [0,1)");
  infer->add_option("--v-grid", infer_args.v_grid, "lo hi n: emit a t x v heatmap")
      ->expected(3);
  infer->add_option("--window", infer_args.window, "Inference window lo hi")->expected(2);
  infer->add_option("--profile", infer_args.profile_path, "Covariate profile JSON");
  infer->add_option("--out", infer_args.out_path, "Output CSV");

  ExportArgs export_args;
  auto* exp = app.add_subcommand("export", "Export a parameter family to CSV");
  exp->add_option("--chain", export_args.chain, "Chain file")->required();
  exp->add_option("--family", export_args.family, "beta|r|eta|phi2|kappa2|tau2|lambda2");
  exp->add_option("--out", export_args.out_path, "Output CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) return run_fit(fit_args);
    if (*sim) return run_simulate(sim_args);
    if (*score) return run_score(score_args);
    if (*infer) return run_infer(infer_args);
    if (*exp) return run_export(export_args);
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
