#include "funczidm/draws_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "funczidm/errors.hpp"

namespace funczidm {

namespace {

constexpr char kMagic[4] = {'F', 'C', 'Z', 'D'};
constexpr std::uint32_t kVersion = 1;

void write_matrix(std::ofstream& os, const Eigen::MatrixXd& m) {
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double) * m.size()));
}

void write_vector(std::ofstream& os, const Eigen::VectorXd& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(sizeof(double) * v.size()));
}

void read_matrix(std::ifstream& is, Eigen::MatrixXd& m) {
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
}

void read_vector(std::ifstream& is, Eigen::VectorXd& v) {
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * v.size()));
}

}  // namespace

void save_draws(const PosteriorDraws& draws, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open '" + path + "' for writing");

  nlohmann::json meta{
      {"layout", draws.layout.to_json(draws.covariate_names)},
      {"taxa", draws.taxa_names},
      {"covariates", draws.covariate_names},
      {"individuals", draws.individual_labels},
      {"hyper", draws.hyper.to_json()},
      {"config", draws.config.to_json()},
      {"seed", draws.seed},
      {"chain", draws.chain_label},
      {"n_draws", draws.size()},
      {"acceptance", draws.acceptance.summary_json()},
  };
  std::string header = meta.dump();

  os.write(kMagic, 4);
  std::uint32_t version = kVersion;
  os.write(reinterpret_cast<const char*>(&version), sizeof(version));
  std::uint64_t len = header.size();
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));

  for (int s = 0; s < draws.size(); ++s) {
    write_matrix(os, draws.beta[s]);
    write_matrix(os, draws.r[s]);
    os.write(reinterpret_cast<const char*>(draws.eta[s].data()),
             static_cast<std::streamsize>(draws.eta[s].size()));
    write_vector(os, draws.phi2[s]);
    write_vector(os, draws.kappa2[s]);
    write_vector(os, draws.tau2[s]);
    write_matrix(os, draws.lambda2[s]);
  }
  if (!os) throw ValidationError("write failed for '" + path + "'");
}

PosteriorDraws load_draws(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open '" + path + "'");

  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw ValidationError("'" + path + "' is not a chain file");
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kVersion)
    throw ValidationError("unsupported chain file version " + std::to_string(version));
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header(len, '\0');
  is.read(header.data(), static_cast<std::streamsize>(len));
  nlohmann::json meta = nlohmann::json::parse(header);

  PosteriorDraws draws;
  draws.layout = ModelLayout::from_json(meta.at("layout"));
  draws.taxa_names = meta.at("taxa").get<std::vector<std::string>>();
  draws.covariate_names = meta.at("covariates").get<std::vector<std::string>>();
  draws.individual_labels = meta.at("individuals").get<std::vector<std::string>>();
  draws.hyper = Hyperparameters::from_json(meta.at("hyper"));
  draws.config = SamplerConfig::from_json(meta.at("config"));
  draws.seed = meta.at("seed").get<std::uint64_t>();
  draws.chain_label = meta.at("chain").get<int>();
  int n_draws = meta.at("n_draws").get<int>();

  const int q = draws.layout.n_coef;
  const int j_count = static_cast<int>(draws.taxa_names.size());
  const int n = static_cast<int>(draws.individual_labels.size());
  const int n_blocks = draws.layout.n_blocks();
  for (int s = 0; s < n_draws; ++s) {
    Eigen::MatrixXd beta(q, j_count), r(n, j_count), lambda2(n_blocks, j_count);
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> eta(n, j_count);
    Eigen::VectorXd phi2(j_count), kappa2(j_count), tau2(j_count);
    read_matrix(is, beta);
    read_matrix(is, r);
    is.read(reinterpret_cast<char*>(eta.data()), static_cast<std::streamsize>(eta.size()));
    read_vector(is, phi2);
    read_vector(is, kappa2);
    read_vector(is, tau2);
    read_matrix(is, lambda2);
    if (!is) throw ValidationError("chain file '" + path + "' is truncated");
    draws.beta.push_back(std::move(beta));
    draws.r.push_back(std::move(r));
    draws.eta.push_back(std::move(eta));
    draws.phi2.push_back(std::move(phi2));
    draws.kappa2.push_back(std::move(kappa2));
    draws.tau2.push_back(std::move(tau2));
    draws.lambda2.push_back(std::move(lambda2));
  }
  return draws;
}

void export_family_csv(const PosteriorDraws& draws, const std::string& family,
                       const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open '" + path + "' for writing");
  os.precision(17);

  auto block_label = [&](int bl) {
    int cov = draws.layout.blocks[bl].covariate;
    return cov < 0 ? std::string("intercept") : draws.covariate_names[cov];
  };

  const int j_count = draws.n_taxa();
  if (family == "beta") {
    for (int j = 0; j < j_count; ++j)
      for (int bl = 0; bl < draws.layout.n_blocks(); ++bl)
        for (int d = 0; d < draws.layout.blocks[bl].size; ++d)
          os << (j + bl + d ? "," : "") << draws.taxa_names[j] << ':' << block_label(bl) << ':'
             << d;
    os << '\n';
    for (int s = 0; s < draws.size(); ++s) {
      bool first = true;
      for (int j = 0; j < j_count; ++j)
        for (int bl = 0; bl < draws.layout.n_blocks(); ++bl) {
          const CoefBlock& blk = draws.layout.blocks[bl];
          for (int d = 0; d < blk.size; ++d) {
            os << (first ? "" : ",") << draws.beta[s](blk.offset + d, j);
            first = false;
          }
        }
      os << '\n';
    }
  } else if (family == "r" || family == "eta") {
    const int n = static_cast<int>(draws.individual_labels.size());
    for (int j = 0; j < j_count; ++j)
      for (int i = 0; i < n; ++i)
        os << (j + i ? "," : "") << draws.taxa_names[j] << ':' << draws.individual_labels[i];
    os << '\n';
    for (int s = 0; s < draws.size(); ++s) {
      bool first = true;
      for (int j = 0; j < j_count; ++j)
        for (int i = 0; i < n; ++i) {
          if (family == "r")
            os << (first ? "" : ",") << draws.r[s](i, j);
          else
            os << (first ? "" : ",") << static_cast<int>(draws.eta[s](i, j));
          first = false;
        }
      os << '\n';
    }
  } else if (family == "phi2" || family == "kappa2" || family == "tau2") {
    for (int j = 0; j < j_count; ++j) os << (j ? "," : "") << draws.taxa_names[j];
    os << '\n';
    for (int s = 0; s < draws.size(); ++s) {
      const Eigen::VectorXd& v = family == "phi2"   ? draws.phi2[s]
                                 : family == "kappa2" ? draws.kappa2[s]
                                                      : draws.tau2[s];
      for (int j = 0; j < j_count; ++j) os << (j ? "," : "") << v[j];
      os << '\n';
    }
  } else if (family == "lambda2") {
    for (int j = 0; j < j_count; ++j)
      for (int bl = 0; bl < draws.layout.n_blocks(); ++bl)
        os << (j + bl ? "," : "") << draws.taxa_names[j] << ':' << block_label(bl);
    os << '\n';
    for (int s = 0; s < draws.size(); ++s) {
      bool first = true;
      for (int j = 0; j < j_count; ++j)
        for (int bl = 0; bl < draws.layout.n_blocks(); ++bl) {
          os << (first ? "" : ",") << draws.lambda2[s](bl, j);
          first = false;
        }
      os << '\n';
    }
  } else {
    throw ValidationError("unknown parameter family '" + family + "'");
  }
}

PosteriorDraws pool_chains(const std::vector<PosteriorDraws>& chains) {
  if (chains.empty()) throw ValidationError("no chains to pool");
  PosteriorDraws pooled = chains.front();
  for (std::size_t k = 1; k < chains.size(); ++k) {
    const PosteriorDraws& ch = chains[k];
    if (!(ch.layout.basis == pooled.layout.basis) ||
        ch.layout.n_coef != pooled.layout.n_coef || ch.taxa_names != pooled.taxa_names)
      throw ValidationError("chains disagree on model layout; cannot pool");
    pooled.beta.insert(pooled.beta.end(), ch.beta.begin(), ch.beta.end());
    pooled.r.insert(pooled.r.end(), ch.r.begin(), ch.r.end());
    pooled.eta.insert(pooled.eta.end(), ch.eta.begin(), ch.eta.end());
    pooled.phi2.insert(pooled.phi2.end(), ch.phi2.begin(), ch.phi2.end());
    pooled.kappa2.insert(pooled.kappa2.end(), ch.kappa2.begin(), ch.kappa2.end());
    pooled.tau2.insert(pooled.tau2.end(), ch.tau2.begin(), ch.tau2.end());
    pooled.lambda2.insert(pooled.lambda2.end(), ch.lambda2.begin(), ch.lambda2.end());
  }
  return pooled;
}

}  // namespace funczidm
