#include "funczidm/model.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "funczidm/densities.hpp"
#include "funczidm/errors.hpp"

namespace funczidm {

void Hyperparameters::validate() const {
  if (alpha <= 0 || beta <= 0 || a <= 0 || b <= 0 || zeta <= 0 || rho <= 0)
    throw ValidationError("hyperparameters must be strictly positive");
  if (D < 4) throw ValidationError("insufficient degrees of freedom: D >= 4 required");
  if (l_default < 0.0 || l_default >= 1.0)
    throw ValidationError("diversity order l must lie in [0, 1)");
}

nlohmann::json Hyperparameters::to_json() const {
  return nlohmann::json{{"alpha", alpha}, {"beta", beta}, {"a", a},         {"b", b},
                        {"zeta", zeta},   {"rho", rho},   {"D", D},         {"l", l_default}};
}

Hyperparameters Hyperparameters::from_json(const nlohmann::json& j) {
  Hyperparameters h;
  if (j.contains("alpha")) h.alpha = j.at("alpha").get<double>();
  if (j.contains("beta")) h.beta = j.at("beta").get<double>();
  if (j.contains("a")) h.a = j.at("a").get<double>();
  if (j.contains("b")) h.b = j.at("b").get<double>();
  if (j.contains("zeta")) h.zeta = j.at("zeta").get<double>();
  if (j.contains("rho")) h.rho = j.at("rho").get<double>();
  if (j.contains("D")) h.D = j.at("D").get<int>();
  if (j.contains("l")) h.l_default = j.at("l").get<double>();
  h.validate();
  return h;
}

double ModelLayout::coef_value(const Eigen::MatrixXd& beta, int j, int block, double t) const {
  const CoefBlock& bl = blocks[block];
  if (!bl.functional) return beta(bl.offset, j);
  Eigen::RowVectorXd row = basis.evaluate(t);
  return row * beta.col(j).segment(bl.offset, bl.size);
}

Eigen::RowVectorXd ModelLayout::profile_row(double t, const Eigen::VectorXd& x) const {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n_coef);
  Eigen::RowVectorXd b = basis.evaluate(t);
  for (int bl = 0; bl < n_blocks(); ++bl) {
    const CoefBlock& blk = blocks[bl];
    double xv = blk.covariate < 0 ? 1.0 : x[blk.covariate];
    if (blk.functional)
      row.segment(blk.offset, blk.size) = xv * b;
    else
      row[blk.offset] = xv;
  }
  return row;
}

nlohmann::json ModelLayout::to_json(const std::vector<std::string>& covariate_names) const {
  nlohmann::json jblocks = nlohmann::json::array();
  for (const CoefBlock& bl : blocks) {
    nlohmann::json jb{{"covariate", bl.covariate},
                      {"functional", bl.functional},
                      {"offset", bl.offset},
                      {"size", bl.size}};
    if (bl.covariate >= 0 && bl.covariate < static_cast<int>(covariate_names.size()))
      jb["name"] = covariate_names[bl.covariate];
    jblocks.push_back(jb);
  }
  return nlohmann::json{{"basis", basis.to_json()}, {"blocks", jblocks}, {"n_coef", n_coef}};
}

ModelLayout ModelLayout::from_json(const nlohmann::json& j) {
  ModelLayout layout{SplineBasis::from_json(j.at("basis")), {}, j.at("n_coef").get<int>()};
  for (const auto& jb : j.at("blocks"))
    layout.blocks.push_back(CoefBlock{jb.at("covariate").get<int>(),
                                      jb.at("functional").get<bool>(),
                                      jb.at("offset").get<int>(), jb.at("size").get<int>()});
  return layout;
}

ModelDesign build_design(const LongitudinalDataset& data, const SplineBasis& basis) {
  ModelDesign design;
  design.layout.basis = basis;
  const int cols_f = basis.df() + 1;

  int offset = 0;
  design.layout.blocks.push_back(CoefBlock{-1, true, offset, cols_f});
  offset += cols_f;
  for (int p = 0; p < data.n_covariates(); ++p) {
    bool functional = data.covariates()[p].functional;
    int size = functional ? cols_f : 1;
    design.layout.blocks.push_back(CoefBlock{p, functional, offset, size});
    offset += size;
  }
  design.layout.n_coef = offset;

  design.w.resize(data.n_records(), offset);
  for (int m = 0; m < data.n_records(); ++m)
    design.w.row(m) = design.layout.profile_row(data.time_of(m), data.x().row(m).transpose());
  return design;
}

void ParameterState::validate(const LongitudinalDataset& data, const ModelLayout& layout) const {
  const int n = data.n_individuals(), j_count = data.n_taxa();
  if (beta.rows() != layout.n_coef || beta.cols() != j_count || r.rows() != n ||
      eta.rows() != n || c.rows() != data.n_records() || u.size() != data.n_records())
    throw ValidationError("parameter state has inconsistent shapes");
  for (int j = 0; j < j_count; ++j) {
    if (!(tau2[j] > 0) || !(xi[j] > 0) || !(kappa2[j] > 0) || !(phi2[j] > 0))
      throw ValidationError("taxon-level variance parameters must be strictly positive");
    for (int bl = 0; bl < layout.n_blocks(); ++bl)
      if (!(lambda2(bl, j) > 0) || !(nu(bl, j) > 0))
        throw ValidationError("local scales must be strictly positive");
    for (int i = 0; i < n; ++i) {
      if (eta(i, j) == 0 && data.any_positive(i, j))
        throw ValidationError("structural zero contradicts positive count");
      auto [b, e] = data.records_of(i);
      for (int m = b; m < e; ++m) {
        if (eta(i, j) == 0 && c(m, j) != 0.0)
          throw ValidationError("c must be exactly zero where eta is zero");
        if (eta(i, j) == 1 && !(c(m, j) > 0.0))
          throw ValidationError("c must be positive where eta is one");
      }
    }
  }
  for (int m = 0; m < data.n_records(); ++m)
    if (!(u[m] > 0)) throw ValidationError("latent u must be strictly positive");
}

double log_concentration(const ParameterState& state, const ModelDesign& design,
                         const LongitudinalDataset& data, int record, int j) {
  double v = design.w.row(record) * state.beta.col(j) + state.r(data.individual_of(record), j);
  if (!std::isfinite(v))
    throw DivergenceError("non-finite log concentration at record " + std::to_string(record) +
                          ", taxon " + std::to_string(j));
  return v;
}

double log_joint_record_term(const ParameterState& state, const LongitudinalDataset& data,
                             int record) {
  const int j_count = data.n_taxa();
  double t_sum = state.c.row(record).sum();
  double out = (data.z_dot()[record] - 1.0) * std::log(state.u[record]) -
               state.u[record] * t_sum;
  for (int j = 0; j < j_count; ++j) {
    double z = data.z()(record, j);
    if (z == 0.0) continue;
    if (state.eta(data.individual_of(record), j) == 0)
      throw ValidationError("structural zero contradicts positive count");
    out += z * std::log(state.c(record, j));
  }
  return out;
}

double log_joint_c_prior_pair(const ParameterState& state, const ModelDesign& design,
                              const LongitudinalDataset& data, int i, int j) {
  if (state.eta(i, j) == 0) return 0.0;
  double out = 0.0;
  auto [b, e] = data.records_of(i);
  for (int m = b; m < e; ++m) {
    double g = std::exp(log_concentration(state, design, data, m, j));
    double cv = state.c(m, j);
    out += (g - 1.0) * std::log(cv) - cv - std::lgamma(g);
  }
  return out;
}

double log_joint_eta_column(const ParameterState& state, const Hyperparameters& hyper, int j) {
  const int n = static_cast<int>(state.eta.rows());
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += state.eta(i, j);
  return log_beta_fn(hyper.alpha + s, hyper.beta + n - s) - log_beta_fn(hyper.alpha, hyper.beta);
}

double log_joint_priors_taxon(const ParameterState& state, const ModelLayout& layout,
                              const Hyperparameters& hyper, int j) {
  double out = 0.0;
  // beta*_j00 ~ N(0,1); every other coefficient gets the regularized variance
  out += log_normal_pdf(state.beta(layout.blocks[0].offset, j), 0.0, 1.0);
  for (int bl = 0; bl < layout.n_blocks(); ++bl) {
    double var = shrinkage_variance(state.kappa2[j], state.lambda2(bl, j), state.tau2[j]);
    int off = layout.shrunk_offset(bl), cnt = layout.shrunk_count(bl);
    for (int d = 0; d < cnt; ++d) out += log_normal_pdf(state.beta(off + d, j), 0.0, var);
    out += log_invgamma_pdf(state.lambda2(bl, j), 0.5, 1.0 / state.nu(bl, j));
    out += log_invgamma_pdf(state.nu(bl, j), 0.5, 1.0);
  }
  for (int i = 0; i < state.r.rows(); ++i)
    out += log_normal_pdf(state.r(i, j), 0.0, state.phi2[j]);
  out += log_invgamma_pdf(state.tau2[j], 0.5, 1.0 / state.xi[j]);
  out += log_invgamma_pdf(state.xi[j], 0.5, 1.0);
  out += log_invgamma_pdf(state.kappa2[j], hyper.zeta, hyper.rho);
  out += log_invgamma_pdf(state.phi2[j], hyper.a, hyper.b);
  return out;
}

double log_joint(const ParameterState& state, const LongitudinalDataset& data,
                 const ModelDesign& design, const Hyperparameters& hyper) {
  double out = 0.0;
  for (int m = 0; m < data.n_records(); ++m) out += log_joint_record_term(state, data, m);
  for (int j = 0; j < data.n_taxa(); ++j) {
    for (int i = 0; i < data.n_individuals(); ++i)
      out += log_joint_c_prior_pair(state, design, data, i, j);
    out += log_joint_eta_column(state, hyper, j);
    out += log_joint_priors_taxon(state, design.layout, hyper, j);
  }
  if (!std::isfinite(out)) throw DivergenceError("non-finite augmented log joint");
  return out;
}

}  // namespace funczidm
