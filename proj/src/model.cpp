#include "sae/model.hpp"

#include <cmath>
#include <numbers>

#include "sae/error.hpp"
#include "sae/special.hpp"

namespace sae {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<std::vector<int>> enumerate_levels(const std::vector<int>& cardinalities, int cells) {
  CellTable t;
  t.cardinalities = cardinalities;
  std::vector<std::vector<int>> levels(cells);
  for (int c = 0; c < cells; ++c) levels[c] = t.levels_of(c);
  return levels;
}

}  // namespace

Likelihood parse_likelihood(const std::string& name) {
  if (name == "bernoulli") return Likelihood::Bernoulli;
  if (name == "binomial" || name == "binomial-collapsed") return Likelihood::Binomial;
  throw ValidationError("unknown likelihood '" + name + "' (expected bernoulli or binomial)");
}

ModelData make_model_data(const ModelSpec& spec, const SurveySample& sample) {
  const CellTable cells = cell_counts(sample, spec.variables);
  ModelData d;
  d.n_areas = sample.n_areas;
  d.cardinalities = cells.cardinalities;
  d.cells_per_area = cells.cells_per_area;
  d.n = cells.n;
  d.successes = cells.successes;
  d.cell_levels = enumerate_levels(d.cardinalities, d.cells_per_area);
  d.outcomes.assign(static_cast<std::size_t>(d.n_areas) * d.cells_per_area, {});
  std::vector<int> levels(cells.variables.size());
  for (const auto& r : sample.records) {
    for (std::size_t v = 0; v < cells.variables.size(); ++v) levels[v] = r.categories[cells.variables[v]];
    d.outcomes[d.flat_index(r.area, cells.cell_index(levels))].push_back(static_cast<std::uint8_t>(r.y));
  }
  return d;
}

ModelData make_model_data(const CellTable& cells) {
  ModelData d;
  d.n_areas = static_cast<int>(cells.n.rows());
  d.cardinalities = cells.cardinalities;
  d.cells_per_area = cells.cells_per_area;
  d.n = cells.n;
  d.successes = cells.successes;
  d.cell_levels = enumerate_levels(d.cardinalities, d.cells_per_area);
  d.outcomes.assign(static_cast<std::size_t>(d.n_areas) * d.cells_per_area, {});
  for (int i = 0; i < d.n_areas; ++i) {
    for (int c = 0; c < d.cells_per_area; ++c) {
      auto& o = d.outcomes[d.flat_index(i, c)];
      o.assign(d.n(i, c), 0);
      std::fill(o.begin(), o.begin() + d.successes(i, c), 1);
    }
  }
  return d;
}

HierarchicalModel::HierarchicalModel(ModelSpec spec, ModelData data, AreaGraph graph, Hyperpriors hyperpriors)
    : spec_(std::move(spec)), data_(std::move(data)), hyper_(hyperpriors) {
  if (graph.size() != data_.n_areas) throw ValidationError("model: graph and data disagree on the number of areas");
  if (data_.cardinalities.size() != spec_.variables.size()) {
    throw ValidationError("model: cell structure does not match the model's variables");
  }
  if (!(hyper_.sigma_max > 0.0) || !(hyper_.lambda_max > 0.0 && hyper_.lambda_max < 1.0) ||
      !(hyper_.intercept_sd > 0.0) || !(hyper_.effect_sd > 0.0)) {
    throw ValidationError("model: invalid hyperprior settings");
  }
  lcar_ = std::make_shared<const LcarStructure>(std::move(graph));
}

void HierarchicalModel::check(const ModelParameters& p) const {
  if (spec_.spatial && p.psi.size() != data_.n_areas) throw ValidationError("parameters: psi must have one entry per area");
  if (!spec_.spatial && p.psi.size() != 0) throw ValidationError("parameters: non-spatial model carries no psi");
  if (p.phi.size() != spec_.variables.size()) throw ValidationError("parameters: one phi vector per variable required");
  for (std::size_t v = 0; v < p.phi.size(); ++v) {
    if (p.phi[v].size() != data_.cardinalities[v]) throw ValidationError("parameters: phi has the wrong number of levels");
  }
}

Eigen::VectorXd HierarchicalModel::linear_predictor(const ModelParameters& p) const {
  check(p);
  Eigen::VectorXd eta(n_cells());
  for (int i = 0; i < data_.n_areas; ++i) {
    const double base = p.mu + (spec_.spatial ? p.psi(i) : 0.0);
    for (int c = 0; c < data_.cells_per_area; ++c) {
      double e = base;
      for (std::size_t v = 0; v < p.phi.size(); ++v) e += p.phi[v](data_.cell_levels[c][v]);
      eta(data_.flat_index(i, c)) = e;
    }
  }
  return eta;
}

double HierarchicalModel::cell_log_likelihood(int flat_cell, double eta) const {
  const double log_p = -softplus(-eta);
  const double log_q = -softplus(eta);
  if (spec_.likelihood == Likelihood::Binomial) {
    const int i = flat_cell / data_.cells_per_area;
    const int c = flat_cell % data_.cells_per_area;
    const int o = data_.successes(i, c);
    const int n = data_.n(i, c);
    if (n == 0) return 0.0;
    return o * log_p + (n - o) * log_q;
  }
  double ll = 0.0;
  for (std::uint8_t y : data_.outcomes[flat_cell]) ll += y ? log_p : log_q;
  return ll;
}

double HierarchicalModel::log_likelihood(const ModelParameters& p) const {
  const Eigen::VectorXd eta = linear_predictor(p);
  double ll = 0.0;
  for (int k = 0; k < n_cells(); ++k) ll += cell_log_likelihood(k, eta(k));
  return ll;
}

double HierarchicalModel::log_prior_intercept(double mu) const {
  if (!std::isfinite(mu)) return kNegInf;
  switch (hyper_.intercept) {
    case InterceptPrior::Flat:
      return 0.0;
    case InterceptPrior::Logistic:
      return -softplus(mu) - softplus(-mu);
    case InterceptPrior::Normal:
      break;
  }
  const double z = (mu - hyper_.intercept_mean) / hyper_.intercept_sd;
  return -0.5 * z * z - std::log(hyper_.intercept_sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double HierarchicalModel::log_prior_effect(double value) const {
  if (!std::isfinite(value)) return kNegInf;
  if (std::isinf(hyper_.effect_sd)) return 0.0;
  const double z = value / hyper_.effect_sd;
  return -0.5 * z * z - std::log(hyper_.effect_sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double HierarchicalModel::log_prior_sigma(double sigma) const {
  if (!(sigma > 0.0 && sigma <= hyper_.sigma_max)) return kNegInf;
  return -std::log(hyper_.sigma_max);
}

double HierarchicalModel::log_prior_lambda(double lambda) const {
  if (!(lambda >= 0.0 && lambda <= hyper_.lambda_max)) return kNegInf;
  return -std::log(hyper_.lambda_max);
}

double HierarchicalModel::log_prior(const ModelParameters& p, LcarFactor& factor) const {
  check(p);
  double lp = log_prior_intercept(p.mu);
  for (const auto& phi : p.phi) {
    if (phi(0) != 0.0) return kNegInf;
    for (Eigen::Index k = 1; k < phi.size(); ++k) lp += log_prior_effect(phi(k));
  }
  if (spec_.spatial) {
    const double ls = log_prior_sigma(p.sigma);
    const double ll = log_prior_lambda(p.lambda);
    if (!std::isfinite(ls) || !std::isfinite(ll)) return kNegInf;
    lp += ls + ll + lcar_logpdf(p.psi, factor, {p.lambda, p.sigma});
  }
  return std::isnan(lp) ? kNegInf : lp;
}

double HierarchicalModel::log_prior(const ModelParameters& p) const {
  LcarFactor factor(lcar_);
  return log_prior(p, factor);
}

double HierarchicalModel::log_posterior(const ModelParameters& p) const {
  const double lp = log_prior(p);
  if (!std::isfinite(lp)) return kNegInf;
  const double ll = log_likelihood(p);
  return std::isfinite(ll) ? lp + ll : kNegInf;
}

ModelParameters HierarchicalModel::initial_parameters() const {
  ModelParameters p;
  const double n = data_.n.sum();
  const double o = data_.successes.sum();
  double pooled = n > 0 ? o / n : 0.5;
  if (pooled <= 0.0) pooled = 1.0 / (n + 2.0);
  if (pooled >= 1.0) pooled = (n + 1.0) / (n + 2.0);
  p.mu = logit(pooled);
  if (spec_.spatial) p.psi = Eigen::VectorXd::Zero(data_.n_areas);
  for (int k : data_.cardinalities) p.phi.push_back(Eigen::VectorXd::Zero(k));
  p.sigma = std::min(1.0, 0.5 * hyper_.sigma_max);
  p.lambda = std::min(0.5, 0.5 * hyper_.lambda_max);
  return p;
}

double log_likelihood(const HierarchicalModel& model, const ModelParameters& p) { return model.log_likelihood(p); }

double log_posterior(const HierarchicalModel& model, const ModelParameters& p) { return model.log_posterior(p); }

}  // namespace sae
