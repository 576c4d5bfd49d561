#include "sae/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "sae/error.hpp"
#include "sae/random.hpp"
#include "sae/special.hpp"

namespace sae {

namespace {

constexpr double kEtaClamp = 35.0;

CellTable cell_layout(const PosteriorDraws& draws) {
  CellTable t;
  t.cardinalities = draws.cardinalities;
  t.cells_per_area = 1;
  for (int k : draws.cardinalities) t.cells_per_area *= k;
  return t;
}

}  // namespace

Eigen::MatrixXd pi_star_cells(const PosteriorDraws& draws) {
  const CellTable layout = cell_layout(draws);
  const int cells = layout.cells_per_area;
  std::vector<std::vector<int>> levels(cells);
  for (int c = 0; c < cells; ++c) levels[c] = layout.levels_of(c);
  Eigen::MatrixXd out(draws.n_draws(), static_cast<Eigen::Index>(draws.n_areas) * cells);
  for (Eigen::Index d = 0; d < draws.n_draws(); ++d) {
    const ModelParameters p = draws.parameters(d);
    for (int i = 0; i < draws.n_areas; ++i) {
      const double base = p.mu + (draws.spec.spatial ? p.psi(i) : 0.0);
      for (int c = 0; c < cells; ++c) {
        double eta = base;
        for (std::size_t v = 0; v < p.phi.size(); ++v) eta += p.phi[v](levels[c][v]);
        out(d, static_cast<Eigen::Index>(i) * cells + c) = logistic(std::clamp(eta, -kEtaClamp, kEtaClamp));
      }
    }
  }
  return out;
}

AreaDraws pi_star_areas(const PosteriorDraws& draws) {
  if (!draws.cardinalities.empty()) {
    throw ValidationError("area-level pi* needs a model without categorical effects; post-stratify instead");
  }
  return {"pi_star", pi_star_cells(draws), draws.chains};
}

AreaDraws finite_population_estimate(const AreaDraws& pi_star, const SurveySample& sample,
                                     const Eigen::VectorXd& population, std::uint64_t seed) {
  const int n_areas = static_cast<int>(pi_star.values.cols());
  if (sample.n_areas != n_areas || population.size() != n_areas) {
    throw ValidationError("finite-population estimate: area counts disagree");
  }
  const Eigen::VectorXi n = sample.area_sizes();
  const Eigen::VectorXi o = sample.area_successes();
  for (int i = 0; i < n_areas; ++i) {
    if (n(i) > population(i)) throw ValidationError("area " + std::to_string(i) + " has more sampled units than population");
  }
  Rng rng = make_rng(seed, "posterior/finite-population", 0);
  AreaDraws out{"finite_population", Eigen::MatrixXd(pi_star.values.rows(), n_areas), pi_star.chains};
  for (Eigen::Index d = 0; d < pi_star.values.rows(); ++d) {
    for (int i = 0; i < n_areas; ++i) {
      const auto rest = static_cast<std::int64_t>(std::llround(population(i))) - n(i);
      std::int64_t unseen = 0;
      if (rest > 0) unseen = std::binomial_distribution<std::int64_t>(rest, pi_star.values(d, i))(rng);
      out.values(d, i) = population(i) > 0.0 ? (o(i) + static_cast<double>(unseen)) / population(i) : pi_star.values(d, i);
    }
  }
  return out;
}

AreaDraws poststratified_posterior(const PosteriorDraws& draws, const PopulationMargins& margins, CombineMode mode) {
  if (margins.n_areas != draws.n_areas) throw ValidationError("post-stratification: area counts disagree");
  const Eigen::MatrixXd weights = cell_weights(draws.spec.variables, draws.cardinalities, margins, mode);
  const Eigen::MatrixXd pi = pi_star_cells(draws);
  const int cells = static_cast<int>(weights.cols());
  AreaDraws out{"poststratified", Eigen::MatrixXd(draws.n_draws(), draws.n_areas), draws.chains};
  for (int i = 0; i < draws.n_areas; ++i) {
    const double total = weights.row(i).sum();
    if (!(total > 0.0)) throw ValidationError("post-stratification: area " + std::to_string(i) + " has no population");
    const Eigen::VectorXd share = weights.row(i).transpose() / total;
    out.values.col(i) = pi.middleCols(static_cast<Eigen::Index>(i) * cells, cells) * share;
  }
  return out;
}

double quantile(std::vector<double> values, double probability) {
  if (values.empty()) throw ValidationError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double h = probability * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

Eigen::MatrixXd split_chains(const Eigen::MatrixXd& chains) {
  const Eigen::Index half = chains.cols() / 2;
  Eigen::MatrixXd out(2 * chains.rows(), half);
  for (Eigen::Index c = 0; c < chains.rows(); ++c) {
    out.row(2 * c) = chains.row(c).head(half);
    out.row(2 * c + 1) = chains.row(c).tail(half);
  }
  return out;
}

struct ChainMoments {
  double within = 0.0;
  double pooled = 0.0;  // (n - 1) / n W + B / n
};

ChainMoments moments(const Eigen::MatrixXd& chains) {
  const double n = static_cast<double>(chains.cols());
  const Eigen::VectorXd means = chains.rowwise().mean();
  double within = 0.0;
  for (Eigen::Index c = 0; c < chains.rows(); ++c) {
    within += (chains.row(c).array() - means(c)).square().sum() / (n - 1.0);
  }
  within /= static_cast<double>(chains.rows());
  const double between_over_n =
      chains.rows() > 1 ? (means.array() - means.mean()).square().sum() / static_cast<double>(chains.rows() - 1) : 0.0;
  return {within, (n - 1.0) / n * within + between_over_n};
}

}  // namespace

double split_rhat(const Eigen::MatrixXd& chains) {
  if (chains.cols() < 4 || chains.minCoeff() == chains.maxCoeff()) return std::numeric_limits<double>::quiet_NaN();
  const ChainMoments mom = moments(split_chains(chains));
  if (!(mom.within > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(mom.pooled / mom.within);
}

double effective_sample_size(const Eigen::MatrixXd& raw) {
  if (raw.cols() < 4 || raw.minCoeff() == raw.maxCoeff()) return std::numeric_limits<double>::quiet_NaN();
  const Eigen::MatrixXd chains = split_chains(raw);
  const Eigen::Index m = chains.rows();
  const Eigen::Index n = chains.cols();
  const ChainMoments mom = moments(chains);
  if (!(mom.pooled > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const Eigen::MatrixXd centred = chains.colwise() - chains.rowwise().mean();

  auto rho = [&](Eigen::Index lag) {
    if (lag == 0) return 1.0;
    double acov = 0.0;
    for (Eigen::Index c = 0; c < m; ++c) {
      acov += centred.row(c).head(n - lag).dot(centred.row(c).tail(n - lag)) / static_cast<double>(n);
    }
    acov /= static_cast<double>(m);
    return 1.0 - (mom.within - acov) / mom.pooled;
  };

  double tau = -1.0;
  double previous_pair = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, previous_pair);
    previous_pair = pair;
    tau += 2.0 * pair;
  }
  const double total = static_cast<double>(m * n);
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

Diagnostics diagnose(const Eigen::MatrixXd& values, int chains, const std::vector<std::string>& names) {
  if (chains < 2) throw ValidationError("convergence diagnostics need at least two chains");
  if (values.rows() % chains != 0) throw ValidationError("draw count is not a multiple of the chain count");
  const Eigen::Index per_chain = values.rows() / chains;
  Diagnostics diag;
  diag.names = names;
  diag.rhat.resize(values.cols());
  diag.ess.resize(values.cols());
  int bad_rhat = 0;
  int low_ess = 0;
  int undefined = 0;
  for (Eigen::Index k = 0; k < values.cols(); ++k) {
    Eigen::MatrixXd by_chain(chains, per_chain);
    for (int c = 0; c < chains; ++c) by_chain.row(c) = values.col(k).segment(c * per_chain, per_chain).transpose();
    diag.rhat(k) = split_rhat(by_chain);
    diag.ess(k) = effective_sample_size(by_chain);
    if (std::isnan(diag.rhat(k)) || std::isnan(diag.ess(k))) {
      ++undefined;
    } else {
      if (diag.rhat(k) > 1.01) ++bad_rhat;
      if (diag.ess(k) < 400.0) ++low_ess;
    }
  }
  auto note = [&](int count, const std::string& what) {
    if (count == 0) return;
    diag.warning = true;
    std::ostringstream os;
    os << count << " of " << values.cols() << " quantities " << what;
    diag.messages.push_back(os.str());
  };
  note(bad_rhat, "have split R-hat above 1.01");
  note(low_ess, "have effective sample size below 400");
  note(undefined, "have undefined diagnostics (constant or too few draws)");
  return diag;
}

Diagnostics diagnose(const PosteriorDraws& draws) { return diagnose(draws.values, draws.chains, draws.names); }

PosteriorSummary summarize(const AreaDraws& draws, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < draws.values.cols(); ++i) names.push_back("area[" + std::to_string(i) + "]");
  PosteriorSummary s;
  s.diagnostics = diagnose(draws.values, draws.chains, names);
  s.estimates.estimator = draws.name;
  s.estimates.alpha = alpha;
  s.estimates.areas.resize(draws.values.cols());
  for (Eigen::Index i = 0; i < draws.values.cols(); ++i) {
    const Eigen::VectorXd col = draws.values.col(i);
    AreaEstimate& e = s.estimates.areas[i];
    if (col.minCoeff() == col.maxCoeff()) {
      // Degenerate posterior (e.g. a census): report it exactly, free of summation rounding.
      e.point = e.low = e.high = col(0);
      e.variance = 0.0;
      continue;
    }
    const double mean = col.mean();
    e.point = mean;
    e.variance = col.size() > 1 ? (col.array() - mean).square().sum() / static_cast<double>(col.size() - 1) : 0.0;
    std::vector<double> v(col.data(), col.data() + col.size());
    e.low = quantile(v, alpha / 2.0);
    e.high = quantile(std::move(v), 1.0 - alpha / 2.0);
  }
  return s;
}

}  // namespace sae
