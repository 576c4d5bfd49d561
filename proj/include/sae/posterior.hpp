#pragma once

// Posterior quantities derived from MCMC draws: per-area proportions and their
// summaries with convergence diagnostics.

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "sae/estimate.hpp"
#include "sae/frame.hpp"
#include "sae/mcmc.hpp"

namespace sae {

/// Draws of one quantity per area (draws x areas), rows grouped by chain.
struct AreaDraws {
  std::string name;
  Eigen::MatrixXd values;
  int chains = 1;

  int draws_per_chain() const { return chains > 0 ? static_cast<int>(values.rows()) / chains : 0; }
};

/// logistic(eta) of every (area, cell) for every draw: draws x (areas * cells).
Eigen::MatrixXd pi_star_cells(const PosteriorDraws& draws);

/// Area-level pi* of a model without categorical effects.
AreaDraws pi_star_areas(const PosteriorDraws& draws);

/// Finite-population predictive: (O_i + B) / N_i with B ~ Binomial(N_i - n_i, pi*_i), one B per draw.
AreaDraws finite_population_estimate(const AreaDraws& pi_star, const SurveySample& sample,
                                     const Eigen::VectorXd& population, std::uint64_t seed);

/// Post-stratified posterior sum_c W_ic pi*_ic / N_i over the model's joint cells.
AreaDraws poststratified_posterior(const PosteriorDraws& draws, const PopulationMargins& margins, CombineMode mode);

struct Diagnostics {
  std::vector<std::string> names;
  Eigen::VectorXd rhat;
  Eigen::VectorXd ess;
  bool warning = false;
  std::vector<std::string> messages;
};

/// Split R-hat of chains (one row per chain); NaN when the within-chain variance is zero.
double split_rhat(const Eigen::MatrixXd& chains);
/// Bulk effective sample size over split chains with Geyer's initial positive sequence.
double effective_sample_size(const Eigen::MatrixXd& chains);

/// R-hat and ESS per column; warns when R-hat > 1.01 or ESS < 400. Needs at least two chains.
Diagnostics diagnose(const Eigen::MatrixXd& values, int chains, const std::vector<std::string>& names);
Diagnostics diagnose(const PosteriorDraws& draws);

struct PosteriorSummary {
  EstimateSet estimates;  // posterior mean, variance and equal-tailed interval per area
  Diagnostics diagnostics;
};

PosteriorSummary summarize(const AreaDraws& draws, double alpha);

/// Sample quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double probability);

}  // namespace sae
