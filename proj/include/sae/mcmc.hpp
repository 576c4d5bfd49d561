#pragma once

// Adaptive random-walk Metropolis-within-Gibbs sampler for HierarchicalModel.

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sae/model.hpp"

namespace sae {

struct McmcConfig {
  int chains = 4;
  int iterations = 20000;  // per chain, burn-in included
  int burn_in = 10000;
  int thin = 10;
  int adaptation_window = 50;  // proposal scales are tuned every this many burn-in iterations
  double target_acceptance = 0.44;
  std::uint64_t seed = 1;
  int threads = 1;

  /// Throws ValidationError for inconsistent settings, including no retained draws.
  void validate() const;
  int draws_per_chain() const { return thin > 0 ? (iterations - burn_in) / thin : 0; }
};

struct BlockAcceptance {
  std::string block;
  std::int64_t proposed = 0;
  std::int64_t accepted = 0;
  double rate() const { return proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0; }
};

struct PosteriorDraws {
  ModelSpec spec;
  int n_areas = 0;
  std::vector<int> cardinalities;
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // retained draws x parameters; chain c owns rows [c * draws_per_chain, ...)
  int chains = 0;
  int draws_per_chain = 0;
  std::vector<BlockAcceptance> acceptance;  // post burn-in, summed over chains

  Eigen::Index n_draws() const { return values.rows(); }
  /// Column of a named parameter; throws ValidationError when absent.
  int column(std::string_view name) const;
  ModelParameters parameters(Eigen::Index draw) const;
  /// chains x draws_per_chain view of one column.
  Eigen::MatrixXd by_chain(int column) const;
};

std::vector<std::string> parameter_names(const ModelSpec& spec, int n_areas, const std::vector<int>& cardinalities);

/// Runs config.chains independent chains (on up to config.threads threads).
/// Output depends only on the model, the config and its seed.
PosteriorDraws run_mcmc(const HierarchicalModel& model, const McmcConfig& config);

}  // namespace sae
