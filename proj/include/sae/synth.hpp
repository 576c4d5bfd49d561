#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "sae/frame.hpp"
#include "sae/graph.hpp"
#include "sae/lcar.hpp"

namespace sae {

/// Generative settings of one categorical auxiliary variable.
struct SyntheticVariable {
  std::string name;
  int cardinality = 1;
  std::vector<std::string> labels;
  /// Additive logit effects per category (entry 0 is the reference level).
  Eigen::VectorXd effects;
  /// Category probabilities. Rows: 1 (shared by all areas), n_areas (area-varying),
  /// or the parent's cardinality when `parent` is set (conditional on the parent's category).
  Eigen::MatrixXd probabilities;
  /// Index of an earlier variable this one depends on, or -1.
  int parent = -1;
};

struct PopulationConfig {
  Eigen::VectorXi population;  // N_i per area
  std::vector<SyntheticVariable> variables;
  double intercept = 0.0;
  LcarParams field{0.9, 1.0};
  std::uint64_t seed = 1;
};

/// Enumerated synthetic population with exact per-area proportions.
struct SyntheticTruth {
  std::vector<Variable> variables;
  PopulationMargins margins;
  Eigen::VectorXd pi_gold;  // exact proportion of Y = 1 per area
  Eigen::VectorXd field;    // realized spatial effect psi_i
  // Individuals are stored area by area: area i owns [area_start[i], area_start[i+1]).
  std::vector<std::int64_t> area_start;
  std::vector<std::uint8_t> y;
  std::vector<std::uint8_t> categories;  // individual-major, one byte per variable

  int n_areas() const { return margins.n_areas; }
  std::int64_t n_individuals() const { return static_cast<std::int64_t>(y.size()); }
  int category(std::int64_t person, int variable) const {
    return categories[person * static_cast<std::int64_t>(variables.size()) + variable];
  }
  int area_of(std::int64_t person) const;
};

/// Linear predictors are clamped to |eta| <= 35 before the logistic transform.
inline constexpr double kLinearPredictorClamp = 35.0;

/// Draws psi ~ lCAR(graph, field), categories per individual and
/// Y ~ Bernoulli(logistic(mu + psi_i + sum_v effect_v[k_v])).
SyntheticTruth generate_population(const AreaGraph& graph, const PopulationConfig& config);

/// Indices of the individuals selected by draw_srs with the same arguments.
std::vector<std::int64_t> srs_individuals(const SyntheticTruth& truth, const Eigen::VectorXi& per_area,
                                          std::uint64_t seed);
std::vector<std::int64_t> srs_individuals(const SyntheticTruth& truth, int total, std::uint64_t seed);

/// Without-replacement SRS of n_i individuals in every area.
SurveySample draw_srs(const SyntheticTruth& truth, const Eigen::VectorXi& per_area, std::uint64_t seed);

/// Without-replacement SRS of n individuals from the whole population.
SurveySample draw_srs(const SyntheticTruth& truth, int total, std::uint64_t seed);

/// SRS within every (frame unit, stratum). `allocation` is divisions x K;
/// `division` maps area -> frame unit (empty: one global frame, allocation has one row).
SurveySample draw_stratified(const SyntheticTruth& truth, const std::string& stratum,
                             const Eigen::MatrixXi& allocation, const std::vector<int>& division,
                             std::uint64_t seed);

/// Population of each (frame unit, stratum) cell, divisions x K.
Eigen::MatrixXi stratum_populations(const SyntheticTruth& truth, const std::string& stratum,
                                    const std::vector<int>& division);

/// Proportional allocation of `total` per frame unit over strata (largest remainder).
Eigen::MatrixXi proportional_allocation(const Eigen::MatrixXi& stratum_population, int total_per_division);

}  // namespace sae
