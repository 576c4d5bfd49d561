#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sae/frame.hpp"

namespace sae {

struct AreaEstimate {
  std::optional<double> point;
  std::optional<double> variance;
  std::optional<double> low;
  std::optional<double> high;
  /// Degrees of freedom of the t interval; unset for non-t intervals.
  std::optional<double> df;
  std::string missing_reason;

  bool missing() const { return !point.has_value(); }
  bool has_interval() const { return low.has_value() && high.has_value(); }
};

/// Per-area estimates of one estimator.
struct EstimateSet {
  std::string estimator;
  double alpha = 0.05;
  std::vector<AreaEstimate> areas;
  int missing_cells = 0;  // populated cells without sampled units, summed over areas

  int size() const { return static_cast<int>(areas.size()); }
  int n_missing() const;
  /// Point estimates with NaN where missing.
  Eigen::VectorXd points() const;
};

struct BetaPosterior {
  Eigen::VectorXd shape1;
  Eigen::VectorXd shape2;
};

struct BayesSrsResult {
  EstimateSet estimates;
  BetaPosterior posterior;
  Eigen::VectorXd posterior_mean;
};

enum class CombineMode { Crosstab, Independence };

CombineMode parse_combine_mode(const std::string& name);

/// Sample mean per area with the finite-population variance p(1-p)/n (1 - n/N)
/// and a t interval on n - 1 degrees of freedom.
EstimateSet srs_estimate(const SurveySample& sample, const PopulationMargins& margins, double alpha);

/// Beta(O + 1, n - O + 1) posterior under a uniform prior; point = posterior mode
/// (the posterior mean, 1/2, for empty areas) and equal-tailed Beta quantile interval.
BayesSrsResult bayes_srs_estimate(const SurveySample& sample, double alpha);

/// Post-stratified estimate N_i^{-1} sum_k Ybar_ik N_ik over the strata of `stratum`.
EstimateSet stratified_estimate(const SurveySample& sample, const PopulationMargins& margins,
                                const std::string& stratum, double alpha);

/// Ratio estimator with a categorical auxiliary variable; same form as stratified_estimate.
EstimateSet ratio_estimate(const SurveySample& sample, const PopulationMargins& margins,
                           const std::string& variable, double alpha);

/// Two-variable estimator weighted by the crosstab N_i^{k1,k2} or by the
/// independence approximation N_i^{k1} N_i^{k2} / N_i.
EstimateSet combined_estimate(const SurveySample& sample, const PopulationMargins& margins,
                              const std::string& first, const std::string& second, double alpha,
                              CombineMode mode);

/// Post-stratified direct estimate for arbitrary per-area cell weights (areas x cells),
/// shared by all estimators above. Weights of an area sum to N_i.
EstimateSet poststratified_direct(const CellTable& cells, const Eigen::MatrixXd& weights,
                                  const Eigen::VectorXd& population, double alpha, std::string name);

/// Population weights (areas x cells) of the joint cells of the named variables,
/// first variable most significant. Crosstab mode needs exactly two variables.
Eigen::MatrixXd cell_weights(std::span<const std::string> names, std::span<const int> cardinalities,
                             const PopulationMargins& margins, CombineMode mode);
Eigen::MatrixXd cell_weights(const SurveySample& sample, const CellTable& cells,
                             const PopulationMargins& margins, CombineMode mode);

void write_estimates_csv(const std::filesystem::path& path, const EstimateSet& estimates,
                         const AreaIndex& areas, const std::string& comment = {});
EstimateSet read_estimates_csv(const std::filesystem::path& path, const AreaIndex& areas);

/// Sidecar with the t reference distribution (`area,df,scale`) of a direct estimator.
void write_t_reference(const std::filesystem::path& path, const EstimateSet& estimates,
                       const AreaIndex& areas, const std::string& comment = {});
void read_t_reference(const std::filesystem::path& path, EstimateSet& estimates, const AreaIndex& areas);

}  // namespace sae
