#pragma once

// Comparison of per-area estimates with a gold standard: point accuracy,
// interval quality and spatial pattern (Moran's I).

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sae/estimate.hpp"
#include "sae/graph.hpp"

namespace sae {

/// Probability that an estimator's Moran's I falls strictly below the reference I.
struct MoranComparison {
  double probability = 0.0;
  double reference = 0.0;  // Moran's I of gold on the graph actually used
  int used = 0;            // draws or replicates counted
  int degenerate = 0;      // constant draws, excluded
  int excluded_areas = 0;  // areas left out (missing variance or degrees of freedom)
};

struct AssessmentReport {
  std::string estimator;
  int n_areas = 0;
  int n_missing = 0;           // areas without a point estimate
  int n_missing_interval = 0;  // areas without an interval
  std::optional<double> correlation;
  std::optional<double> rmse;
  std::optional<double> mean_interval_length;
  std::optional<double> coverage;
  std::optional<double> morans_i;       // of the point estimates, over non-missing areas
  std::optional<double> gold_morans_i;  // of gold over the same areas
  std::optional<MoranComparison> moran_comparison;
  std::string comparison_method;  // "posterior" or "t-simulation" when set
  std::vector<std::string> notes;
};

/// Pairwise-complete statistics of `estimates` against `gold`. Throws when every area is missing.
AssessmentReport assess(const EstimateSet& estimates, const Eigen::VectorXd& gold, const AreaGraph& graph);

/// Fraction of per-draw Moran's I values (draws x areas) strictly below the I of gold.
MoranComparison morans_comparison_bayes(const Eigen::MatrixXd& draws, const Eigen::VectorXd& gold,
                                        const AreaGraph& graph);
MoranComparison morans_comparison_bayes(const Eigen::MatrixXd& draws, double reference, const AreaGraph& graph);

/// Moran's I of independent location-scale t draws (point, sqrt(variance), df) per area,
/// compared with gold on the areas that have a reference distribution.
MoranComparison morans_comparison_freq(const EstimateSet& estimates, const Eigen::VectorXd& gold,
                                       const AreaGraph& graph, int replicates, std::uint64_t seed,
                                       bool clip_to_unit = false);

void write_assessment_csv(const std::filesystem::path& path, const std::vector<AssessmentReport>& reports,
                          const std::string& comment = {});
void write_assessment_json(const std::filesystem::path& path, const std::vector<AssessmentReport>& reports,
                           const std::string& config_hash = {});

}  // namespace sae
