#pragma once

// Run configuration: a TOML-style file (key/value pairs, tables, arrays of tables)
// read into JSON, validated, and hashed so every output can be traced to it.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sae/estimate.hpp"
#include "sae/geojson.hpp"
#include "sae/mcmc.hpp"
#include "sae/model.hpp"

namespace sae::cli {

using Json = nlohmann::ordered_json;

/// Parses the supported TOML subset. Throws ValidationError with the line number.
Json parse_toml(const std::string& text, const std::string& source = "config");
Json read_toml(const std::filesystem::path& path);

inline const std::vector<std::string>& estimator_registry() {
  static const std::vector<std::string> names{"srs",     "bayes_srs",   "stratified", "ratio", "combined",
                                              "spatial", "spatial_fpc", "str_small",  "full"};
  return names;
}

struct SimulatedVariable {
  std::string name;
  std::vector<std::string> labels;
  Eigen::VectorXd effects;
  Eigen::MatrixXd probabilities;  // 1 x K, or parent K x K
  std::string parent;             // empty when independent
  double area_variation = 0.0;    // sd of per-area logit perturbations of the probabilities
};

struct SimulationSettings {
  int areas = 73;
  int columns = 9;
  double population_mean = 22000.0;
  double population_log_sd = 0.3;
  double intercept = -1.0;
  LcarParams field{0.9, 0.5};
  std::vector<SimulatedVariable> variables;
  std::string design = "srs";  // "srs" or "stratified"
  int sample_size = 4000;
  std::string stratum;  // stratified designs
  int divisions = 1;    // coarse frame units for stratified designs
};

struct InputPaths {
  std::filesystem::path areas;
  std::filesystem::path schema;
  std::filesystem::path sample;
  std::filesystem::path margins;
  std::optional<std::filesystem::path> crosstab;
  std::optional<std::filesystem::path> adjacency;  // edge CSV
  std::optional<std::filesystem::path> geojson;    // map geometry, and adjacency when no edge CSV
  std::optional<std::filesystem::path> gold;
  bool one_based = false;
};

struct EstimatorSettings {
  std::vector<std::string> names;
  std::string stratum;                // stratified, str_small
  std::string ratio_variable;         // ratio
  std::vector<std::string> combined;  // combined, full (two variables)
  CombineMode combine_mode = CombineMode::Crosstab;
  Likelihood likelihood = Likelihood::Binomial;
  int beta_draws = 4000;  // posterior draws kept for bayes_srs
  bool parallel = false;  // run estimators concurrently
};

struct AssessSettings {
  int replicates = 10000;
  bool clip_t_draws = false;
  bool matched_srs = true;  // add SRS rows restricted to the areas each direct estimator covers
};

struct RunConfig {
  Json document;  // effective configuration, overrides applied
  std::string hash;
  std::filesystem::path base_dir;  // relative input paths resolve here
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";
  double alpha = 0.05;
  int threads = 1;
  AdjacencyRule adjacency_rule = AdjacencyRule::SharedSegment;
  std::optional<SimulationSettings> simulate;
  std::optional<InputPaths> inputs;
  EstimatorSettings estimators;
  McmcConfig mcmc;
  Hyperpriors hyperpriors;
  AssessSettings assess;

  /// Input files: the explicit [inputs] table, else the files written by `simulate`.
  InputPaths input_paths() const;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<int> threads;
  bool clip_t_draws = false;
  std::optional<std::string> adjacency_rule;
};

RunConfig load_run_config(const std::filesystem::path& path, const Overrides& overrides = {});
RunConfig make_run_config(Json document, const std::filesystem::path& base_dir, const Overrides& overrides = {});

/// FNV-1a of the canonical JSON, as 16 hex digits. Output locations and thread counts are excluded.
std::string config_hash(const Json& document);

}  // namespace sae::cli
