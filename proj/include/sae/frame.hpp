#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sae {

/// Categorical auxiliary variable with dense codes 0..cardinality-1.
struct Variable {
  std::string name;
  int cardinality = 1;
  std::vector<std::string> labels;  // optional; size == cardinality when present

  /// Maps a label or an integer code to its code. Throws ValidationError.
  int code(std::string_view token, const std::string& where) const;
  std::string label(int code) const;
};

/// Ordered list of small areas shared by every input file.
class AreaIndex {
 public:
  AreaIndex() = default;
  explicit AreaIndex(std::vector<std::string> labels, Eigen::VectorXd population = {});
  static AreaIndex numbered(int n_areas);

  int size() const { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(int area) const { return labels_.at(area); }
  /// Per-area population totals; empty when the area list carried none.
  const Eigen::VectorXd& population() const { return population_; }

  /// Index of `label`; unknown labels are rejected, never reindexed.
  int find(std::string_view label, const std::string& where) const;

 private:
  std::vector<std::string> labels_;
  Eigen::VectorXd population_;
  std::unordered_map<std::string, int> lookup_;
};

struct DesignDescriptor {
  enum class Kind { Srs, Stratified };
  Kind kind = Kind::Srs;
  std::string stratum_variable;
  /// area -> coarse sampling-frame unit; empty for a single global frame.
  std::vector<int> division;

  int n_divisions() const;
};

struct Schema {
  std::vector<Variable> variables;
  std::vector<std::string> crosstab;  // the two variables of the optional crosstab file
  DesignDescriptor design;

  std::optional<int> find(std::string_view name) const;
  int index_of(std::string_view name) const;  // throws ValidationError
  void validate(int n_areas) const;
};

struct SurveyRecord {
  int area = 0;
  int y = 0;
  std::vector<int> categories;  // aligned with SurveySample::variables
};

struct SurveySample {
  int n_areas = 0;
  std::vector<Variable> variables;
  DesignDescriptor design;
  std::vector<SurveyRecord> records;

  std::optional<int> find_variable(std::string_view name) const;
  int variable_index(std::string_view name) const;
  Eigen::VectorXi area_sizes() const;
  Eigen::VectorXi area_successes() const;
};

/// Known population counts. All tables hold non-negative integer values.
struct PopulationMargins {
  struct Crosstab {
    std::string first;
    std::string second;
    std::vector<Eigen::MatrixXd> cells;  // per area, K1 x K2
  };

  int n_areas = 0;
  Eigen::VectorXd population;                    // N_i
  std::map<std::string, Eigen::MatrixXd> tables;  // variable -> areas x K
  std::optional<Crosstab> crosstab;

  const Eigen::MatrixXd& table(const std::string& variable) const;  // throws ValidationError
  bool has_table(const std::string& variable) const { return tables.count(variable) > 0; }
  /// Throws ValidationError when any marginal or crosstab total disagrees with N_i.
  void validate() const;
};

/// Sample counts per area and per combination of categories.
/// Cells are numbered in mixed radix with the first variable most significant.
struct CellTable {
  std::vector<int> variables;      // indices into SurveySample::variables
  std::vector<int> cardinalities;  // K of each listed variable
  int cells_per_area = 1;
  Eigen::MatrixXi n;          // areas x cells
  Eigen::MatrixXi successes;  // areas x cells

  int cell_index(std::span<const int> levels) const;
  std::vector<int> levels_of(int cell) const;
};

CellTable cell_counts(const SurveySample& sample, std::span<const std::string> variables);

AreaIndex load_area_list(const std::filesystem::path& path);
Schema load_schema(const std::filesystem::path& path, const AreaIndex& areas);
SurveySample load_sample(const std::filesystem::path& path, const Schema& schema, const AreaIndex& areas);
PopulationMargins load_margins(const std::filesystem::path& path, const Schema& schema, const AreaIndex& areas,
                               const std::optional<std::filesystem::path>& crosstab_path = std::nullopt);
Eigen::VectorXd load_gold(const std::filesystem::path& path, const AreaIndex& areas);

void write_area_list(const std::filesystem::path& path, const AreaIndex& areas, const std::string& comment = {});
void write_schema(const std::filesystem::path& path, const Schema& schema, const std::string& config_hash = {});
void write_sample(const std::filesystem::path& path, const SurveySample& sample, const AreaIndex& areas,
                  const std::string& comment = {});
void write_margins(const std::filesystem::path& path, const PopulationMargins& margins, const Schema& schema,
                   const AreaIndex& areas, const std::string& comment = {});
void write_crosstab(const std::filesystem::path& path, const PopulationMargins& margins, const AreaIndex& areas,
                    const std::string& comment = {});
void write_gold(const std::filesystem::path& path, const Eigen::VectorXd& gold, const AreaIndex& areas,
                const std::string& comment = {});

}  // namespace sae
