#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sae/error.hpp"

namespace sae {

using Edge = std::pair<int, int>;

/// Undirected adjacency structure over small areas 0..n-1.
///
/// Edges are stored once with `first < second`, sorted lexicographically.
/// Immutable after construction.
class AreaGraph {
 public:
  AreaGraph() = default;

  int size() const { return n_areas_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int area) const { return neighbors_[area]; }
  const Eigen::VectorXi& degrees() const { return degrees_; }
  bool adjacent(int a, int b) const;

  /// Binary symmetric weight matrix W.
  Eigen::SparseMatrix<double> adjacency() const;

  /// Graph restricted to `keep` (sorted or not); area keep[k] becomes area k.
  AreaGraph induced_subgraph(std::span<const int> keep) const;

  /// Relabels area i as perm[i].
  AreaGraph permuted(std::span<const int> perm) const;

  friend AreaGraph build_graph(int n_areas, std::span<const Edge> edge_list);

 private:
  int n_areas_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> neighbors_;
  Eigen::VectorXi degrees_;
};

/// Validates, symmetrizes and deduplicates an edge list.
/// Throws ValidationError on out-of-range indices or self-loops.
AreaGraph build_graph(int n_areas, std::span<const Edge> edge_list);

inline AreaGraph build_graph(int n_areas, std::initializer_list<Edge> edge_list) {
  return build_graph(n_areas, std::span<const Edge>(edge_list.begin(), edge_list.size()));
}

/// Regular rows x cols lattice truncated to the first `n_areas` cells (row-major).
/// `queen` adds diagonal neighbours.
AreaGraph lattice_graph(int rows, int cols, int n_areas, bool queen);

/// Moran's I with binary weights:
///   I = n / S0 * sum_ij w_ij (x_i - m)(x_j - m) / sum_i (x_i - m)^2,  S0 = 2|E|.
/// Throws NumericError for a constant vector or an edgeless graph.
template <typename Derived>
double morans_i(const Eigen::MatrixBase<Derived>& values, const AreaGraph& graph) {
  const Eigen::Index n = values.size();
  if (n != graph.size()) throw ValidationError("morans_i: value vector length does not match the graph");
  if (graph.edges().empty()) throw NumericError("morans_i: graph has no edges");
  const double first = values(0);
  bool constant = true;
  for (Eigen::Index i = 1; i < n && constant; ++i) constant = values(i) == first;
  if (constant) throw NumericError("morans_i: degenerate input, all values are equal");

  const double mean = values.mean();
  const Eigen::VectorXd centered = (values.derived().template cast<double>().array() - mean).matrix();
  const double denom = centered.squaredNorm();
  if (!(denom > 0.0)) throw NumericError("morans_i: degenerate input, zero variance");
  double cross = 0.0;
  for (const auto& [a, b] : graph.edges()) cross += centered(a) * centered(b);
  const double s0 = 2.0 * static_cast<double>(graph.edges().size());
  return static_cast<double>(n) / s0 * (2.0 * cross) / denom;
}

/// Row-wise Moran's I of a draws x areas matrix; degenerate rows are std::nullopt.
std::vector<std::optional<double>> morans_i_distribution(const Eigen::MatrixXd& draws,
                                                         const AreaGraph& graph);

/// Reads a two-column `area_a,area_b` CSV of integer indices.
AreaGraph read_edge_csv(const std::filesystem::path& path, int n_areas, bool one_based);
void write_edge_csv(const std::filesystem::path& path, const AreaGraph& graph,
                    const std::string& header_comment = {});

}  // namespace sae
