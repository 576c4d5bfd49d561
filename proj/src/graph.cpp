#include "sae/graph.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "sae/csv.hpp"

namespace sae {

bool AreaGraph::adjacent(int a, int b) const {
  if (a > b) std::swap(a, b);
  return std::binary_search(edges_.begin(), edges_.end(), Edge{a, b});
}

Eigen::SparseMatrix<double> AreaGraph::adjacency() const {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * edges_.size());
  for (const auto& [a, b] : edges_) {
    triplets.emplace_back(a, b, 1.0);
    triplets.emplace_back(b, a, 1.0);
  }
  Eigen::SparseMatrix<double> w(n_areas_, n_areas_);
  w.setFromTriplets(triplets.begin(), triplets.end());
  return w;
}

AreaGraph AreaGraph::induced_subgraph(std::span<const int> keep) const {
  std::vector<int> position(n_areas_, -1);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    if (keep[k] < 0 || keep[k] >= n_areas_) throw ValidationError("induced_subgraph: area index out of range");
    position[keep[k]] = static_cast<int>(k);
  }
  std::vector<Edge> sub;
  for (const auto& [a, b] : edges_) {
    if (position[a] >= 0 && position[b] >= 0) sub.emplace_back(position[a], position[b]);
  }
  return build_graph(static_cast<int>(keep.size()), sub);
}

AreaGraph AreaGraph::permuted(std::span<const int> perm) const {
  if (static_cast<int>(perm.size()) != n_areas_) throw ValidationError("permuted: permutation size mismatch");
  std::vector<Edge> relabelled;
  relabelled.reserve(edges_.size());
  for (const auto& [a, b] : edges_) relabelled.emplace_back(perm[a], perm[b]);
  return build_graph(n_areas_, relabelled);
}

AreaGraph build_graph(int n_areas, std::span<const Edge> edge_list) {
  if (n_areas <= 0) throw ValidationError("build_graph: number of areas must be positive");
  AreaGraph g;
  g.n_areas_ = n_areas;
  g.edges_.reserve(edge_list.size());
  for (auto [a, b] : edge_list) {
    const std::string pair = "(" + std::to_string(a) + "," + std::to_string(b) + ")";
    if (a < 0 || b < 0 || a >= n_areas || b >= n_areas) {
      throw ValidationError("build_graph: edge " + pair + " references an area outside [0, " +
                            std::to_string(n_areas) + ")");
    }
    if (a == b) throw ValidationError("build_graph: self-loop " + pair);
    if (a > b) std::swap(a, b);
    g.edges_.emplace_back(a, b);
  }
  std::sort(g.edges_.begin(), g.edges_.end());
  g.edges_.erase(std::unique(g.edges_.begin(), g.edges_.end()), g.edges_.end());
  g.neighbors_.assign(n_areas, {});
  g.degrees_ = Eigen::VectorXi::Zero(n_areas);
  for (const auto& [a, b] : g.edges_) {
    g.neighbors_[a].push_back(b);
    g.neighbors_[b].push_back(a);
    ++g.degrees_(a);
    ++g.degrees_(b);
  }
  for (auto& nb : g.neighbors_) std::sort(nb.begin(), nb.end());
  return g;
}

AreaGraph lattice_graph(int rows, int cols, int n_areas, bool queen) {
  if (rows <= 0 || cols <= 0 || n_areas <= 0 || n_areas > rows * cols) {
    throw ValidationError("lattice_graph: need 0 < n_areas <= rows * cols");
  }
  std::vector<Edge> edges;
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int a = id(r, c);
      if (a >= n_areas) continue;
      const int right = id(r, c + 1);
      const int down = id(r + 1, c);
      if (c + 1 < cols && right < n_areas) edges.emplace_back(a, right);
      if (r + 1 < rows && down < n_areas) edges.emplace_back(a, down);
      if (queen && r + 1 < rows) {
        if (c + 1 < cols && id(r + 1, c + 1) < n_areas) edges.emplace_back(a, id(r + 1, c + 1));
        if (c > 0 && id(r + 1, c - 1) < n_areas) edges.emplace_back(a, id(r + 1, c - 1));
      }
    }
  }
  return build_graph(n_areas, edges);
}

std::vector<std::optional<double>> morans_i_distribution(const Eigen::MatrixXd& draws,
                                                         const AreaGraph& graph) {
  std::vector<std::optional<double>> out(draws.rows());
  for (Eigen::Index r = 0; r < draws.rows(); ++r) {
    try {
      out[r] = morans_i(draws.row(r).transpose(), graph);
    } catch (const NumericError&) {
      out[r] = std::nullopt;
    }
  }
  return out;
}

AreaGraph read_edge_csv(const std::filesystem::path& path, int n_areas, bool one_based) {
  const CsvTable table = read_csv(path);
  const std::size_t ca = table.column("area_a");
  const std::size_t cb = table.column("area_b");
  std::vector<Edge> edges;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int a = parse_int(row[ca], table.location(r));
    const int b = parse_int(row[cb], table.location(r));
    const int off = one_based ? 1 : 0;
    edges.emplace_back(a - off, b - off);
  }
  return build_graph(n_areas, edges);
}

void write_edge_csv(const std::filesystem::path& path, const AreaGraph& graph,
                    const std::string& header_comment) {
  std::ofstream out = open_output(path);
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "area_a,area_b\n";
  for (const auto& [a, b] : graph.edges()) out << a << "," << b << "\n";
}

}  // namespace sae
