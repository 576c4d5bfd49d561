#pragma once

// Leroux conditional autoregressive (lCAR) Gaussian field on an AreaGraph:
//   theta ~ N(0, Q^{-1}),  Q = [lambda (D - W) + (1 - lambda) I] / sigma^2
// with D the degree matrix and W the binary adjacency. Proper for lambda in [0, 1).

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cstdint>
#include <memory>
#include <vector>

#include "sae/graph.hpp"
#include "sae/random.hpp"

namespace sae {

struct LcarParams {
  double lambda = 0.5;  // spatial mixing, [0, 1)
  double sigma = 1.0;   // scale (standard deviation parameterization; precision tau = 1 / sigma^2)

  /// Throws ValidationError outside lambda in [0, 1), sigma > 0.
  void validate() const;
};

/// Parameter-free part of the lCAR precision: the graph Laplacian and a
/// fill-reducing (AMD) ordering. Immutable; share one instance across chains.
class LcarStructure {
 public:
  explicit LcarStructure(AreaGraph graph);

  const AreaGraph& graph() const { return graph_; }
  int size() const { return graph_.size(); }

  /// R(lambda) = lambda (D - W) + (1 - lambda) I.
  Eigen::SparseMatrix<double> structure_matrix(double lambda) const;
  /// Q = R(lambda) / sigma^2, assembled from the upper triangle and mirrored.
  Eigen::SparseMatrix<double> precision(const LcarParams& params) const;

  /// theta' R(lambda) theta in O(n + |E|).
  double quadratic_form(const Eigen::VectorXd& theta, double lambda) const;

  using Permutation = Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>;
  const Permutation& ordering() const { return perm_; }

 private:
  friend class LcarFactor;

  AreaGraph graph_;
  Permutation perm_;
  // Permuted pattern of R with the Laplacian and identity contributions per stored entry.
  Eigen::SparseMatrix<double> permuted_pattern_;
  std::vector<double> laplacian_values_;
  std::vector<double> identity_values_;
};

/// Numeric factorization R(lambda) = L D L' that reuses the cached symbolic analysis.
/// One instance per worker; not thread-safe.
class LcarFactor {
 public:
  explicit LcarFactor(std::shared_ptr<const LcarStructure> structure);

  /// Throws NumericError when R(lambda) is not positive definite.
  void factorize(double lambda);
  double lambda() const { return lambda_; }

  /// log det R(lambda) of the last factorization.
  double log_det_structure() const { return log_det_; }

  /// Maps z ~ N(0, I) to a draw from N(0, R(lambda)^{-1}).
  Eigen::VectorXd correlated_draw(const Eigen::VectorXd& z) const;

  const LcarStructure& structure() const { return *structure_; }

 private:
  std::shared_ptr<const LcarStructure> structure_;
  std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::NaturalOrdering<int>>> ldlt_;
  Eigen::SparseMatrix<double> work_;
  double lambda_ = -1.0;
  double log_det_ = 0.0;
};

Eigen::SparseMatrix<double> lcar_precision(const AreaGraph& graph, const LcarParams& params);

/// log N(theta; 0, Q^{-1}) = 1/2 log det Q - n/2 log(2 pi) - 1/2 theta' Q theta.
double lcar_logpdf(const Eigen::VectorXd& theta, const AreaGraph& graph, const LcarParams& params);
/// Same, reusing `factor` (refactorized only if its lambda differs).
double lcar_logpdf(const Eigen::VectorXd& theta, LcarFactor& factor, const LcarParams& params);

Eigen::VectorXd lcar_sample(const AreaGraph& graph, const LcarParams& params, std::uint64_t seed);
Eigen::VectorXd lcar_sample(LcarFactor& factor, const LcarParams& params, Rng& rng);

}  // namespace sae
