#include "sae/lcar.hpp"

#include <Eigen/OrderingMethods>

#include <cmath>
#include <numbers>
#include <string>

namespace sae {

void LcarParams::validate() const {
  if (!(lambda >= 0.0 && lambda < 1.0)) {
    throw ValidationError("lCAR lambda must lie in [0, 1), got " + std::to_string(lambda));
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ValidationError("lCAR sigma must be positive, got " + std::to_string(sigma));
  }
}

LcarStructure::LcarStructure(AreaGraph graph) : graph_(std::move(graph)) {
  const int n = graph_.size();
  std::vector<Eigen::Triplet<double>> lap;
  for (int i = 0; i < n; ++i) lap.emplace_back(i, i, graph_.degrees()(i));
  for (const auto& [a, b] : graph_.edges()) {
    lap.emplace_back(a, b, -1.0);
    lap.emplace_back(b, a, -1.0);
  }
  Eigen::SparseMatrix<double> laplacian(n, n);
  laplacian.setFromTriplets(lap.begin(), lap.end());

  Eigen::SparseMatrix<double> pattern = laplacian;
  for (int i = 0; i < n; ++i) pattern.coeffRef(i, i) = 1.0;
  pattern.makeCompressed();

  Permutation pinv;
  Eigen::AMDOrdering<int> amd;
  amd(pattern, pinv);
  perm_ = pinv.inverse();

  // P A P' for both parts; the pattern holds the union, with explicit zeros where needed.
  const Eigen::SparseMatrix<double> lap_p = perm_ * laplacian * perm_.transpose();
  permuted_pattern_ = perm_ * pattern * perm_.transpose();
  permuted_pattern_.makeCompressed();
  const Eigen::Index nnz = permuted_pattern_.nonZeros();
  laplacian_values_.assign(nnz, 0.0);
  identity_values_.assign(nnz, 0.0);
  for (int col = 0; col < n; ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(permuted_pattern_, col); it; ++it) {
      const Eigen::Index k = &it.valueRef() - permuted_pattern_.valuePtr();
      laplacian_values_[k] = lap_p.coeff(it.row(), it.col());
      identity_values_[k] = it.row() == it.col() ? 1.0 : 0.0;
    }
  }
}

Eigen::SparseMatrix<double> LcarStructure::structure_matrix(double lambda) const {
  return precision({lambda, 1.0});
}

Eigen::SparseMatrix<double> LcarStructure::precision(const LcarParams& params) const {
  params.validate();
  const int n = graph_.size();
  const double s2 = params.sigma * params.sigma;
  const double off = -params.lambda / s2;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n + 2 * graph_.edges().size());
  for (int i = 0; i < n; ++i) {
    trip.emplace_back(i, i, (params.lambda * graph_.degrees()(i) + (1.0 - params.lambda)) / s2);
  }
  for (const auto& [a, b] : graph_.edges()) {
    trip.emplace_back(a, b, off);
    trip.emplace_back(b, a, off);
  }
  Eigen::SparseMatrix<double> q(n, n);
  q.setFromTriplets(trip.begin(), trip.end());
  return q;
}

double LcarStructure::quadratic_form(const Eigen::VectorXd& theta, double lambda) const {
  double diag = 0.0;
  for (int i = 0; i < graph_.size(); ++i) {
    diag += (lambda * graph_.degrees()(i) + (1.0 - lambda)) * theta(i) * theta(i);
  }
  double cross = 0.0;
  for (const auto& [a, b] : graph_.edges()) cross += theta(a) * theta(b);
  return diag - 2.0 * lambda * cross;
}

LcarFactor::LcarFactor(std::shared_ptr<const LcarStructure> structure)
    : structure_(std::move(structure)),
      ldlt_(std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower,
                                                   Eigen::NaturalOrdering<int>>>()),
      work_(structure_->permuted_pattern_) {
  ldlt_->analyzePattern(work_);
}

void LcarFactor::factorize(double lambda) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw ValidationError("lCAR lambda must lie in [0, 1)");
  const auto& lap = structure_->laplacian_values_;
  const auto& id = structure_->identity_values_;
  double* values = work_.valuePtr();
  for (std::size_t k = 0; k < lap.size(); ++k) values[k] = lambda * lap[k] + (1.0 - lambda) * id[k];
  ldlt_->factorize(work_);
  if (ldlt_->info() != Eigen::Success) throw NumericError("lCAR precision factorization failed");
  const Eigen::VectorXd d = ldlt_->vectorD();
  if ((d.array() <= 0.0).any()) throw NumericError("lCAR precision is not positive definite");
  log_det_ = d.array().log().sum();
  lambda_ = lambda;
}

Eigen::VectorXd LcarFactor::correlated_draw(const Eigen::VectorXd& z) const {
  const Eigen::VectorXd scaled = (z.array() / ldlt_->vectorD().array().sqrt()).matrix();
  const Eigen::VectorXd y = ldlt_->matrixU().solve(scaled);
  return structure_->ordering().transpose() * y;
}

Eigen::SparseMatrix<double> lcar_precision(const AreaGraph& graph, const LcarParams& params) {
  return LcarStructure(graph).precision(params);
}

double lcar_logpdf(const Eigen::VectorXd& theta, LcarFactor& factor, const LcarParams& params) {
  params.validate();
  const int n = factor.structure().size();
  if (theta.size() != n) throw ValidationError("lcar_logpdf: vector length does not match the graph");
  if (factor.lambda() != params.lambda) factor.factorize(params.lambda);
  const double s2 = params.sigma * params.sigma;
  const double log_det_q = factor.log_det_structure() - n * std::log(s2);
  return 0.5 * log_det_q - 0.5 * n * std::log(2.0 * std::numbers::pi) -
         0.5 * factor.structure().quadratic_form(theta, params.lambda) / s2;
}

double lcar_logpdf(const Eigen::VectorXd& theta, const AreaGraph& graph, const LcarParams& params) {
  LcarFactor factor(std::make_shared<const LcarStructure>(graph));
  return lcar_logpdf(theta, factor, params);
}

Eigen::VectorXd lcar_sample(LcarFactor& factor, const LcarParams& params, Rng& rng) {
  params.validate();
  if (factor.lambda() != params.lambda) factor.factorize(params.lambda);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(factor.structure().size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return params.sigma * factor.correlated_draw(z);
}

Eigen::VectorXd lcar_sample(const AreaGraph& graph, const LcarParams& params, std::uint64_t seed) {
  LcarFactor factor(std::make_shared<const LcarStructure>(graph));
  Rng rng(seed);
  return lcar_sample(factor, params, rng);
}

}  // namespace sae
