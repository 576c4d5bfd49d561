#pragma once

// Bayesian hierarchical logit model for small-area proportions:
//   O_ic ~ Binomial(n_ic, pi*_ic)   (or record-level Bernoulli)
//   logit(pi*_ic) = mu + psi_i + sum_v phi_v[k_v(c)],   phi_v[0] = 0
//   psi ~ lCAR(lambda, sigma)

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "sae/frame.hpp"
#include "sae/graph.hpp"
#include "sae/lcar.hpp"

namespace sae {

enum class Likelihood { Bernoulli, Binomial };

Likelihood parse_likelihood(const std::string& name);

struct ModelSpec {
  Likelihood likelihood = Likelihood::Binomial;
  bool spatial = true;
  std::vector<std::string> variables;  // categorical effects, one phi vector each
};

enum class InterceptPrior {
  Normal,    // N(mean, sd^2)
  Flat,      // improper uniform on the logit scale
  Logistic,  // standard logistic: uniform on the probability scale
};

struct Hyperpriors {
  InterceptPrior intercept = InterceptPrior::Normal;
  double intercept_mean = 0.0;
  double intercept_sd = 10.0;
  /// Prior sd of the free effect levels; infinity means flat and improper.
  double effect_sd = std::numeric_limits<double>::infinity();
  double sigma_max = 5.0;         // sigma ~ Uniform(0, sigma_max)
  double lambda_max = 1.0 - 1e-6; // lambda ~ Uniform(0, lambda_max)
};

struct ModelParameters {
  double mu = 0.0;
  Eigen::VectorXd psi;               // per area; empty for non-spatial models
  std::vector<Eigen::VectorXd> phi;  // per variable, entry 0 fixed at 0
  double sigma = 1.0;
  double lambda = 0.5;
};

/// Sample data arranged in the model's area x cell structure.
struct ModelData {
  int n_areas = 0;
  std::vector<int> cardinalities;
  int cells_per_area = 1;
  Eigen::MatrixXi n;          // areas x cells
  Eigen::MatrixXi successes;  // areas x cells
  /// Record-level outcomes per (area * cells_per_area + cell), kept for the Bernoulli form.
  std::vector<std::vector<std::uint8_t>> outcomes;
  std::vector<std::vector<int>> cell_levels;  // [cell][variable]

  int flat_index(int area, int cell) const { return area * cells_per_area + cell; }
};

ModelData make_model_data(const ModelSpec& spec, const SurveySample& sample);
/// Collapsed counts only; Bernoulli records are rebuilt as O ones and n - O zeros.
ModelData make_model_data(const CellTable& cells);

class HierarchicalModel {
 public:
  HierarchicalModel(ModelSpec spec, ModelData data, AreaGraph graph, Hyperpriors hyperpriors = {});

  const ModelSpec& spec() const { return spec_; }
  const ModelData& data() const { return data_; }
  const AreaGraph& graph() const { return lcar_->graph(); }
  const Hyperpriors& hyperpriors() const { return hyper_; }
  const std::shared_ptr<const LcarStructure>& lcar() const { return lcar_; }
  int n_areas() const { return data_.n_areas; }
  int n_cells() const { return data_.n_areas * data_.cells_per_area; }

  /// eta of every (area, cell), flat index area * cells_per_area + cell.
  Eigen::VectorXd linear_predictor(const ModelParameters& p) const;

  /// Log-likelihood contribution of one (area, cell) at linear predictor eta.
  double cell_log_likelihood(int flat_cell, double eta) const;

  double log_likelihood(const ModelParameters& p) const;
  /// Log prior density (up to constants for flat components); -inf outside the support.
  double log_prior(const ModelParameters& p) const;
  double log_prior(const ModelParameters& p, LcarFactor& factor) const;
  double log_posterior(const ModelParameters& p) const;

  double log_prior_intercept(double mu) const;
  double log_prior_effect(double value) const;
  double log_prior_sigma(double sigma) const;
  double log_prior_lambda(double lambda) const;

  ModelParameters initial_parameters() const;
  /// Throws ValidationError when the dimensions of `p` do not match the model.
  void check(const ModelParameters& p) const;

 private:
  ModelSpec spec_;
  ModelData data_;
  Hyperpriors hyper_;
  std::shared_ptr<const LcarStructure> lcar_;
};

double log_likelihood(const HierarchicalModel& model, const ModelParameters& p);
double log_posterior(const HierarchicalModel& model, const ModelParameters& p);

}  // namespace sae
