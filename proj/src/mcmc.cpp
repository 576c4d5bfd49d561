#include "sae/mcmc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <thread>

#include "sae/error.hpp"
#include "sae/random.hpp"
#include "sae/special.hpp"

namespace sae {

void McmcConfig::validate() const {
  if (chains < 1) throw ValidationError("mcmc: at least one chain is required");
  if (iterations < 1 || burn_in < 0) throw ValidationError("mcmc: iterations must be positive and burn-in non-negative");
  if (thin < 1) throw ValidationError("mcmc: thin must be at least 1");
  if (adaptation_window < 1) throw ValidationError("mcmc: adaptation window must be at least 1");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) throw ValidationError("mcmc: target acceptance in (0, 1)");
  if (threads < 1) throw ValidationError("mcmc: threads must be at least 1");
  if (burn_in >= iterations || draws_per_chain() < 1) throw ValidationError("mcmc: no retained draws");
}

int PosteriorDraws::column(std::string_view name) const {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == name) return static_cast<int>(k);
  }
  throw ValidationError("posterior draws have no parameter '" + std::string(name) + "'");
}

std::vector<std::string> parameter_names(const ModelSpec& spec, int n_areas, const std::vector<int>& cardinalities) {
  std::vector<std::string> names{"mu"};
  if (spec.spatial) {
    for (int i = 0; i < n_areas; ++i) names.push_back("psi[" + std::to_string(i) + "]");
  }
  for (std::size_t v = 0; v < spec.variables.size(); ++v) {
    for (int k = 1; k < cardinalities[v]; ++k) {
      names.push_back("phi[" + spec.variables[v] + "][" + std::to_string(k) + "]");
    }
  }
  if (spec.spatial) {
    names.push_back("sigma");
    names.push_back("lambda");
  }
  return names;
}

ModelParameters PosteriorDraws::parameters(Eigen::Index draw) const {
  ModelParameters p;
  int col = 0;
  p.mu = values(draw, col++);
  if (spec.spatial) {
    p.psi = values.row(draw).segment(col, n_areas).transpose();
    col += n_areas;
  }
  for (int k : cardinalities) {
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(k);
    for (int l = 1; l < k; ++l) phi(l) = values(draw, col++);
    p.phi.push_back(std::move(phi));
  }
  if (spec.spatial) {
    p.sigma = values(draw, col++);
    p.lambda = values(draw, col++);
  }
  return p;
}

Eigen::MatrixXd PosteriorDraws::by_chain(int col) const {
  Eigen::MatrixXd out(chains, draws_per_chain);
  for (int c = 0; c < chains; ++c) out.row(c) = values.col(col).segment(c * draws_per_chain, draws_per_chain).transpose();
  return out;
}

namespace {

enum Block { kMu, kPhi, kPsi, kSigma, kSigmaRescale, kLambda, kMuShift, kBlockCount };
constexpr const char* kBlockNames[kBlockCount] = {"mu", "phi", "psi", "sigma", "sigma_rescale", "lambda", "mu_shift"};

struct Proposal {
  Block block = kMu;
  double log_scale = 0.0;
  int window_proposed = 0;
  int window_accepted = 0;
};

class ChainSampler {
 public:
  ChainSampler(const HierarchicalModel& model, const McmcConfig& config, Rng rng)
      : m_(model), cfg_(config), rng_(rng), current_(model.lcar()), candidate_(model.lcar()) {
    const ModelData& d = m_.data();
    const int cells = d.cells_per_area;
    all_cells_.resize(m_.n_cells());
    std::iota(all_cells_.begin(), all_cells_.end(), 0);
    area_cells_.resize(d.n_areas);
    for (int i = 0; i < d.n_areas; ++i) {
      for (int c = 0; c < cells; ++c) area_cells_[i].push_back(d.flat_index(i, c));
    }
    level_cells_.resize(d.cardinalities.size());
    for (std::size_t v = 0; v < d.cardinalities.size(); ++v) {
      level_cells_[v].resize(d.cardinalities[v]);
      for (int i = 0; i < d.n_areas; ++i) {
        for (int c = 0; c < cells; ++c) level_cells_[v][d.cell_levels[c][v]].push_back(d.flat_index(i, c));
      }
    }
    buffer_.resize(m_.n_cells());

    mu_ = add(kMu, 0.5);
    for (std::size_t v = 0; v < d.cardinalities.size(); ++v) {
      phi_.emplace_back();
      for (int k = 0; k < d.cardinalities[v]; ++k) phi_.back().push_back(add(kPhi, 0.5));
    }
    if (m_.spec().spatial) {
      for (int i = 0; i < d.n_areas; ++i) psi_.push_back(add(kPsi, 0.5));
      sigma_ = add(kSigma, 0.3);
      sigma_rescale_ = add(kSigmaRescale, 0.1);
      lambda_ = add(kLambda, 1.0);
      mu_shift_ = add(kMuShift, 0.1);
      const auto& g = m_.graph();
      degrees_ = g.degrees();
    }
    initialize();
  }

  void run(Eigen::MatrixXd& out, Eigen::Index first_row, std::vector<BlockAcceptance>& acceptance) {
    int batch = 0;
    Eigen::Index row = first_row;
    for (int it = 0; it < cfg_.iterations; ++it) {
      const bool sampling = it >= cfg_.burn_in;
      sweep(sampling);
      if (!sampling && (it + 1) % cfg_.adaptation_window == 0) adapt(++batch);
      if (sampling && (it - cfg_.burn_in + 1) % cfg_.thin == 0 && row < first_row + cfg_.draws_per_chain()) {
        store(out, row++);
      }
    }
    acceptance = totals_;
  }

 private:
  int add(Block b, double scale) {
    proposals_.push_back({b, std::log(scale), 0, 0});
    return static_cast<int>(proposals_.size()) - 1;
  }

  void initialize() {
    p_ = m_.initial_parameters();
    if (!std::isfinite(m_.log_posterior(p_))) {
      p_.mu = 0.0;
      if (!std::isfinite(m_.log_posterior(p_))) throw NumericError("mcmc: non-finite log posterior at initialization");
    }
    eta_ = m_.linear_predictor(p_);
    cell_ll_.resize(m_.n_cells());
    for (int k = 0; k < m_.n_cells(); ++k) cell_ll_(k) = m_.cell_log_likelihood(k, eta_(k));
    if (m_.spec().spatial) {
      current_.factorize(p_.lambda);
      quad_ = m_.lcar()->quadratic_form(p_.psi, p_.lambda);
    }
    totals_.resize(kBlockCount);
    for (int b = 0; b < kBlockCount; ++b) totals_[b].block = kBlockNames[b];
  }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
  double log_uniform() { return std::log(uniform_open(rng_)); }

  bool decide(int proposal, double log_ratio, bool sampling) {
    Proposal& pr = proposals_[proposal];
    const bool accept = std::isfinite(log_ratio) && (log_ratio >= 0.0 || log_uniform() < log_ratio);
    ++pr.window_proposed;
    if (accept) ++pr.window_accepted;
    if (sampling) {
      ++totals_[pr.block].proposed;
      if (accept) ++totals_[pr.block].accepted;
    }
    return accept;
  }

  double step(int proposal) { return std::exp(proposals_[proposal].log_scale) * normal(); }

  // Likelihood change when eta moves by `delta` on `cells`; candidate values go to buffer_.
  double shifted(const std::vector<int>& cells, double delta) {
    double change = 0.0;
    for (int k : cells) {
      buffer_(k) = m_.cell_log_likelihood(k, eta_(k) + delta);
      change += buffer_(k) - cell_ll_(k);
    }
    return change;
  }

  void commit_shift(const std::vector<int>& cells, double delta) {
    for (int k : cells) {
      eta_(k) += delta;
      cell_ll_(k) = buffer_(k);
    }
  }

  double psi_prior(double psi_quad) const { return -0.5 * psi_quad / (p_.sigma * p_.sigma); }

  void sweep(bool sampling) {
    update_mu(sampling);
    update_effects(sampling);
    if (!m_.spec().spatial) return;
    update_psi(sampling);
    update_sigma(sampling);
    update_sigma_rescale(sampling);
    update_lambda(sampling);
    update_mu_shift(sampling);
    quad_ = m_.lcar()->quadratic_form(p_.psi, p_.lambda);
  }

  void update_mu(bool sampling) {
    const double delta = step(mu_);
    const double ratio = shifted(all_cells_, delta) + m_.log_prior_intercept(p_.mu + delta) - m_.log_prior_intercept(p_.mu);
    if (decide(mu_, ratio, sampling)) {
      p_.mu += delta;
      commit_shift(all_cells_, delta);
    }
  }

  void update_effects(bool sampling) {
    for (std::size_t v = 0; v < phi_.size(); ++v) {
      for (std::size_t k = 1; k < phi_[v].size(); ++k) {
        const double delta = step(phi_[v][k]);
        const double old = p_.phi[v](k);
        const double ratio =
            shifted(level_cells_[v][k], delta) + m_.log_prior_effect(old + delta) - m_.log_prior_effect(old);
        if (decide(phi_[v][k], ratio, sampling)) {
          p_.phi[v](k) += delta;
          commit_shift(level_cells_[v][k], delta);
        }
      }
    }
  }

  void update_psi(bool sampling) {
    const auto& g = m_.graph();
    const double lambda = p_.lambda;
    for (int i = 0; i < m_.n_areas(); ++i) {
      const double delta = step(psi_[i]);
      const double old = p_.psi(i);
      const double proposed = old + delta;
      double neighbor_sum = 0.0;
      for (int j : g.neighbors(i)) neighbor_sum += p_.psi(j);
      const double diag = lambda * degrees_(i) + 1.0 - lambda;
      const double quad_change = diag * (proposed * proposed - old * old) - 2.0 * lambda * delta * neighbor_sum;
      const double ratio = shifted(area_cells_[i], delta) + psi_prior(quad_change);
      if (decide(psi_[i], ratio, sampling)) {
        p_.psi(i) = proposed;
        commit_shift(area_cells_[i], delta);
      }
    }
    quad_ = m_.lcar()->quadratic_form(p_.psi, p_.lambda);
  }

  // Centred move: sigma alone, on the log scale.
  void update_sigma(bool sampling) {
    const double log_change = step(sigma_);
    const double proposed = p_.sigma * std::exp(log_change);
    const double n = m_.n_areas();
    const double prior_new = m_.log_prior_sigma(proposed);
    double ratio = -std::numeric_limits<double>::infinity();
    if (std::isfinite(prior_new)) {
      ratio = -n * log_change - 0.5 * quad_ * (1.0 / (proposed * proposed) - 1.0 / (p_.sigma * p_.sigma)) +
              prior_new - m_.log_prior_sigma(p_.sigma) + log_change;
    }
    if (decide(sigma_, ratio, sampling)) p_.sigma = proposed;
  }

  // Non-centred move: psi and sigma scaled together, so psi / sigma is unchanged.
  void update_sigma_rescale(bool sampling) {
    const double log_change = step(sigma_rescale_);
    const double factor = std::exp(log_change);
    const double proposed = p_.sigma * factor;
    const double prior_new = m_.log_prior_sigma(proposed);
    double ratio = -std::numeric_limits<double>::infinity();
    if (std::isfinite(prior_new)) {
      double change = 0.0;
      for (int i = 0; i < m_.n_areas(); ++i) {
        const double delta = (factor - 1.0) * p_.psi(i);
        for (int k : area_cells_[i]) {
          buffer_(k) = m_.cell_log_likelihood(k, eta_(k) + delta);
          change += buffer_(k) - cell_ll_(k);
        }
      }
      ratio = change + prior_new - m_.log_prior_sigma(p_.sigma) + log_change;
    }
    if (decide(sigma_rescale_, ratio, sampling)) {
      for (int i = 0; i < m_.n_areas(); ++i) {
        const double delta = (factor - 1.0) * p_.psi(i);
        for (int k : area_cells_[i]) {
          eta_(k) += delta;
          cell_ll_(k) = buffer_(k);
        }
      }
      p_.psi *= factor;
      p_.sigma = proposed;
      quad_ *= factor * factor;
    }
  }

  // Logit-scale move on lambda; the log determinant changes with lambda.
  void update_lambda(bool sampling) {
    const double z = logit(p_.lambda) + step(lambda_);
    const double proposed = logistic(z);
    double ratio = -std::numeric_limits<double>::infinity();
    double proposed_quad = 0.0;
    const double prior_new = m_.log_prior_lambda(proposed);
    if (std::isfinite(prior_new) && proposed > 0.0) {
      bool ok = true;
      try {
        candidate_.factorize(proposed);
      } catch (const NumericError&) {
        ok = false;
      }
      if (ok) {
        proposed_quad = m_.lcar()->quadratic_form(p_.psi, proposed);
        const double jacobian = std::log(proposed) + std::log1p(-proposed) - std::log(p_.lambda) - std::log1p(-p_.lambda);
        ratio = 0.5 * (candidate_.log_det_structure() - current_.log_det_structure()) +
                psi_prior(proposed_quad) - psi_prior(quad_) + prior_new - m_.log_prior_lambda(p_.lambda) + jacobian;
      }
    }
    if (decide(lambda_, ratio, sampling)) {
      p_.lambda = proposed;
      quad_ = proposed_quad;
      std::swap(current_, candidate_);
    }
  }

  // Moves mu and psi in opposite directions; the linear predictor is unchanged.
  void update_mu_shift(bool sampling) {
    const double delta = step(mu_shift_);
    const double n = m_.n_areas();
    const double keep = 1.0 - p_.lambda;
    const double quad_change = -2.0 * delta * keep * p_.psi.sum() + delta * delta * keep * n;
    const double ratio =
        m_.log_prior_intercept(p_.mu + delta) - m_.log_prior_intercept(p_.mu) + psi_prior(quad_change);
    if (decide(mu_shift_, ratio, sampling)) {
      p_.mu += delta;
      p_.psi.array() -= delta;
      quad_ += quad_change;
    }
  }

  void adapt(int batch) {
    const double step_size = std::min(1.0, 1.0 / std::sqrt(static_cast<double>(batch)));
    for (auto& pr : proposals_) {
      if (pr.window_proposed > 0) {
        const double rate = static_cast<double>(pr.window_accepted) / pr.window_proposed;
        pr.log_scale += rate > cfg_.target_acceptance ? step_size : -step_size;
        pr.log_scale = std::clamp(pr.log_scale, -20.0, 5.0);
      }
      pr.window_proposed = 0;
      pr.window_accepted = 0;
    }
  }

  void store(Eigen::MatrixXd& out, Eigen::Index row) const {
    int col = 0;
    out(row, col++) = p_.mu;
    if (m_.spec().spatial) {
      out.row(row).segment(col, m_.n_areas()) = p_.psi.transpose();
      col += m_.n_areas();
    }
    for (const auto& phi : p_.phi) {
      for (Eigen::Index k = 1; k < phi.size(); ++k) out(row, col++) = phi(k);
    }
    if (m_.spec().spatial) {
      out(row, col++) = p_.sigma;
      out(row, col++) = p_.lambda;
    }
  }

  const HierarchicalModel& m_;
  const McmcConfig& cfg_;
  Rng rng_;
  LcarFactor current_;
  LcarFactor candidate_;
  ModelParameters p_;
  Eigen::VectorXd eta_;
  Eigen::VectorXd cell_ll_;
  Eigen::VectorXd buffer_;
  Eigen::VectorXi degrees_;
  double quad_ = 0.0;

  std::vector<int> all_cells_;
  std::vector<std::vector<int>> area_cells_;
  std::vector<std::vector<std::vector<int>>> level_cells_;

  std::vector<Proposal> proposals_;
  int mu_ = -1;
  std::vector<std::vector<int>> phi_;
  std::vector<int> psi_;
  int sigma_ = -1;
  int sigma_rescale_ = -1;
  int lambda_ = -1;
  int mu_shift_ = -1;
  std::vector<BlockAcceptance> totals_;
};

}  // namespace

PosteriorDraws run_mcmc(const HierarchicalModel& model, const McmcConfig& config) {
  config.validate();
  PosteriorDraws draws;
  draws.spec = model.spec();
  draws.n_areas = model.n_areas();
  draws.cardinalities = model.data().cardinalities;
  draws.names = parameter_names(draws.spec, draws.n_areas, draws.cardinalities);
  draws.chains = config.chains;
  draws.draws_per_chain = config.draws_per_chain();
  draws.values.resize(static_cast<Eigen::Index>(config.chains) * draws.draws_per_chain,
                      static_cast<Eigen::Index>(draws.names.size()));

  std::vector<std::vector<BlockAcceptance>> acceptance(config.chains);
  std::vector<std::exception_ptr> errors(config.chains);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int c = next++; c < config.chains; c = next++) {
      try {
        ChainSampler sampler(model, config, make_rng(config.seed, "mcmc/chain", static_cast<std::uint64_t>(c)));
        sampler.run(draws.values, static_cast<Eigen::Index>(c) * draws.draws_per_chain, acceptance[c]);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const int n_threads = std::min(config.threads, config.chains);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  draws.acceptance.resize(kBlockCount);
  for (int b = 0; b < kBlockCount; ++b) {
    draws.acceptance[b].block = kBlockNames[b];
    for (const auto& chain : acceptance) {
      draws.acceptance[b].proposed += chain[b].proposed;
      draws.acceptance[b].accepted += chain[b].accepted;
    }
  }
  std::erase_if(draws.acceptance, [](const BlockAcceptance& a) { return a.proposed == 0; });
  return draws;
}

}  // namespace sae
