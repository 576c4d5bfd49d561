#include "sae/synth.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <memory>
#include <numeric>

#include "sae/error.hpp"
#include "sae/random.hpp"
#include "sae/special.hpp"

namespace sae {

namespace {

struct CategorySampler {
  int parent = -1;
  bool per_area = false;
  Eigen::MatrixXd cumulative;  // rows x K, last column == 1

  int draw(Rng& rng, int area, const std::uint8_t* person_categories) const {
    const Eigen::Index row = parent >= 0 ? person_categories[parent] : (per_area ? area : 0);
    const double u = std::generate_canonical<double, 53>(rng);
    const Eigen::Index k_max = cumulative.cols() - 1;
    for (Eigen::Index k = 0; k < k_max; ++k) {
      if (u < cumulative(row, k)) return static_cast<int>(k);
    }
    return static_cast<int>(k_max);
  }
};

CategorySampler make_sampler(const SyntheticVariable& v, int index, int n_areas,
                             const std::vector<SyntheticVariable>& all) {
  const Eigen::MatrixXd& p = v.probabilities;
  if (p.cols() != v.cardinality) {
    throw ValidationError("variable '" + v.name + "': probability table needs " + std::to_string(v.cardinality) + " columns");
  }
  CategorySampler s;
  s.parent = v.parent;
  if (v.parent >= 0) {
    if (v.parent >= index) throw ValidationError("variable '" + v.name + "': parent must be an earlier variable");
    if (p.rows() != all[v.parent].cardinality) {
      throw ValidationError("variable '" + v.name + "': conditional table needs one row per parent category");
    }
  } else if (p.rows() == n_areas && n_areas != 1) {
    s.per_area = true;
  } else if (p.rows() != 1) {
    throw ValidationError("variable '" + v.name + "': probability table needs 1 or n_areas rows");
  }
  s.cumulative.resize(p.rows(), p.cols());
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    if ((p.row(r).array() < 0.0).any() || !(p.row(r).sum() > 0.0)) {
      throw ValidationError("variable '" + v.name + "': probabilities must be non-negative with a positive sum");
    }
    double acc = 0.0;
    const double total = p.row(r).sum();
    for (Eigen::Index k = 0; k < p.cols(); ++k) {
      acc += p(r, k) / total;
      s.cumulative(r, k) = acc;
    }
    s.cumulative(r, p.cols() - 1) = 1.0;
  }
  return s;
}

// Ordered simple random sample of size k from [lo, hi).
std::vector<std::int64_t> sample_range(std::int64_t lo, std::int64_t hi, std::int64_t k, Rng& rng) {
  std::vector<std::int64_t> all(static_cast<std::size_t>(hi - lo));
  std::iota(all.begin(), all.end(), lo);
  std::vector<std::int64_t> chosen;
  chosen.reserve(static_cast<std::size_t>(k));
  std::sample(all.begin(), all.end(), std::back_inserter(chosen), k, rng);
  return chosen;
}

SurveySample empty_sample(const SyntheticTruth& truth) {
  SurveySample s;
  s.n_areas = truth.n_areas();
  s.variables = truth.variables;
  return s;
}

void append_person(SurveySample& s, const SyntheticTruth& truth, std::int64_t person) {
  SurveyRecord r;
  r.area = truth.area_of(person);
  r.y = truth.y[person];
  r.categories.resize(truth.variables.size());
  for (std::size_t v = 0; v < truth.variables.size(); ++v) r.categories[v] = truth.category(person, static_cast<int>(v));
  s.records.push_back(std::move(r));
}

int division_of(const std::vector<int>& division, int area) { return division.empty() ? 0 : division.at(area); }

}  // namespace

int SyntheticTruth::area_of(std::int64_t person) const {
  const auto it = std::upper_bound(area_start.begin(), area_start.end(), person);
  return static_cast<int>(std::distance(area_start.begin(), it)) - 1;
}

SyntheticTruth generate_population(const AreaGraph& graph, const PopulationConfig& config) {
  const int n_areas = graph.size();
  if (config.population.size() != n_areas) throw ValidationError("population vector length does not match the graph");
  if ((config.population.array() <= 0).any()) throw ValidationError("every area needs a positive population");
  config.field.validate();
  const auto& vars = config.variables;
  if (vars.size() > 16) throw ValidationError("too many auxiliary variables");

  SyntheticTruth truth;
  std::vector<CategorySampler> samplers;
  std::vector<Eigen::VectorXd> effects;
  for (std::size_t v = 0; v < vars.size(); ++v) {
    if (vars[v].cardinality < 1 || vars[v].cardinality > 255) {
      throw ValidationError("variable '" + vars[v].name + "': cardinality must be in [1, 255]");
    }
    samplers.push_back(make_sampler(vars[v], static_cast<int>(v), n_areas, vars));
    Eigen::VectorXd e = vars[v].effects.size() == 0 ? Eigen::VectorXd::Zero(vars[v].cardinality) : vars[v].effects;
    if (e.size() != vars[v].cardinality) throw ValidationError("variable '" + vars[v].name + "': one effect per category required");
    effects.push_back(e);
    truth.variables.push_back({vars[v].name, vars[v].cardinality, vars[v].labels});
  }

  Rng field_rng = make_rng(config.seed, "synth/field");
  LcarFactor factor(std::make_shared<const LcarStructure>(graph));
  truth.field = lcar_sample(factor, config.field, field_rng);

  const std::size_t n_vars = vars.size();
  const std::int64_t total = config.population.cast<std::int64_t>().sum();
  truth.area_start.resize(n_areas + 1, 0);
  truth.y.resize(total);
  truth.categories.resize(total * n_vars);

  auto& m = truth.margins;
  m.n_areas = n_areas;
  m.population = config.population.cast<double>();
  for (const auto& v : vars) m.tables[v.name] = Eigen::MatrixXd::Zero(n_areas, v.cardinality);
  if (n_vars >= 2) {
    m.crosstab = PopulationMargins::Crosstab{
        vars[0].name, vars[1].name,
        std::vector<Eigen::MatrixXd>(n_areas, Eigen::MatrixXd::Zero(vars[0].cardinality, vars[1].cardinality))};
  }
  truth.pi_gold.resize(n_areas);

  std::int64_t person = 0;
  for (int i = 0; i < n_areas; ++i) {
    truth.area_start[i] = person;
    Rng rng = make_rng(config.seed, "synth/individuals", static_cast<std::uint64_t>(i));
    std::int64_t positives = 0;
    for (int j = 0; j < config.population(i); ++j, ++person) {
      std::uint8_t* cats = truth.categories.data() + person * n_vars;
      double eta = config.intercept + truth.field(i);
      for (std::size_t v = 0; v < n_vars; ++v) {
        const int k = samplers[v].draw(rng, i, cats);
        cats[v] = static_cast<std::uint8_t>(k);
        eta += effects[v](k);
        m.tables[vars[v].name](i, k) += 1.0;
      }
      if (m.crosstab) m.crosstab->cells[i](cats[0], cats[1]) += 1.0;
      eta = std::clamp(eta, -kLinearPredictorClamp, kLinearPredictorClamp);
      const double u = std::generate_canonical<double, 53>(rng);
      const std::uint8_t y = u < logistic(eta) ? 1 : 0;
      truth.y[person] = y;
      positives += y;
    }
    truth.pi_gold(i) = static_cast<double>(positives) / config.population(i);
  }
  truth.area_start[n_areas] = person;
  m.validate();
  return truth;
}

std::vector<std::int64_t> srs_individuals(const SyntheticTruth& truth, const Eigen::VectorXi& per_area,
                                          std::uint64_t seed) {
  if (per_area.size() != truth.n_areas()) throw ValidationError("draw_srs: one sample size per area required");
  Rng rng = make_rng(seed, "synth/sample");
  std::vector<std::int64_t> chosen;
  for (int i = 0; i < truth.n_areas(); ++i) {
    const std::int64_t lo = truth.area_start[i];
    const std::int64_t hi = truth.area_start[i + 1];
    if (per_area(i) < 0 || per_area(i) > hi - lo) {
      throw ValidationError("draw_srs: sample size " + std::to_string(per_area(i)) + " exceeds the population of area " +
                            std::to_string(i));
    }
    const std::vector<std::int64_t> picked = sample_range(lo, hi, per_area(i), rng);
    chosen.insert(chosen.end(), picked.begin(), picked.end());
  }
  return chosen;
}

std::vector<std::int64_t> srs_individuals(const SyntheticTruth& truth, int total, std::uint64_t seed) {
  if (total < 0 || total > truth.n_individuals()) throw ValidationError("draw_srs: sample size exceeds the population");
  Rng rng = make_rng(seed, "synth/sample");
  return sample_range(0, truth.n_individuals(), total, rng);
}

SurveySample draw_srs(const SyntheticTruth& truth, const Eigen::VectorXi& per_area, std::uint64_t seed) {
  SurveySample s = empty_sample(truth);
  for (auto p : srs_individuals(truth, per_area, seed)) append_person(s, truth, p);
  return s;
}

SurveySample draw_srs(const SyntheticTruth& truth, int total, std::uint64_t seed) {
  SurveySample s = empty_sample(truth);
  for (auto p : srs_individuals(truth, total, seed)) append_person(s, truth, p);
  return s;
}

Eigen::MatrixXi stratum_populations(const SyntheticTruth& truth, const std::string& stratum,
                                    const std::vector<int>& division) {
  int v = -1;
  for (std::size_t k = 0; k < truth.variables.size(); ++k) {
    if (truth.variables[k].name == stratum) v = static_cast<int>(k);
  }
  if (v < 0) throw ValidationError("unknown stratum variable '" + stratum + "'");
  if (!division.empty() && static_cast<int>(division.size()) != truth.n_areas()) {
    throw ValidationError("division map must list one division per area");
  }
  DesignDescriptor d;
  d.division = division;
  const Eigen::MatrixXd& table = truth.margins.table(stratum);
  Eigen::MatrixXi pop = Eigen::MatrixXi::Zero(d.n_divisions(), truth.variables[v].cardinality);
  for (int i = 0; i < truth.n_areas(); ++i) pop.row(division_of(division, i)) += table.row(i).cast<int>();
  return pop;
}

Eigen::MatrixXi proportional_allocation(const Eigen::MatrixXi& stratum_population, int total_per_division) {
  Eigen::MatrixXi alloc = Eigen::MatrixXi::Zero(stratum_population.rows(), stratum_population.cols());
  for (Eigen::Index d = 0; d < stratum_population.rows(); ++d) {
    const double pop = stratum_population.row(d).sum();
    if (pop <= 0) continue;
    const int target = static_cast<int>(std::min<double>(total_per_division, pop));
    std::vector<std::pair<double, Eigen::Index>> remainders;
    int assigned = 0;
    for (Eigen::Index k = 0; k < stratum_population.cols(); ++k) {
      const double exact = target * stratum_population(d, k) / pop;
      alloc(d, k) = static_cast<int>(std::floor(exact));
      assigned += alloc(d, k);
      remainders.emplace_back(exact - alloc(d, k), k);
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](auto a, auto b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < target && r < remainders.size(); ++r) {
      const auto k = remainders[r].second;
      if (alloc(d, k) < stratum_population(d, k)) {
        ++alloc(d, k);
        ++assigned;
      }
    }
  }
  return alloc;
}

SurveySample draw_stratified(const SyntheticTruth& truth, const std::string& stratum,
                             const Eigen::MatrixXi& allocation, const std::vector<int>& division,
                             std::uint64_t seed) {
  const Eigen::MatrixXi pop = stratum_populations(truth, stratum, division);
  if (allocation.rows() != pop.rows() || allocation.cols() != pop.cols()) {
    throw ValidationError("draw_stratified: allocation must be divisions x strata (" + std::to_string(pop.rows()) + " x " +
                          std::to_string(pop.cols()) + ")");
  }
  for (Eigen::Index d = 0; d < pop.rows(); ++d) {
    for (Eigen::Index k = 0; k < pop.cols(); ++k) {
      if (allocation(d, k) < 0 || allocation(d, k) > pop(d, k)) {
        throw ValidationError("draw_stratified: allocation " + std::to_string(allocation(d, k)) + " exceeds stratum " +
                              std::to_string(k) + " of frame unit " + std::to_string(d) + " (size " +
                              std::to_string(pop(d, k)) + ")");
      }
    }
  }
  int v = 0;
  while (truth.variables[v].name != stratum) ++v;

  std::vector<std::vector<std::int64_t>> members(pop.size());
  for (int i = 0; i < truth.n_areas(); ++i) {
    const int d = division_of(division, i);
    for (std::int64_t p = truth.area_start[i]; p < truth.area_start[i + 1]; ++p) {
      members[d * pop.cols() + truth.category(p, v)].push_back(p);
    }
  }
  SurveySample s = empty_sample(truth);
  s.design.kind = DesignDescriptor::Kind::Stratified;
  s.design.stratum_variable = stratum;
  s.design.division = division;
  Rng rng = make_rng(seed, "synth/sample");
  std::vector<std::int64_t> chosen;
  for (Eigen::Index d = 0; d < pop.rows(); ++d) {
    for (Eigen::Index k = 0; k < pop.cols(); ++k) {
      chosen.clear();
      std::ranges::sample(members[d * pop.cols() + k], std::back_inserter(chosen), allocation(d, k), rng);
      for (auto p : chosen) append_person(s, truth, p);
    }
  }
  return s;
}

}  // namespace sae
