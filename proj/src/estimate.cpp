#include "sae/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sae/csv.hpp"
#include "sae/error.hpp"
#include "sae/special.hpp"

namespace sae {

namespace {

std::string cell_name(const CellTable& cells, int c) {
  const auto levels = cells.levels_of(c);
  std::string s = "(";
  for (std::size_t v = 0; v < levels.size(); ++v) s += (v ? "/" : "") + std::to_string(levels[v]);
  return s + ")";
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
}

void check_dimensions(const SurveySample& sample, const PopulationMargins& margins) {
  if (sample.n_areas != margins.n_areas) {
    throw ValidationError("sample has " + std::to_string(sample.n_areas) + " areas but margins have " +
                          std::to_string(margins.n_areas));
  }
}

std::string opt_to_string(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::optional<double> read_optional(const std::string& s, const std::string& where) {
  if (s == "NA" || s.empty()) return std::nullopt;
  return parse_double(s, where);
}

}  // namespace

int EstimateSet::n_missing() const {
  return static_cast<int>(std::count_if(areas.begin(), areas.end(), [](const auto& a) { return a.missing(); }));
}

Eigen::VectorXd EstimateSet::points() const {
  Eigen::VectorXd p(size());
  for (int i = 0; i < size(); ++i) p(i) = areas[i].point.value_or(std::nan(""));
  return p;
}

CombineMode parse_combine_mode(const std::string& name) {
  if (name == "crosstab") return CombineMode::Crosstab;
  if (name == "independence") return CombineMode::Independence;
  throw ValidationError("unknown combination mode '" + name + "' (expected crosstab or independence)");
}

EstimateSet poststratified_direct(const CellTable& cells, const Eigen::MatrixXd& weights,
                                  const Eigen::VectorXd& population, double alpha, std::string name) {
  check_alpha(alpha);
  const Eigen::Index n_areas = cells.n.rows();
  if (weights.rows() != n_areas || weights.cols() != cells.cells_per_area || population.size() != n_areas) {
    throw ValidationError("poststratified_direct: weight table does not match the cell table");
  }
  EstimateSet out;
  out.estimator = std::move(name);
  out.alpha = alpha;
  out.areas.resize(n_areas);
  for (Eigen::Index i = 0; i < n_areas; ++i) {
    AreaEstimate& est = out.areas[i];
    const double pop = population(i);
    if (!(pop > 0.0)) {
      est.missing_reason = "empty population";
      continue;
    }
    std::string empty;
    int n_empty = 0;
    int populated = 0;
    int total_n = 0;
    for (int c = 0; c < cells.cells_per_area; ++c) {
      if (weights(i, c) > 0.0) {
        ++populated;
        if (cells.n(i, c) == 0) {
          ++n_empty;
          empty += (empty.empty() ? "" : ";") + cell_name(cells, c);
        }
      }
      total_n += cells.n(i, c);
    }
    out.missing_cells += n_empty;
    if (total_n == 0) {
      est.missing_reason = "no sampled units";
      continue;
    }
    if (n_empty > 0) {
      est.missing_reason = "unsampled populated cells " + empty;
      continue;
    }
    double point = 0.0;
    double variance = 0.0;
    bool variance_ok = true;
    for (int c = 0; c < cells.cells_per_area; ++c) {
      const double w = weights(i, c);
      if (!(w > 0.0)) continue;
      const double n = cells.n(i, c);
      const double p = cells.successes(i, c) / n;
      const double share = w / pop;
      point += share * p;
      if (n < 2.0) {
        variance_ok = false;
        continue;
      }
      const double fpc = std::max(0.0, 1.0 - n / w);
      variance += share * share * (p * (1.0 - p) / n) * fpc;
    }
    est.point = std::clamp(point, 0.0, 1.0);
    if (!variance_ok) {
      est.missing_reason = "variance unavailable: cell with a single sampled unit";
      continue;
    }
    est.variance = variance;
    const double df = static_cast<double>(total_n - populated);
    if (df <= 0.0) continue;
    est.df = df;
    const double half = student_t_quantile(1.0 - alpha / 2.0, df) * std::sqrt(variance);
    est.low = std::max(0.0, *est.point - half);
    est.high = std::min(1.0, *est.point + half);
  }
  return out;
}

Eigen::MatrixXd cell_weights(std::span<const std::string> names, std::span<const int> cardinalities,
                             const PopulationMargins& margins, CombineMode mode) {
  const int n_areas = margins.n_areas;
  int cells = 1;
  for (int k : cardinalities) cells *= k;
  Eigen::MatrixXd w(n_areas, cells);
  if (names.empty()) {
    w.col(0) = margins.population;
    return w;
  }
  if (names.size() == 1) {
    const auto& t = margins.table(names[0]);
    if (t.cols() != cells) throw ValidationError("margins table cardinality mismatch");
    return t;
  }
  if (mode == CombineMode::Crosstab) {
    if (names.size() != 2) throw ValidationError("crosstab weights cover exactly two variables");
    const std::string& first = names[0];
    const std::string& second = names[1];
    const int k1 = cardinalities[0];
    const int k2 = cardinalities[1];
    if (!margins.crosstab) throw ValidationError("crosstab mode requested but no crosstab margins are available");
    const auto& ct = *margins.crosstab;
    bool transposed = false;
    if (ct.first == second && ct.second == first) {
      transposed = true;
    } else if (!(ct.first == first && ct.second == second)) {
      throw ValidationError("crosstab margins cover '" + ct.first + "' x '" + ct.second + "', not '" + first +
                            "' x '" + second + "'");
    }
    for (int i = 0; i < n_areas; ++i) {
      for (int a = 0; a < k1; ++a) {
        for (int b = 0; b < k2; ++b) w(i, a * k2 + b) = transposed ? ct.cells[i](b, a) : ct.cells[i](a, b);
      }
    }
    return w;
  }
  // Independence: N_i prod_v (N_i^{k_v} / N_i).
  std::vector<const Eigen::MatrixXd*> tables;
  for (const auto& name : names) tables.push_back(&margins.table(name));
  for (std::size_t v = 0; v < names.size(); ++v) {
    if (tables[v]->cols() != cardinalities[v]) throw ValidationError("margins table cardinality mismatch");
  }
  for (int i = 0; i < n_areas; ++i) {
    const double pop = margins.population(i);
    for (int c = 0; c < cells; ++c) {
      if (!(pop > 0.0)) {
        w(i, c) = 0.0;
        continue;
      }
      double value = pop;
      int rest = c;
      for (int v = static_cast<int>(names.size()) - 1; v >= 0; --v) {
        const int level = rest % cardinalities[v];
        rest /= cardinalities[v];
        value *= (*tables[v])(i, level) / pop;
      }
      w(i, c) = value;
    }
  }
  return w;
}

Eigen::MatrixXd cell_weights(const SurveySample& sample, const CellTable& cells,
                             const PopulationMargins& margins, CombineMode mode) {
  check_dimensions(sample, margins);
  std::vector<std::string> names;
  for (int v : cells.variables) names.push_back(sample.variables[v].name);
  return cell_weights(names, cells.cardinalities, margins, mode);
}

EstimateSet srs_estimate(const SurveySample& sample, const PopulationMargins& margins, double alpha) {
  check_dimensions(sample, margins);
  const CellTable cells = cell_counts(sample, {});
  for (int i = 0; i < sample.n_areas; ++i) {
    if (cells.n(i, 0) > margins.population(i)) {
      throw ValidationError("area " + std::to_string(i) + " has more sampled units than population");
    }
  }
  return poststratified_direct(cells, cell_weights(sample, cells, margins, CombineMode::Crosstab),
                               margins.population, alpha, "srs");
}

BayesSrsResult bayes_srs_estimate(const SurveySample& sample, double alpha) {
  check_alpha(alpha);
  const Eigen::VectorXi n = sample.area_sizes();
  const Eigen::VectorXi o = sample.area_successes();
  BayesSrsResult r;
  r.estimates.estimator = "bayes_srs";
  r.estimates.alpha = alpha;
  r.estimates.areas.resize(sample.n_areas);
  r.posterior.shape1 = (o.array() + 1).cast<double>();
  r.posterior.shape2 = (n.array() - o.array() + 1).cast<double>();
  r.posterior_mean = r.posterior.shape1.array() / (r.posterior.shape1 + r.posterior.shape2).array();
  for (int i = 0; i < sample.n_areas; ++i) {
    const double a = r.posterior.shape1(i);
    const double b = r.posterior.shape2(i);
    AreaEstimate& est = r.estimates.areas[i];
    est.point = n(i) > 0 ? static_cast<double>(o(i)) / n(i) : r.posterior_mean(i);
    est.variance = a * b / ((a + b) * (a + b) * (a + b + 1.0));
    est.low = beta_quantile(a, b, alpha / 2.0);
    est.high = beta_quantile(a, b, 1.0 - alpha / 2.0);
  }
  return r;
}

EstimateSet stratified_estimate(const SurveySample& sample, const PopulationMargins& margins,
                                const std::string& stratum, double alpha) {
  check_dimensions(sample, margins);
  const std::string vars[] = {stratum};
  const CellTable cells = cell_counts(sample, vars);
  return poststratified_direct(cells, cell_weights(sample, cells, margins, CombineMode::Crosstab),
                               margins.population, alpha, "stratified");
}

EstimateSet ratio_estimate(const SurveySample& sample, const PopulationMargins& margins,
                           const std::string& variable, double alpha) {
  check_dimensions(sample, margins);
  const std::string vars[] = {variable};
  const CellTable cells = cell_counts(sample, vars);
  return poststratified_direct(cells, cell_weights(sample, cells, margins, CombineMode::Crosstab),
                               margins.population, alpha, "ratio");
}

EstimateSet combined_estimate(const SurveySample& sample, const PopulationMargins& margins,
                              const std::string& first, const std::string& second, double alpha,
                              CombineMode mode) {
  check_dimensions(sample, margins);
  if (first == second) throw ValidationError("combined_estimate needs two distinct variables");
  const std::string vars[] = {first, second};
  const CellTable cells = cell_counts(sample, vars);
  return poststratified_direct(cells, cell_weights(sample, cells, margins, mode), margins.population, alpha,
                               "combined");
}

void write_estimates_csv(const std::filesystem::path& path, const EstimateSet& estimates, const AreaIndex& areas,
                         const std::string& comment) {
  if (estimates.size() != areas.size()) throw ValidationError("write_estimates_csv: area count mismatch");
  std::ofstream out = open_output(path);
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "area,estimator,point,variance,low,high,missing_reason\n";
  for (int i = 0; i < estimates.size(); ++i) {
    const auto& e = estimates.areas[i];
    out << quote(areas.label(i)) << "," << estimates.estimator << "," << opt_to_string(e.point) << ","
        << opt_to_string(e.variance) << "," << opt_to_string(e.low) << "," << opt_to_string(e.high) << ","
        << quote(e.missing_reason) << "\n";
  }
}

EstimateSet read_estimates_csv(const std::filesystem::path& path, const AreaIndex& areas) {
  const CsvTable t = read_csv(path);
  const std::size_t ca = t.column("area");
  const std::size_t ce = t.column("estimator");
  const std::size_t cp = t.column("point");
  const std::size_t cv = t.column("variance");
  const std::size_t cl = t.column("low");
  const std::size_t ch = t.column("high");
  const std::size_t cm = t.column("missing_reason");
  EstimateSet out;
  out.areas.resize(areas.size());
  std::vector<bool> seen(areas.size(), false);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = t.location(r);
    const int i = areas.find(row[ca], where);
    out.estimator = row[ce];
    auto& e = out.areas[i];
    e.point = read_optional(row[cp], where);
    e.variance = read_optional(row[cv], where);
    e.low = read_optional(row[cl], where);
    e.high = read_optional(row[ch], where);
    e.missing_reason = row[cm];
    seen[i] = true;
  }
  for (int i = 0; i < areas.size(); ++i) {
    if (!seen[i]) throw ValidationError(path.string() + ": no row for area '" + areas.label(i) + "'");
  }
  return out;
}

void write_t_reference(const std::filesystem::path& path, const EstimateSet& estimates, const AreaIndex& areas,
                       const std::string& comment) {
  std::ofstream out = open_output(path);
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "area,df,scale\n";
  for (int i = 0; i < estimates.size(); ++i) {
    const auto& e = estimates.areas[i];
    const std::optional<double> scale = e.variance ? std::optional<double>(std::sqrt(*e.variance)) : std::nullopt;
    out << quote(areas.label(i)) << "," << opt_to_string(e.df) << "," << opt_to_string(scale) << "\n";
  }
}

void read_t_reference(const std::filesystem::path& path, EstimateSet& estimates, const AreaIndex& areas) {
  const CsvTable t = read_csv(path);
  const std::size_t ca = t.column("area");
  const std::size_t cd = t.column("df");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = t.location(r);
    estimates.areas.at(areas.find(t.rows[r][ca], where)).df = read_optional(t.rows[r][cd], where);
  }
}

}  // namespace sae
