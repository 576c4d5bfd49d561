#include "sae/assess.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "sae/csv.hpp"
#include "sae/error.hpp"
#include "sae/random.hpp"

namespace sae {

namespace {

std::optional<double> try_morans_i(const Eigen::VectorXd& values, const AreaGraph& graph) {
  try {
    return morans_i(values, graph);
  } catch (const NumericError&) {
    return std::nullopt;
  }
}

Eigen::VectorXd gather(const Eigen::VectorXd& values, const std::vector<int>& keep) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) out(static_cast<Eigen::Index>(k)) = values(keep[k]);
  return out;
}

void check_gold(const Eigen::VectorXd& gold, int n_areas, const AreaGraph& graph) {
  if (gold.size() != n_areas) throw ValidationError("gold standard has the wrong number of areas");
  if (graph.size() != n_areas) throw ValidationError("graph and estimates disagree on the number of areas");
}

}  // namespace

AssessmentReport assess(const EstimateSet& estimates, const Eigen::VectorXd& gold, const AreaGraph& graph) {
  const int n = static_cast<int>(estimates.areas.size());
  check_gold(gold, n, graph);
  AssessmentReport r;
  r.estimator = estimates.estimator;
  r.n_areas = n;

  std::vector<int> present;
  for (int i = 0; i < n; ++i) {
    if (!estimates.areas[i].missing()) present.push_back(i);
  }
  r.n_missing = n - static_cast<int>(present.size());
  if (present.empty()) throw ValidationError("assessment of '" + estimates.estimator + "': every area is missing");

  const Eigen::VectorXd points = gather(estimates.points(), present);
  const Eigen::VectorXd truth = gather(gold, present);
  const double m = static_cast<double>(present.size());
  r.rmse = std::sqrt((points - truth).squaredNorm() / m);
  if (present.size() >= 2) {
    const Eigen::ArrayXd dp = points.array() - points.mean();
    const Eigen::ArrayXd dt = truth.array() - truth.mean();
    const double denom = std::sqrt(dp.square().sum() * dt.square().sum());
    if (denom > 0.0) r.correlation = std::clamp((dp * dt).sum() / denom, -1.0, 1.0);
  }
  if (!r.correlation) r.notes.push_back("correlation undefined (fewer than two areas or constant values)");

  double length = 0.0;
  int covered = 0;
  int with_interval = 0;
  for (int i = 0; i < n; ++i) {
    const AreaEstimate& e = estimates.areas[i];
    if (!e.has_interval()) continue;
    ++with_interval;
    length += *e.high - *e.low;
    if (*e.low <= gold(i) && gold(i) <= *e.high) ++covered;
  }
  r.n_missing_interval = n - with_interval;
  if (with_interval > 0) {
    r.mean_interval_length = length / with_interval;
    r.coverage = static_cast<double>(covered) / with_interval;
  }

  const AreaGraph sub = static_cast<int>(present.size()) == n ? graph : graph.induced_subgraph(present);
  r.morans_i = try_morans_i(points, sub);
  r.gold_morans_i = try_morans_i(truth, sub);
  if (!r.morans_i) r.notes.push_back("Moran's I of the estimates undefined (constant values or no adjacent pairs)");
  if (r.n_missing > 0) r.notes.push_back(std::to_string(r.n_missing) + " areas missing, excluded pairwise");
  return r;
}

MoranComparison morans_comparison_bayes(const Eigen::MatrixXd& draws, double reference, const AreaGraph& graph) {
  if (draws.rows() < 100) throw ValidationError("Moran's I comparison needs at least 100 draws");
  if (draws.cols() != graph.size()) throw ValidationError("draws and graph disagree on the number of areas");
  MoranComparison c;
  c.reference = reference;
  int below = 0;
  for (const auto& value : morans_i_distribution(draws, graph)) {
    if (!value) {
      ++c.degenerate;
      continue;
    }
    ++c.used;
    if (*value < reference) ++below;
  }
  if (c.used == 0) throw NumericError("Moran's I comparison: every draw is degenerate");
  c.probability = static_cast<double>(below) / c.used;
  return c;
}

MoranComparison morans_comparison_bayes(const Eigen::MatrixXd& draws, const Eigen::VectorXd& gold,
                                        const AreaGraph& graph) {
  check_gold(gold, static_cast<int>(draws.cols()), graph);
  return morans_comparison_bayes(draws, morans_i(gold, graph), graph);
}

MoranComparison morans_comparison_freq(const EstimateSet& estimates, const Eigen::VectorXd& gold,
                                       const AreaGraph& graph, int replicates, std::uint64_t seed,
                                       bool clip_to_unit) {
  const int n = static_cast<int>(estimates.areas.size());
  check_gold(gold, n, graph);
  if (replicates < 1) throw ValidationError("t-simulation needs at least one replicate");

  std::vector<int> keep;
  for (int i = 0; i < n; ++i) {
    const AreaEstimate& e = estimates.areas[i];
    if (e.point && e.variance && e.df && *e.df >= 1.0 && *e.variance >= 0.0) keep.push_back(i);
  }
  if (keep.size() < 2) throw ValidationError("t-simulation: fewer than two areas have a reference distribution");
  const AreaGraph sub = static_cast<int>(keep.size()) == n ? graph : graph.induced_subgraph(keep);

  MoranComparison c;
  c.excluded_areas = n - static_cast<int>(keep.size());
  c.reference = morans_i(gather(gold, keep), sub);

  std::vector<std::student_t_distribution<double>> t;
  Eigen::VectorXd location(static_cast<Eigen::Index>(keep.size()));
  Eigen::VectorXd scale(location.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const AreaEstimate& e = estimates.areas[keep[k]];
    t.emplace_back(*e.df);
    location(static_cast<Eigen::Index>(k)) = *e.point;
    scale(static_cast<Eigen::Index>(k)) = std::sqrt(*e.variance);
  }

  Rng rng = make_rng(seed, "assess/t-simulation", 0);
  Eigen::VectorXd x(location.size());
  int below = 0;
  for (int rep = 0; rep < replicates; ++rep) {
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const double draw = t[static_cast<std::size_t>(k)](rng);
      x(k) = scale(k) > 0.0 ? location(k) + scale(k) * draw : location(k);
      if (clip_to_unit) x(k) = std::clamp(x(k), 0.0, 1.0);
    }
    const auto value = try_morans_i(x, sub);
    if (!value) {
      ++c.degenerate;
      continue;
    }
    ++c.used;
    if (*value < c.reference) ++below;
  }
  if (c.used == 0) throw NumericError("t-simulation: every replicate is degenerate");
  c.probability = static_cast<double>(below) / c.used;
  return c;
}

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

nlohmann::ordered_json value(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

void write_assessment_csv(const std::filesystem::path& path, const std::vector<AssessmentReport>& reports,
                          const std::string& comment) {
  std::ofstream out = open_output(path);
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "estimator,correlation,rmse,ci_length,coverage,morans_i,gold_morans_i,p_below_gold,p_method,n_missing,"
         "n_missing_interval\n";
  for (const auto& r : reports) {
    std::optional<double> p;
    if (r.moran_comparison) p = r.moran_comparison->probability;
    out << r.estimator << ',' << cell(r.correlation) << ',' << cell(r.rmse) << ',' << cell(r.mean_interval_length)
        << ',' << cell(r.coverage) << ',' << cell(r.morans_i) << ',' << cell(r.gold_morans_i) << ',' << cell(p)
        << ',' << (r.comparison_method.empty() ? "NA" : r.comparison_method) << ',' << r.n_missing << ','
        << r.n_missing_interval << '\n';
  }
}

void write_assessment_json(const std::filesystem::path& path, const std::vector<AssessmentReport>& reports,
                           const std::string& config_hash) {
  nlohmann::ordered_json doc;
  if (!config_hash.empty()) doc["config_hash"] = config_hash;
  doc["estimators"] = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json row;
    row["estimator"] = r.estimator;
    row["n_areas"] = r.n_areas;
    row["n_missing"] = r.n_missing;
    row["n_missing_interval"] = r.n_missing_interval;
    row["correlation"] = value(r.correlation);
    row["rmse"] = value(r.rmse);
    row["ci_length"] = value(r.mean_interval_length);
    row["coverage"] = value(r.coverage);
    row["morans_i"] = value(r.morans_i);
    row["gold_morans_i"] = value(r.gold_morans_i);
    if (r.moran_comparison) {
      const auto& c = *r.moran_comparison;
      row["moran_comparison"] = {{"method", r.comparison_method}, {"p_below_gold", c.probability},
                                 {"reference_i", c.reference}, {"used", c.used},
                                 {"degenerate", c.degenerate}, {"excluded_areas", c.excluded_areas}};
    } else {
      row["moran_comparison"] = nullptr;
    }
    row["notes"] = r.notes;
    doc["estimators"].push_back(std::move(row));
  }
  std::ofstream out = open_output(path);
  out << doc.dump(2) << '\n';
}

}  // namespace sae
