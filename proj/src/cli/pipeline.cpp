#include "sae/cli/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

#include "sae/assess.hpp"
#include "sae/cli/svg.hpp"
#include "sae/csv.hpp"
#include "sae/error.hpp"
#include "sae/estimate.hpp"
#include "sae/mcmc.hpp"
#include "sae/model.hpp"
#include "sae/posterior.hpp"
#include "sae/random.hpp"

namespace sae::cli {

namespace fs = std::filesystem;

namespace {

const std::set<std::string>& bayesian_estimators() {
  static const std::set<std::string> names{"bayes_srs", "spatial", "spatial_fpc", "str_small", "full"};
  return names;
}

std::string hash_comment(const RunConfig& cfg) { return "config-hash: " + cfg.hash; }

std::string area_label(int index, int n_areas) {
  const int width = static_cast<int>(std::to_string(n_areas).size());
  std::string digits = std::to_string(index + 1);
  return "area" + std::string(width - digits.size(), '0') + digits;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

void write_json(const fs::path& path, const Json& doc) {
  std::ofstream out = open_output(path);
  out << doc.dump(2) << "\n";
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- simulate

SyntheticVariable to_synthetic(const SimulatedVariable& v, const std::vector<SimulatedVariable>& all, int n_areas,
                               std::uint64_t seed) {
  SyntheticVariable out;
  out.name = v.name;
  out.cardinality = static_cast<int>(v.effects.size());
  out.labels = v.labels;
  out.effects = v.effects;
  out.probabilities = v.probabilities;
  if (!v.parent.empty()) {
    out.parent = static_cast<int>(
        std::find_if(all.begin(), all.end(), [&](const auto& e) { return e.name == v.parent; }) - all.begin());
  } else if (v.area_variation > 0.0) {
    // Area-specific distributions: logit-scale perturbations of the shared probabilities.
    Rng rng = make_rng(seed, "simulate/categories/" + v.name);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd p(n_areas, out.cardinality);
    for (int i = 0; i < n_areas; ++i) {
      for (int k = 0; k < out.cardinality; ++k) {
        p(i, k) = v.probabilities(0, k) * std::exp(v.area_variation * normal(rng));
      }
      p.row(i) /= p.row(i).sum();
    }
    out.probabilities = p;
  }
  return out;
}

// ---------------------------------------------------------------- inputs

AreaGraph graph_from_shapes(const std::vector<AreaShape>& shapes, AdjacencyRule rule) {
  return adjacency_from_shapes(shapes, rule);
}

std::vector<AreaShape> shapes_in_area_order(std::vector<AreaShape> shapes, const AreaIndex& areas,
                                            const fs::path& path) {
  if (static_cast<int>(shapes.size()) != areas.size()) {
    throw ValidationError(path.string() + ": " + std::to_string(shapes.size()) + " features for " +
                          std::to_string(areas.size()) + " areas");
  }
  std::vector<AreaShape> ordered(shapes.size());
  std::vector<bool> seen(shapes.size(), false);
  for (auto& s : shapes) {
    const int i = areas.find(s.label, path.string());
    if (seen[i]) throw ValidationError(path.string() + ": area '" + s.label + "' appears twice");
    seen[i] = true;
    ordered[i] = std::move(s);
  }
  return ordered;
}

int tile_columns(int n) { return std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))))); }

// ---------------------------------------------------------------- estimate

struct EstimatorOutcome {
  std::string name;
  bool ok = false;
  std::string reason;
  std::vector<std::string> files;
  bool warning = false;
};

void write_area_draws(const fs::path& path, const AreaDraws& draws, const AreaIndex& areas, const std::string& comment) {
  std::ofstream out = open_output(path);
  out << "# " << comment << "\n";
  out << "chain,draw";
  for (const auto& label : areas.labels()) out << "," << label;
  out << "\n";
  const int per_chain = draws.draws_per_chain();
  for (Eigen::Index r = 0; r < draws.values.rows(); ++r) {
    out << r / per_chain << "," << r % per_chain;
    for (Eigen::Index c = 0; c < draws.values.cols(); ++c) out << "," << format_double(draws.values(r, c));
    out << "\n";
  }
}

Eigen::MatrixXd read_area_draws(const fs::path& path, const AreaIndex& areas) {
  const CsvTable t = read_csv(path);
  std::vector<std::size_t> cols;
  for (const auto& label : areas.labels()) cols.push_back(t.column(label));
  Eigen::MatrixXd values(static_cast<Eigen::Index>(t.rows.size()), areas.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (int c = 0; c < areas.size(); ++c) values(r, c) = parse_double(t.rows[r][cols[c]], t.location(r));
  }
  return values;
}

void write_parameter_draws(const fs::path& path, const PosteriorDraws& draws, const std::string& comment) {
  std::ofstream out = open_output(path);
  out << "# " << comment << "\n";
  out << "chain,draw";
  for (const auto& name : draws.names) out << "," << name;
  out << "\n";
  for (Eigen::Index r = 0; r < draws.values.rows(); ++r) {
    out << r / draws.draws_per_chain << "," << r % draws.draws_per_chain;
    for (Eigen::Index c = 0; c < draws.values.cols(); ++c) out << "," << format_double(draws.values(r, c));
    out << "\n";
  }
}

Json diagnostics_json(const Diagnostics& d, const std::vector<std::string>& labels) {
  Json arr = Json::array();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    arr.push_back({{"name", labels[i]},
                   {"rhat", number_or_null(d.rhat(static_cast<Eigen::Index>(i)))},
                   {"ess", number_or_null(d.ess(static_cast<Eigen::Index>(i)))}});
  }
  return arr;
}

// Direct estimators need population counts; spell out what is missing.
std::string missing_table_reason(const std::optional<PopulationMargins>& margins, const std::string& variable) {
  if (!margins) return "population margins file not available";
  if (!margins->has_table(variable)) return "no population margins for variable '" + variable + "'";
  return {};
}

class EstimatePipeline {
 public:
  EstimatePipeline(const RunConfig& cfg, const Inputs& in) : cfg_(cfg), in_(in) {
    for (const auto& name : cfg.estimators.names) check_variables(name);
    population_ = in.margins ? std::optional<Eigen::VectorXd>(in.margins->population)
                             : (in.areas.population().size() == in.areas.size()
                                    ? std::optional<Eigen::VectorXd>(in.areas.population())
                                    : std::nullopt);
  }

  std::vector<EstimatorOutcome> run() {
    const auto& names = cfg_.estimators.names;
    const auto launch = cfg_.estimators.parallel ? std::launch::async : std::launch::deferred;
    for (const auto& name : names) {
      if (skip_reason(name).empty()) {
        const std::string fit = fit_key(name);
        if (!fit.empty() && !fits_.count(fit)) {
          fits_.emplace(fit, std::async(launch, [this, fit] { return fit_model(fit); }).share());
        }
      }
    }
    std::vector<EstimatorOutcome> outcomes(names.size());
    if (cfg_.estimators.parallel) {
      std::vector<std::future<EstimatorOutcome>> jobs;
      for (const auto& name : names) jobs.push_back(std::async(std::launch::async, [this, name] { return run_one(name); }));
      for (std::size_t i = 0; i < jobs.size(); ++i) outcomes[i] = jobs[i].get();
    } else {
      for (std::size_t i = 0; i < names.size(); ++i) outcomes[i] = run_one(names[i]);
    }
    return outcomes;
  }

 private:
  const RunConfig& cfg_;
  const Inputs& in_;
  std::optional<Eigen::VectorXd> population_;
  std::map<std::string, std::shared_future<PosteriorDraws>> fits_;

  fs::path out(const std::string& rel) const { return cfg_.out / rel; }

  void check_variables(const std::string& name) const {
    auto require = [&](const std::string& variable, const std::string& field) {
      if (!in_.schema.find(variable)) {
        throw ValidationError("config: " + field + ": variable '" + variable + "' is not in the schema");
      }
    };
    const auto& e = cfg_.estimators;
    if (name == "stratified" || name == "str_small") require(e.stratum, "estimators.stratum");
    if (name == "ratio") require(e.ratio_variable, "estimators.ratio_variable");
    if (name == "combined" || name == "full") {
      for (const auto& v : e.combined) require(v, "estimators.combined");
    }
  }

  static std::string fit_key(const std::string& name) {
    if (name == "spatial" || name == "spatial_fpc") return "spatial";
    if (name == "str_small" || name == "full") return name;
    return {};
  }

  std::vector<std::string> fit_variables(const std::string& key) const {
    if (key == "str_small") return {cfg_.estimators.stratum};
    if (key == "full") return cfg_.estimators.combined;
    return {};
  }

  std::string combined_reason() const {
    const auto& pair = cfg_.estimators.combined;
    if (!in_.margins) return "population margins file not available";
    if (cfg_.estimators.combine_mode == CombineMode::Crosstab) {
      const auto& ct = in_.margins->crosstab;
      const bool match = ct && ((ct->first == pair[0] && ct->second == pair[1]) ||
                                (ct->first == pair[1] && ct->second == pair[0]));
      if (!match) return "no population crosstab of '" + pair[0] + "' by '" + pair[1] + "'";
      return {};
    }
    for (const auto& v : pair) {
      if (auto r = missing_table_reason(in_.margins, v); !r.empty()) return r;
    }
    return {};
  }

  std::string skip_reason(const std::string& name) const {
    const auto& e = cfg_.estimators;
    if (name == "srs" || name == "spatial_fpc") {
      return population_ ? std::string() : "population totals not available (margins or area list)";
    }
    if (name == "stratified" || name == "str_small") return missing_table_reason(in_.margins, e.stratum);
    if (name == "ratio") return missing_table_reason(in_.margins, e.ratio_variable);
    if (name == "combined" || name == "full") return combined_reason();
    return {};
  }

  PosteriorDraws fit_model(const std::string& key) const {
    ModelSpec spec{cfg_.estimators.likelihood, true, fit_variables(key)};
    HierarchicalModel model(spec, make_model_data(spec, in_.sample), in_.graph, cfg_.hyperpriors);
    McmcConfig mc = cfg_.mcmc;
    mc.seed = derive_seed(cfg_.seed, "estimate/fit/" + key);
    PosteriorDraws draws = run_mcmc(model, mc);
    write_parameter_draws(out("draws/" + key + ".parameters.csv"), draws, hash_comment(cfg_));
    return draws;
  }

  PopulationMargins margins_with_population() const {
    if (in_.margins) return *in_.margins;
    PopulationMargins m;
    m.n_areas = in_.areas.size();
    m.population = *population_;
    return m;
  }

  EstimatorOutcome run_one(const std::string& name) {
    EstimatorOutcome o;
    o.name = name;
    o.reason = skip_reason(name);
    if (!o.reason.empty()) return o;
    o.ok = true;
    const double alpha = cfg_.alpha;
    const auto& e = cfg_.estimators;
    const std::string comment = hash_comment(cfg_);
    const std::string est_file = "estimates/" + name + ".csv";

    auto write_direct = [&](EstimateSet est) {
      est.estimator = name;
      write_estimates_csv(out(est_file), est, in_.areas, comment);
      write_t_reference(out("estimates/" + name + ".t.csv"), est, in_.areas, comment);
      o.files = {est_file, "estimates/" + name + ".t.csv"};
    };

    if (name == "srs") {
      write_direct(srs_estimate(in_.sample, margins_with_population(), alpha));
    } else if (name == "stratified") {
      write_direct(stratified_estimate(in_.sample, *in_.margins, e.stratum, alpha));
    } else if (name == "ratio") {
      write_direct(ratio_estimate(in_.sample, *in_.margins, e.ratio_variable, alpha));
    } else if (name == "combined") {
      write_direct(combined_estimate(in_.sample, *in_.margins, e.combined[0], e.combined[1], alpha, e.combine_mode));
    } else if (name == "bayes_srs") {
      BayesSrsResult r = bayes_srs_estimate(in_.sample, alpha);
      r.estimates.estimator = name;
      write_estimates_csv(out(est_file), r.estimates, in_.areas, comment);
      write_area_draws(out("draws/bayes_srs.csv"), beta_draws(r.posterior), in_.areas, comment);
      o.files = {est_file, "draws/bayes_srs.csv"};
    } else {
      const std::string key = fit_key(name);
      const PosteriorDraws& draws = fits_.at(key).get();
      AreaDraws area_draws;
      if (name == "spatial") {
        area_draws = pi_star_areas(draws);
      } else if (name == "spatial_fpc") {
        area_draws = finite_population_estimate(pi_star_areas(draws), in_.sample, *population_,
                                                derive_seed(cfg_.seed, "estimate/spatial_fpc"));
      } else {
        area_draws = poststratified_posterior(draws, *in_.margins, name == "full" ? e.combine_mode : CombineMode::Crosstab);
      }
      area_draws.name = name;
      PosteriorSummary summary = summarize(area_draws, alpha);
      summary.estimates.estimator = name;
      write_estimates_csv(out(est_file), summary.estimates, in_.areas, comment);
      write_area_draws(out("draws/" + name + ".csv"), area_draws, in_.areas, comment);

      const Diagnostics params = diagnose(draws);
      Json acc = Json::array();
      for (const auto& b : draws.acceptance) {
        acc.push_back({{"block", b.block}, {"proposed", b.proposed}, {"accepted", b.accepted}, {"rate", b.rate()}});
      }
      std::vector<std::string> messages = params.messages;
      messages.insert(messages.end(), summary.diagnostics.messages.begin(), summary.diagnostics.messages.end());
      o.warning = params.warning || summary.diagnostics.warning;
      Json diag = {{"config_hash", cfg_.hash},
                   {"estimator", name},
                   {"chains", draws.chains},
                   {"draws_per_chain", draws.draws_per_chain},
                   {"warning", o.warning},
                   {"messages", messages},
                   {"acceptance", acc},
                   {"parameters", diagnostics_json(params, draws.names)},
                   {"areas", diagnostics_json(summary.diagnostics, in_.areas.labels())}};
      write_json(out("diagnostics/" + name + ".json"), diag);
      o.files = {est_file, "draws/" + name + ".csv", "draws/" + key + ".parameters.csv",
                 "diagnostics/" + name + ".json"};
    }
    return o;
  }

  // Independent Beta posterior draws per area, kept for the Moran comparison.
  AreaDraws beta_draws(const BetaPosterior& post) const {
    Rng rng = make_rng(cfg_.seed, "estimate/bayes_srs");
    const int n_draws = cfg_.estimators.beta_draws;
    AreaDraws d;
    d.name = "bayes_srs";
    d.chains = 1;
    d.values.resize(n_draws, post.shape1.size());
    for (int r = 0; r < n_draws; ++r) {
      for (Eigen::Index i = 0; i < post.shape1.size(); ++i) {
        std::gamma_distribution<double> ga(post.shape1(i)), gb(post.shape2(i));
        const double x = ga(rng);
        const double y = gb(rng);
        d.values(r, i) = x / (x + y);
      }
    }
    return d;
  }
};

// ---------------------------------------------------------------- assess

struct Assessed {
  AssessmentReport report;
  EstimateSet estimates;
  bool mapped = true;
};

EstimateSet masked(const EstimateSet& base, const EstimateSet& mask, const std::string& name) {
  EstimateSet out = base;
  out.estimator = name;
  for (int i = 0; i < out.size(); ++i) {
    if (mask.areas[i].missing()) {
      out.areas[i] = AreaEstimate{};
      out.areas[i].missing_reason = "excluded to match " + mask.estimator;
    }
  }
  return out;
}

// An estimator that produced no point at all still gets a row.
AssessmentReport assess_or_empty(const EstimateSet& est, const Eigen::VectorXd& gold, const AreaGraph& graph) {
  if (est.n_missing() < est.size()) return assess(est, gold, graph);
  AssessmentReport r;
  r.estimator = est.estimator;
  r.n_areas = est.size();
  r.n_missing = est.size();
  r.n_missing_interval = est.size();
  r.notes.push_back("no area could be estimated");
  return r;
}

// ---------------------------------------------------------------- report

std::string cell(const Json& v, int digits = 3) {
  if (!v.is_number()) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v.get<double>());
  return buf;
}

}  // namespace

SimulatedData simulate_data(const RunConfig& cfg) {
  if (!cfg.simulate) throw ValidationError("config: simulate: table required by the simulate command");
  const SimulationSettings& sim = *cfg.simulate;
  SimulatedData d;
  const int n = sim.areas;

  std::vector<std::string> labels;
  for (int i = 0; i < n; ++i) labels.push_back(area_label(i, n));
  d.shapes = tile_shapes(labels, sim.columns);
  d.graph = graph_from_shapes(d.shapes, cfg.adjacency_rule);

  Rng rng = make_rng(cfg.seed, "simulate/population");
  std::normal_distribution<double> normal;
  Eigen::VectorXi population(n);
  const double s = sim.population_log_sd;
  for (int i = 0; i < n; ++i) {
    const double size = sim.population_mean * std::exp(s * normal(rng) - 0.5 * s * s);
    population(i) = std::max(1, static_cast<int>(std::lround(size)));
  }

  PopulationConfig pc;
  pc.population = population;
  pc.intercept = sim.intercept;
  pc.field = sim.field;
  pc.seed = derive_seed(cfg.seed, "simulate/truth");
  for (const auto& v : sim.variables) pc.variables.push_back(to_synthetic(v, sim.variables, n, cfg.seed));
  d.truth = generate_population(d.graph, pc);
  d.areas = AreaIndex(labels, population.cast<double>());

  const std::uint64_t sample_seed = derive_seed(cfg.seed, "simulate/sample");
  if (sim.design == "srs") {
    if (sim.sample_size > d.truth.n_individuals()) {
      throw ValidationError("config: simulate.sample_size: exceeds the population size");
    }
    d.sample = draw_srs(d.truth, sim.sample_size, sample_seed);
  } else {
    std::vector<int> division(n);
    for (int i = 0; i < n; ++i) division[i] = static_cast<int>(static_cast<std::int64_t>(i) * sim.divisions / n);
    const Eigen::MatrixXi strata = stratum_populations(d.truth, sim.stratum, division);
    const Eigen::MatrixXi allocation = proportional_allocation(strata, sim.sample_size / sim.divisions);
    d.sample = draw_stratified(d.truth, sim.stratum, allocation, division, sample_seed);
  }

  d.schema.variables = d.truth.variables;
  d.schema.design = d.sample.design;
  if (d.truth.margins.crosstab) d.schema.crosstab = {d.truth.margins.crosstab->first, d.truth.margins.crosstab->second};
  return d;
}

void cmd_simulate(const RunConfig& cfg) {
  const SimulatedData d = simulate_data(cfg);
  const fs::path dir = cfg.out / "data";
  const std::string comment = hash_comment(cfg);
  write_area_list(dir / "areas.csv", d.areas, comment);
  write_schema(dir / "schema.json", d.schema, cfg.hash);
  write_edge_csv(dir / "adjacency.csv", d.graph, comment);
  write_geojson(dir / "areas.geojson", d.shapes, cfg.hash);
  write_sample(dir / "sample.csv", d.sample, d.areas, comment);
  write_margins(dir / "margins.csv", d.truth.margins, d.schema, d.areas, comment);
  if (d.truth.margins.crosstab) write_crosstab(dir / "crosstab.csv", d.truth.margins, d.areas, comment);
  write_gold(dir / "gold.csv", d.truth.pi_gold, d.areas, comment);
}

Inputs load_inputs(const RunConfig& cfg) {
  const InputPaths p = cfg.input_paths();
  if (!cfg.inputs && !fs::exists(p.areas)) {
    throw ValidationError("config: inputs: table required (or run `simulate` first to create " +
                          (cfg.out / "data").string() + ")");
  }
  Inputs in;
  in.areas = load_area_list(p.areas);
  in.schema = load_schema(p.schema, in.areas);
  in.sample = load_sample(p.sample, in.schema, in.areas);
  if (fs::exists(p.margins)) in.margins = load_margins(p.margins, in.schema, in.areas, p.crosstab);

  if (p.geojson && fs::exists(*p.geojson)) {
    in.shapes = shapes_in_area_order(read_geojson(*p.geojson), in.areas, *p.geojson);
  }
  if (p.adjacency && fs::exists(*p.adjacency)) {
    in.graph = read_edge_csv(*p.adjacency, in.areas.size(), p.one_based);
  } else if (!in.shapes.empty()) {
    in.graph = graph_from_shapes(in.shapes, cfg.adjacency_rule);
  } else {
    throw ValidationError("config: inputs.adjacency: no adjacency file or geometry found");
  }
  if (in.shapes.empty()) in.shapes = tile_shapes(in.areas.labels(), tile_columns(in.areas.size()));
  if (p.gold && fs::exists(*p.gold)) in.gold = load_gold(*p.gold, in.areas);
  return in;
}

void cmd_estimate(const RunConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  EstimatePipeline pipeline(cfg, in);
  const auto outcomes = pipeline.run();
  Json list = Json::array();
  for (const auto& o : outcomes) {
    Json entry = {{"name", o.name}, {"status", o.ok ? "ok" : "skipped"}};
    if (!o.ok) entry["reason"] = o.reason;
    if (o.ok) {
      entry["files"] = o.files;
      entry["diagnostics_warning"] = o.warning;
    }
    list.push_back(entry);
  }
  write_json(cfg.out / "estimates" / "manifest.json", {{"config_hash", cfg.hash}, {"estimators", list}});
}

void cmd_assess(const RunConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  if (!in.gold) {
    const InputPaths p = cfg.input_paths();
    throw ValidationError("config: inputs.gold: gold standard required for assess" +
                          (p.gold ? " (" + p.gold->string() + " not found)" : std::string()));
  }
  const Eigen::VectorXd& gold = *in.gold;
  const fs::path est_dir = cfg.out / "estimates";
  std::map<std::string, std::string> skipped;
  if (fs::exists(est_dir / "manifest.json")) {
    for (const auto& e : read_json(est_dir / "manifest.json").at("estimators")) {
      if (e.at("status") == "skipped") skipped[e.at("name").get<std::string>()] = e.value("reason", "");
    }
  }

  // Too few usable areas leaves the comparison undefined; the row is still reported.
  auto compare = [](AssessmentReport& report, const std::string& method, const auto& run) {
    report.comparison_method = method;
    try {
      report.moran_comparison = run();
    } catch (const std::exception& e) {
      report.notes.push_back(std::string("Moran comparison unavailable: ") + e.what());
    }
  };
  auto frequentist = [&](AssessmentReport& report, const EstimateSet& est, const std::string& label) {
    compare(report, "t-simulation", [&] {
      return morans_comparison_freq(est, gold, in.graph, cfg.assess.replicates,
                                    derive_seed(cfg.seed, "assess/" + label), cfg.assess.clip_t_draws);
    });
  };

  std::vector<Assessed> rows;
  std::vector<std::string> notes;
  std::optional<EstimateSet> srs;
  for (const auto& name : cfg.estimators.names) {
    if (skipped.count(name)) {
      notes.push_back(name + " skipped: " + skipped[name]);
      continue;
    }
    const fs::path file = est_dir / (name + ".csv");
    if (!fs::exists(file)) throw ValidationError("assess: " + file.string() + " not found (run `estimate` first)");
    Assessed a;
    a.estimates = read_estimates_csv(file, in.areas);
    a.estimates.estimator = name;
    a.report = assess_or_empty(a.estimates, gold, in.graph);
    if (bayesian_estimators().count(name)) {
      const Eigen::MatrixXd draws = read_area_draws(cfg.out / "draws" / (name + ".csv"), in.areas);
      compare(a.report, "posterior", [&] { return morans_comparison_bayes(draws, gold, in.graph); });
    } else {
      read_t_reference(est_dir / (name + ".t.csv"), a.estimates, in.areas);
      frequentist(a.report, a.estimates, name);
      if (name == "srs") srs = a.estimates;
    }
    rows.push_back(std::move(a));
  }

  // SRS restricted to the areas a direct estimator could estimate, so both are judged on equal terms.
  if (cfg.assess.matched_srs && srs) {
    const std::size_t n_base = rows.size();
    for (std::size_t i = 0; i < n_base; ++i) {
      const Assessed& base = rows[i];
      if (base.report.comparison_method != "t-simulation" || base.report.estimator == "srs") continue;
      if (base.estimates.n_missing() == 0) continue;
      Assessed a;
      const std::string label = "srs@" + base.report.estimator;
      a.estimates = masked(*srs, base.estimates, label);
      a.report = assess_or_empty(a.estimates, gold, in.graph);
      frequentist(a.report, a.estimates, label);
      a.report.notes.push_back("srs restricted to the areas estimated by " + base.report.estimator);
      a.mapped = false;
      rows.push_back(std::move(a));
    }
  }

  std::vector<AssessmentReport> reports;
  for (const auto& a : rows) reports.push_back(a.report);
  write_assessment_csv(cfg.out / "assessment.csv", reports, hash_comment(cfg));
  write_assessment_json(cfg.out / "assessment.json", reports, cfg.hash);
  if (!notes.empty()) {
    std::ofstream out = open_output(cfg.out / "assessment.notes.txt");
    out << "# " << hash_comment(cfg) << "\n";
    for (const auto& n : notes) out << n << "\n";
  }

  std::vector<Eigen::VectorXd> series{gold};
  for (const auto& a : rows) {
    if (a.mapped) series.push_back(a.estimates.points());
  }
  const ColorScale scale = pooled_scale(series);
  write_choropleth(cfg.out / "maps" / "gold.svg", in.shapes, gold, scale, "gold standard", cfg.hash);
  for (const auto& a : rows) {
    if (!a.mapped) continue;
    write_choropleth(cfg.out / "maps" / (a.report.estimator + ".svg"), in.shapes, a.estimates.points(), scale,
                     a.report.estimator, cfg.hash);
  }
}

void cmd_report(const RunConfig& cfg) {
  const fs::path manifest_path = cfg.out / "estimates" / "manifest.json";
  const fs::path assessment_path = cfg.out / "assessment.json";
  if (!fs::exists(manifest_path) && !fs::exists(assessment_path)) {
    throw ValidationError("report: nothing to report in " + cfg.out.string() + " (run `estimate` or `assess` first)");
  }
  std::ostringstream md;
  md << "<!-- config-hash: " << cfg.hash << " -->\n";
  md << "# Small-area estimation report\n\n";
  md << "- config hash: `" << cfg.hash << "`\n- root seed: " << cfg.seed << "\n- alpha: " << cfg.alpha << "\n";
  md << "- MCMC: " << cfg.mcmc.chains << " chains, " << cfg.mcmc.iterations << " iterations, " << cfg.mcmc.burn_in
     << " burn-in, thin " << cfg.mcmc.thin << "\n\n";

  if (fs::exists(manifest_path)) {
    const Json manifest = read_json(manifest_path);
    md << "## Estimators\n\n| estimator | status | notes |\n|---|---|---|\n";
    for (const auto& e : manifest.at("estimators")) {
      const std::string name = e.at("name");
      std::string note;
      if (e.at("status") == "skipped") {
        note = e.value("reason", "");
      } else if (e.value("diagnostics_warning", false)) {
        note = "convergence warning, see diagnostics/" + name + ".json";
      }
      md << "| " << name << " | " << e.at("status").get<std::string>() << " | " << note << " |\n";
    }
    md << "\n";
    bool heading = false;
    for (const auto& e : manifest.at("estimators")) {
      const fs::path diag = cfg.out / "diagnostics" / (e.at("name").get<std::string>() + ".json");
      if (!fs::exists(diag)) continue;
      const Json d = read_json(diag);
      if (!heading) {
        md << "## MCMC diagnostics\n\n| estimator | warning | acceptance rates |\n|---|---|---|\n";
        heading = true;
      }
      std::string rates;
      for (const auto& b : d.at("acceptance")) {
        rates += (rates.empty() ? "" : ", ") + b.at("block").get<std::string>() + " " + cell(b.at("rate"), 2);
      }
      md << "| " << d.at("estimator").get<std::string>() << " | " << (d.at("warning").get<bool>() ? "yes" : "no")
         << " | " << rates << " |\n";
    }
    if (heading) md << "\n";
  }

  if (fs::exists(assessment_path)) {
    const Json doc = read_json(assessment_path);
    const Json& ests = doc.at("estimators");
    md << "## Assessment against the gold standard\n\n| statistic |";
    for (const auto& e : ests) {
      md << " " << e.at("estimator").get<std::string>();
      if (e.value("n_missing", 0) > 0) md << " (" << e.at("n_missing").get<int>() << " missing)";
      md << " |";
    }
    md << "\n|---|";
    for (std::size_t i = 0; i < ests.size(); ++i) md << "---|";
    md << "\n";
    const std::vector<std::pair<std::string, std::string>> stats{
        {"correlation", "Correlation"}, {"rmse", "sqrt(MSE)"},         {"ci_length", "CI length"},
        {"coverage", "Coverage"},       {"morans_i", "Moran's I"},     {"gold_morans_i", "Moran's I of gold"}};
    for (const auto& [key, label] : stats) {
      md << "| " << label << " |";
      for (const auto& e : ests) md << " " << cell(e.value(key, Json(nullptr))) << " |";
      md << "\n";
    }
    md << "| P(estimated I < real I) |";
    for (const auto& e : ests) {
      const Json mc = e.value("moran_comparison", Json(nullptr));
      md << " " << (mc.is_object() ? cell(mc.value("p_below_gold", Json(nullptr))) : std::string("NA")) << " |";
    }
    md << "\n\n";
    for (const auto& e : ests) {
      for (const auto& n : e.value("notes", Json::array())) {
        md << "- " << e.at("estimator").get<std::string>() << ": " << n.get<std::string>() << "\n";
      }
    }
    const fs::path notes = cfg.out / "assessment.notes.txt";
    if (fs::exists(notes)) {
      std::ifstream in(notes);
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '#') md << "- " << line << "\n";
      }
    }
    md << "\n## Maps\n\nAll maps share one seven-bin colour scale.\n\n- [gold standard](maps/gold.svg)\n";
    for (const auto& e : ests) {
      const std::string name = e.at("estimator");
      if (fs::exists(cfg.out / "maps" / (name + ".svg"))) md << "- [" << name << "](maps/" << name << ".svg)\n";
    }
  }
  std::ofstream out = open_output(cfg.out / "report.md");
  out << md.str();
}

}  // namespace sae::cli
