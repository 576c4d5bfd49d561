#include <doctest.h>

#include "oracles.hpp"
#include "sae/error.hpp"
#include "sae/estimate.hpp"
#include "sae/special.hpp"
#include "sae/synth.hpp"

using namespace sae;

namespace {

SurveySample area_sample(const std::vector<int>& n, const std::vector<int>& o) {
  SurveySample s;
  s.n_areas = static_cast<int>(n.size());
  for (int i = 0; i < s.n_areas; ++i) {
    for (int k = 0; k < n[i]; ++k) s.records.push_back({i, k < o[i] ? 1 : 0, {}});
  }
  return s;
}

PopulationMargins totals(const std::vector<double>& population) {
  PopulationMargins m;
  m.n_areas = static_cast<int>(population.size());
  m.population = Eigen::Map<const Eigen::VectorXd>(population.data(), m.n_areas);
  return m;
}

// One area, one stratifying variable: `cells` holds (n, O) per category.
SurveySample stratum_sample(const std::string& name, const std::vector<std::pair<int, int>>& cells) {
  SurveySample s;
  s.n_areas = 1;
  s.variables = {{name, static_cast<int>(cells.size()), {}}};
  for (int k = 0; k < static_cast<int>(cells.size()); ++k) {
    for (int j = 0; j < cells[k].first; ++j) s.records.push_back({0, j < cells[k].second ? 1 : 0, {k}});
  }
  return s;
}

PopulationMargins stratum_margins(const std::string& name, const std::vector<double>& counts) {
  PopulationMargins m;
  m.n_areas = 1;
  Eigen::RowVectorXd row = Eigen::Map<const Eigen::RowVectorXd>(counts.data(), static_cast<Eigen::Index>(counts.size()));
  m.population = Eigen::VectorXd::Constant(1, row.sum());
  m.tables[name] = row;
  return m;
}

SyntheticTruth small_truth(std::uint64_t seed, bool independent) {
  const AreaGraph g = lattice_graph(2, 4, 8, false);
  PopulationConfig c;
  c.population = Eigen::VectorXi::Constant(8, 200);
  SyntheticVariable a{"a", 3, {}, Eigen::Vector3d(0.0, 0.8, -0.5), Eigen::RowVector3d(0.3, 0.3, 0.4), -1};
  SyntheticVariable b{"b", 2, {}, Eigen::Vector2d(0.0, 0.6), Eigen::RowVector2d(0.6, 0.4), -1};
  if (!independent) {
    b.parent = 0;
    b.probabilities = (Eigen::MatrixXd(3, 2) << 0.9, 0.1, 0.5, 0.5, 0.2, 0.8).finished();
  }
  c.variables = {a, b};
  c.seed = seed;
  return generate_population(g, c);
}

}  // namespace

TEST_CASE("SRS estimator hand-evaluated cases") {
  const SurveySample s = area_sample({10, 5, 0, 1}, {3, 5, 0, 1});
  const EstimateSet e = srs_estimate(s, totals({100, 5, 50, 20}), 0.05);
  REQUIRE(e.areas.size() == 4);
  CHECK(*e.areas[0].point == doctest::Approx(0.3));
  CHECK(*e.areas[0].variance == doctest::Approx(0.3 * 0.7 / 10 * 0.9).epsilon(1e-14));
  const double half = student_t_quantile(0.975, 9) * std::sqrt(0.0189);
  CHECK(*e.areas[0].low == std::max(0.0, 0.3 - half));
  CHECK(*e.areas[0].high == doctest::Approx(0.3 + half).epsilon(1e-12));
  CHECK(*e.areas[0].df == 9.0);

  CHECK(*e.areas[1].point == 1.0);
  CHECK(*e.areas[1].variance == 0.0);

  CHECK(e.areas[2].missing());
  CHECK(e.areas[2].missing_reason == "no sampled units");

  CHECK(*e.areas[3].point == 1.0);
  CHECK_FALSE(e.areas[3].variance.has_value());
  CHECK(e.n_missing() == 1);

  CHECK_THROWS_AS(srs_estimate(s, totals({100, 5, 50}), 0.05), ValidationError);
  CHECK_THROWS_AS(srs_estimate(s, totals({100, 4, 50, 20}), 0.05), ValidationError);
}

TEST_CASE("SRS variance decreases in n and vanishes at the census") {
  double previous = 1.0;
  for (int n = 2; n <= 40; n += 2) {
    const SurveySample s = area_sample({n}, {n / 2});
    const double v = *srs_estimate(s, totals({40}), 0.05).areas[0].variance;
    CHECK(v < previous);
    previous = v;
  }
  CHECK(previous == 0.0);
}

TEST_CASE("Bayes SRS posterior") {
  const SurveySample s = area_sample({10, 0, 2}, {3, 0, 1});
  const BayesSrsResult r = bayes_srs_estimate(s, 0.05);
  CHECK(r.posterior.shape1(0) == 4.0);
  CHECK(r.posterior.shape2(0) == 8.0);
  CHECK(*r.estimates.areas[0].point == doctest::Approx(0.3));
  CHECK(r.posterior_mean(0) == doctest::Approx(4.0 / 12.0));

  CHECK(*r.estimates.areas[1].low == doctest::Approx(0.025).epsilon(1e-12));
  CHECK(*r.estimates.areas[1].high == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(*r.estimates.areas[1].point == 0.5);

  CHECK(std::abs(*r.estimates.areas[2].low - oracle::beta_quantile_quadrature(2, 2, 0.025)) < 1e-6);
  CHECK(std::abs(*r.estimates.areas[2].high - oracle::beta_quantile_quadrature(2, 2, 0.975)) < 1e-6);
  CHECK(*r.estimates.areas[2].variance == doctest::Approx(4.0 / (16.0 * 5.0)));
}

TEST_CASE("stratified estimator") {
  // N = (60, 40), cell means 0.5 and 0.25.
  const SurveySample s = stratum_sample("str", {{10, 5}, {8, 2}});
  const PopulationMargins m = stratum_margins("str", {60, 40});
  const EstimateSet e = stratified_estimate(s, m, "str", 0.05);
  CHECK(*e.areas[0].point == doctest::Approx(0.4).epsilon(1e-15));
  const double v = 0.36 * (0.25 / 10) * (1 - 10.0 / 60) + 0.16 * (0.1875 / 8) * (1 - 8.0 / 40);
  CHECK(*e.areas[0].variance == doctest::Approx(v).epsilon(1e-14));
  CHECK(*e.areas[0].df == 16.0);
  CHECK(*e.areas[0].low <= *e.areas[0].point);

  const SurveySample gap = stratum_sample("str", {{10, 5}, {0, 0}, {3, 1}});
  const EstimateSet g = stratified_estimate(gap, stratum_margins("str", {60, 40, 10}), "str", 0.05);
  CHECK(g.areas[0].missing());
  CHECK(g.areas[0].missing_reason.find("unsampled populated cells") != std::string::npos);
  CHECK(g.missing_cells == 1);

  // An unpopulated, unsampled stratum is not a gap.
  const EstimateSet ok = stratified_estimate(gap, stratum_margins("str", {60, 0, 10}), "str", 0.05);
  CHECK_FALSE(ok.areas[0].missing());

  CHECK_THROWS_AS(stratified_estimate(s, m, "nope", 0.05), ValidationError);
}

TEST_CASE("ratio estimator") {
  const SurveySample s = stratum_sample("z", {{10, 2}, {5, 3}});
  const EstimateSet e = ratio_estimate(s, stratum_margins("z", {30, 70}), "z", 0.05);
  CHECK(*e.areas[0].point == doctest::Approx(0.48).epsilon(1e-15));

  const SurveySample single = stratum_sample("z", {{12, 5}});
  const PopulationMargins m1 = stratum_margins("z", {90});
  CHECK(*ratio_estimate(single, m1, "z", 0.05).areas[0].point == *srs_estimate(single, m1, 0.05).areas[0].point);
}

TEST_CASE("census samples reproduce gold exactly") {
  const SyntheticTruth t = small_truth(3, false);
  const SurveySample census = draw_srs(t, t.margins.population.cast<int>(), 1);
  const EstimateSet r = ratio_estimate(census, t.margins, "a", 0.05);
  const EstimateSet c = combined_estimate(census, t.margins, "a", "b", 0.05, CombineMode::Crosstab);
  for (int i = 0; i < 8; ++i) {
    CHECK(*r.areas[i].point == doctest::Approx(t.pi_gold(i)).epsilon(1e-14));
    CHECK(*c.areas[i].point == doctest::Approx(t.pi_gold(i)).epsilon(1e-14));
    CHECK(*c.areas[i].variance == 0.0);
  }
}

TEST_CASE("combined estimator modes agree under an exact product crosstab") {
  const SyntheticTruth t = small_truth(5, true);
  PopulationMargins m = t.margins;
  // Rebuild the crosstab as the exact product of the margins so that independence holds exactly.
  const auto& ta = m.table("a");
  const auto& tb = m.table("b");
  for (int i = 0; i < 8; ++i) {
    m.crosstab->cells[i] = ta.row(i).transpose() * tb.row(i) / m.population(i);
  }
  const SurveySample s = draw_srs(t, Eigen::VectorXi::Constant(8, 120), 4);
  const EstimateSet cross = combined_estimate(s, m, "a", "b", 0.05, CombineMode::Crosstab);
  const EstimateSet indep = combined_estimate(s, m, "a", "b", 0.05, CombineMode::Independence);
  for (int i = 0; i < 8; ++i) {
    REQUIRE(cross.areas[i].point.has_value());
    CHECK(std::abs(*cross.areas[i].point - *indep.areas[i].point) < 1e-12);
  }
  CHECK_THROWS_AS(combined_estimate(s, t.margins, "a", "nope", 0.05, CombineMode::Crosstab), ValidationError);
  PopulationMargins no_cross = t.margins;
  no_cross.crosstab.reset();
  CHECK_THROWS_AS(combined_estimate(s, no_cross, "a", "b", 0.05, CombineMode::Crosstab), ValidationError);
  CHECK_NOTHROW(combined_estimate(s, no_cross, "a", "b", 0.05, CombineMode::Independence));
  CHECK(parse_combine_mode("independence") == CombineMode::Independence);
}

TEST_CASE("reduction chain holds exactly") {
  const AreaGraph g = lattice_graph(2, 3, 6, false);
  PopulationConfig c;
  c.population = Eigen::VectorXi::Constant(6, 150);
  c.variables = {{"one", 1, {}, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1), -1},
                 {"flat", 1, {}, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1), -1}};
  c.seed = 77;
  const SyntheticTruth t = generate_population(g, c);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const SurveySample s = draw_srs(t, Eigen::VectorXi::Constant(6, 15), seed);
    const EstimateSet srs = srs_estimate(s, t.margins, 0.05);
    const EstimateSet str = stratified_estimate(s, t.margins, "one", 0.05);
    const EstimateSet rat = ratio_estimate(s, t.margins, "one", 0.05);
    const EstimateSet cx = combined_estimate(s, t.margins, "one", "flat", 0.05, CombineMode::Crosstab);
    const EstimateSet ci = combined_estimate(s, t.margins, "one", "flat", 0.05, CombineMode::Independence);
    for (int i = 0; i < 6; ++i) {
      CHECK(std::abs(*str.areas[i].point - *srs.areas[i].point) <= 1e-12);
      CHECK(std::abs(*rat.areas[i].point - *str.areas[i].point) <= 1e-12);
      CHECK(std::abs(*cx.areas[i].point - *rat.areas[i].point) <= 1e-12);
      CHECK(std::abs(*ci.areas[i].point - *rat.areas[i].point) <= 1e-12);
    }
  }
}

TEST_CASE("estimates and t reference files round trip") {
  const auto dir = oracle::scratch_dir("design");
  const SurveySample s = area_sample({10, 0, 1}, {3, 0, 0});
  const AreaIndex areas = AreaIndex::numbered(3);
  const EstimateSet e = srs_estimate(s, totals({100, 50, 20}), 0.05);
  write_estimates_csv(dir / "srs.csv", e, areas, "config-hash: abc");
  write_t_reference(dir / "srs.t.csv", e, areas, "config-hash: abc");
  EstimateSet back = read_estimates_csv(dir / "srs.csv", areas);
  read_t_reference(dir / "srs.t.csv", back, areas);
  CHECK(back.estimator == "srs");
  CHECK(*back.areas[0].point == *e.areas[0].point);
  CHECK(*back.areas[0].variance == *e.areas[0].variance);
  CHECK(*back.areas[0].high == *e.areas[0].high);
  CHECK(*back.areas[0].df == 9.0);
  CHECK(back.areas[1].missing());
  CHECK(back.areas[1].missing_reason == "no sampled units");
  CHECK_FALSE(back.areas[2].variance.has_value());
}
