#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "sae/error.hpp"
#include "sae/special.hpp"
#include "sae/synth.hpp"

using namespace sae;

namespace {

PopulationConfig uniform_config(int n_areas, int per_area, std::uint64_t seed) {
  PopulationConfig c;
  c.population = Eigen::VectorXi::Constant(n_areas, per_area);
  SyntheticVariable age{"age", 3, {"young", "mid", "old"}, Eigen::Vector3d(0.0, 0.4, -0.6),
                        Eigen::RowVector3d(0.3, 0.5, 0.2), -1};
  SyntheticVariable sex{"sex", 2, {"m", "f"}, Eigen::Vector2d(0.0, 0.3), Eigen::RowVector2d(0.5, 0.5), -1};
  c.variables = {age, sex};
  c.intercept = -0.4;
  c.field = {0.9, 0.5};
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("population margins and gold are exact by construction") {
  const AreaGraph g = lattice_graph(3, 4, 12, false);
  const SyntheticTruth t = generate_population(g, uniform_config(12, 300, 5));
  CHECK(t.n_individuals() == 3600);
  CHECK_NOTHROW(t.margins.validate());
  for (int i = 0; i < 12; ++i) {
    std::int64_t ones = 0;
    Eigen::Vector3d age = Eigen::Vector3d::Zero();
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(3, 2);
    for (std::int64_t p = t.area_start[i]; p < t.area_start[i + 1]; ++p) {
      ones += t.y[p];
      age(t.category(p, 0)) += 1.0;
      cross(t.category(p, 0), t.category(p, 1)) += 1.0;
      CHECK(t.area_of(p) == i);
    }
    CHECK(t.pi_gold(i) == static_cast<double>(ones) / 300.0);
    CHECK(t.margins.table("age").row(i).transpose() == age);
    CHECK(t.margins.crosstab->cells[i] == cross);
  }
  const SyntheticTruth again = generate_population(g, uniform_config(12, 300, 5));
  CHECK(again.y == t.y);
  CHECK(again.pi_gold == t.pi_gold);
}

TEST_CASE("null and saturated generators") {
  const AreaGraph g = lattice_graph(2, 3, 6, false);
  PopulationConfig c;
  c.population = Eigen::VectorXi::Constant(6, 4000);
  c.field = {0.5, 1e-9};
  c.seed = 3;
  const SyntheticTruth t = generate_population(g, c);
  for (int i = 0; i < 6; ++i) CHECK(std::abs(t.pi_gold(i) - 0.5) < 4.0 * std::sqrt(0.25 / 4000.0));

  c.intercept = -1e6;
  const SyntheticTruth zero = generate_population(g, c);
  CHECK(zero.pi_gold.isZero());

  c.population(2) = 0;
  CHECK_THROWS_AS(generate_population(g, c), ValidationError);
  c.population(2) = 10;
  c.field.lambda = 1.0;
  CHECK_THROWS_AS(generate_population(g, c), ValidationError);
}

TEST_CASE("spatially correlated field yields positive Moran's I") {
  const AreaGraph g = lattice_graph(9, 9, 73, false);
  PopulationConfig c;
  c.population = Eigen::VectorXi::Constant(73, 2000);
  c.intercept = -1.0;
  c.field = {0.9, 1.0};
  c.seed = 2024;
  const SyntheticTruth t = generate_population(g, c);
  const double observed = morans_i(t.pi_gold, g);
  std::mt19937_64 rng(1);
  Eigen::VectorXd shuffled = t.pi_gold;
  int at_least = 0;
  for (int k = 0; k < 10000; ++k) {
    std::shuffle(shuffled.data(), shuffled.data() + shuffled.size(), rng);
    if (morans_i(shuffled, g) >= observed) ++at_least;
  }
  CHECK((at_least + 1.0) / 10001.0 < 0.01);
}

TEST_CASE("simple random sampling") {
  const AreaGraph g = lattice_graph(1, 5, 5, false);
  PopulationConfig c;
  c.population = Eigen::VectorXi::Constant(5, 40);
  c.field = {0.5, 1.0};
  c.seed = 9;
  const SyntheticTruth t = generate_population(g, c);

  const SurveySample census = draw_srs(t, c.population, 1);
  for (int i = 0; i < 5; ++i) {
    CHECK(static_cast<double>(census.area_successes()(i)) / census.area_sizes()(i) == t.pi_gold(i));
  }
  const Eigen::VectorXi partial = (Eigen::VectorXi(5) << 0, 5, 5, 5, 5).finished();
  const SurveySample s = draw_srs(t, partial, 2);
  CHECK(s.area_sizes() == partial);
  CHECK(s.design.kind == DesignDescriptor::Kind::Srs);
  CHECK_THROWS_AS(draw_srs(t, Eigen::VectorXi::Constant(5, 41), 1), ValidationError);
  CHECK_THROWS_AS(draw_srs(t, 201, 1), ValidationError);

  // Unbiased sample means and uniform inclusion over repeated draws.
  const int reps = 10000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(5);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(5);
  const Eigen::VectorXi n = Eigen::VectorXi::Constant(5, 8);
  for (int r = 0; r < reps; ++r) {
    const SurveySample d = draw_srs(t, n, 1000 + r);
    const Eigen::VectorXd mean = d.area_successes().cast<double>() / 8.0;
    sum += mean;
    sq += mean.cwiseProduct(mean);
  }
  for (int i = 0; i < 5; ++i) {
    const double m = sum(i) / reps;
    const double se = std::sqrt((sq(i) / reps - m * m) / reps);
    CHECK(std::abs(m - t.pi_gold(i)) < 3.0 * se + 1e-12);
  }
}

TEST_CASE("inclusion probability is n / N for every individual") {
  const AreaGraph g = lattice_graph(1, 2, 2, false);
  PopulationConfig c;
  c.population = Eigen::Vector2i(20, 20);
  c.seed = 4;
  const SyntheticTruth t = generate_population(g, c);
  const int reps = 10000;
  const int n = 10;
  std::vector<int> hits(40, 0);
  for (int r = 0; r < reps; ++r) {
    const auto chosen = srs_individuals(t, n, 50 + r);
    REQUIRE(chosen.size() == static_cast<std::size_t>(n));
    CHECK(std::set<std::int64_t>(chosen.begin(), chosen.end()).size() == chosen.size());
    for (auto p : chosen) ++hits[p];
  }
  // Inclusion frequency n / N per individual; 3.5 MC SE is the 1% Bonferroni bound over 40 individuals.
  const double pi = static_cast<double>(n) / 40.0;
  const double se = std::sqrt(pi * (1.0 - pi) / reps);
  for (int h : hits) CHECK(std::abs(static_cast<double>(h) / reps - pi) < 3.5 * se);
  CHECK(chi_square_sf(oracle::chi_square_uniform(hits), 39.0) > 0.01);

  const Eigen::VectorXi per_area = Eigen::Vector2i(3, 7);
  const auto by_area = srs_individuals(t, per_area, 8);
  CHECK(std::count_if(by_area.begin(), by_area.end(), [&](auto p) { return t.area_of(p) == 0; }) == 3);
}

TEST_CASE("stratified sampling") {
  const AreaGraph g = lattice_graph(4, 5, 20, false);
  const SyntheticTruth t = generate_population(g, uniform_config(20, 60, 12));
  const std::vector<int> division{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  const Eigen::MatrixXi pop = stratum_populations(t, "age", division);
  CHECK(pop.rows() == 2);
  CHECK(pop.sum() == 1200);

  // Census allocation selects everyone.
  const SurveySample census = draw_stratified(t, "age", pop, division, 1);
  CHECK(static_cast<std::int64_t>(census.records.size()) == t.n_individuals());
  CHECK(census.design.kind == DesignDescriptor::Kind::Stratified);
  CHECK(census.design.stratum_variable == "age");

  const Eigen::MatrixXi alloc = proportional_allocation(pop, 30);
  CHECK(alloc.rowwise().sum() == Eigen::Vector2i(30, 30));
  CHECK((alloc.array() <= pop.array()).all());
  const SurveySample s = draw_stratified(t, "age", alloc, division, 2);
  const std::string by_age[] = {"age"};
  const CellTable cells = cell_counts(s, by_age);
  for (int d = 0; d < 2; ++d) {
    for (int k = 0; k < 3; ++k) {
      int total = 0;
      for (int i = 0; i < 20; ++i) {
        if (division[i] == d) total += cells.n(i, k);
      }
      CHECK(total == alloc(d, k));
    }
  }

  // Small allocations leave populated (area, stratum) cells empty with positive frequency.
  int empty_cells = 0;
  for (int r = 0; r < 200; ++r) {
    const CellTable c = cell_counts(draw_stratified(t, "age", alloc, division, 100 + r), by_age);
    for (int i = 0; i < 20; ++i) {
      for (int k = 0; k < 3; ++k) empty_cells += c.n(i, k) == 0 && t.margins.table("age")(i, k) > 0;
    }
  }
  CHECK(empty_cells > 0);

  Eigen::MatrixXi too_many = pop;
  too_many(0, 0) += 1;
  CHECK_THROWS_AS(draw_stratified(t, "age", too_many, division, 1), ValidationError);
  CHECK_THROWS_AS(draw_stratified(t, "income", alloc, division, 1), ValidationError);
}

TEST_CASE("single stratum matches frame-level SRS in distribution") {
  const AreaGraph g = lattice_graph(1, 4, 4, false);
  PopulationConfig c;
  c.population = Eigen::Vector4i(10, 20, 30, 40);
  c.variables = {{"one", 1, {}, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1), -1}};
  c.seed = 6;
  const SyntheticTruth t = generate_population(g, c);
  const Eigen::MatrixXi alloc = Eigen::MatrixXi::Constant(1, 1, 20);
  Eigen::VectorXd strat = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd srs = Eigen::VectorXd::Zero(4);
  const int reps = 4000;
  for (int r = 0; r < reps; ++r) {
    strat += draw_stratified(t, "one", alloc, {}, r).area_sizes().cast<double>();
    srs += draw_srs(t, 20, r + 7919).area_sizes().cast<double>();
  }
  for (int i = 0; i < 4; ++i) {
    const double expected = 20.0 * c.population(i) / 100.0;
    const double p = c.population(i) / 100.0;
    const double se = std::sqrt(20.0 * p * (1.0 - p) * 80.0 / 99.0 / reps);
    CHECK(std::abs(strat(i) / reps - expected) < 3.0 * se);
    CHECK(std::abs(srs(i) / reps - expected) < 3.0 * se);
  }
}
