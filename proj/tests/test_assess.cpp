#include <doctest.h>

#include <fstream>
#include <numeric>

#include "oracles.hpp"
#include "sae/assess.hpp"
#include "sae/error.hpp"

using namespace sae;

namespace {

EstimateSet exact(const Eigen::VectorXd& gold) {
  EstimateSet e;
  e.estimator = "exact";
  for (Eigen::Index i = 0; i < gold.size(); ++i) {
    AreaEstimate a;
    a.point = gold(i);
    a.low = gold(i);
    a.high = gold(i);
    a.variance = 0.0;
    a.df = 5.0;
    e.areas.push_back(a);
  }
  return e;
}

}  // namespace

TEST_CASE("perfect and vacuous estimators") {
  const AreaGraph g = lattice_graph(2, 3, 6, false);
  const Eigen::VectorXd gold = (Eigen::VectorXd(6) << 0.1, 0.2, 0.15, 0.3, 0.35, 0.4).finished();
  const AssessmentReport perfect = assess(exact(gold), gold, g);
  CHECK(*perfect.correlation == doctest::Approx(1.0));
  CHECK(*perfect.rmse == 0.0);
  CHECK(*perfect.coverage == 1.0);
  CHECK(*perfect.mean_interval_length == 0.0);
  CHECK(*perfect.morans_i == doctest::Approx(morans_i(gold, g)));

  EstimateSet vacuous = exact(gold);
  for (auto& a : vacuous.areas) {
    a.low = 0.0;
    a.high = 1.0;
  }
  const AssessmentReport v = assess(vacuous, gold, g);
  CHECK(*v.coverage == 1.0);
  CHECK(*v.mean_interval_length == 1.0);
}

TEST_CASE("hand-built coverage and pairwise missingness") {
  const AreaGraph g = build_graph(3, {{0, 1}, {1, 2}});
  const Eigen::Vector3d gold(0.2, 0.5, 0.7);
  EstimateSet e = exact(gold);
  e.areas[1].low = 0.6;
  e.areas[1].high = 0.8;
  e.areas[1].point = 0.7;
  const AssessmentReport r = assess(e, gold, g);
  CHECK(*r.coverage == doctest::Approx(2.0 / 3.0));
  CHECK(*r.rmse == doctest::Approx(std::sqrt(0.04 / 3.0)));

  e.areas[2] = AreaEstimate{};
  e.areas[2].missing_reason = "no sampled units";
  const AssessmentReport m = assess(e, gold, g);
  CHECK(m.n_missing == 1);
  CHECK(*m.coverage == doctest::Approx(0.5));
  CHECK(*m.rmse == doctest::Approx(std::sqrt(0.04 / 2.0)));

  EstimateSet none = e;
  for (auto& a : none.areas) a = AreaEstimate{};
  CHECK_THROWS_AS(assess(none, gold, g), ValidationError);
  CHECK_THROWS_AS(assess(e, Eigen::Vector2d(0.1, 0.2), g), ValidationError);
}

TEST_CASE("assessment is invariant to area ordering") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 12;
  const AreaGraph g = build_graph(n, oracle::random_edges(n, 0.3, rng));
  Eigen::VectorXd gold(n);
  EstimateSet e;
  e.estimator = "x";
  for (int i = 0; i < n; ++i) {
    gold(i) = u(rng);
    AreaEstimate a;
    if (i != 4) {
      a.point = gold(i) + 0.1 * (u(rng) - 0.5);
      a.low = *a.point - 0.05;
      a.high = *a.point + 0.05;
    }
    e.areas.push_back(a);
  }
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  EstimateSet pe = e;
  Eigen::VectorXd pg(n);
  for (int i = 0; i < n; ++i) {
    pe.areas[perm[i]] = e.areas[i];
    pg(perm[i]) = gold(i);
  }
  const AssessmentReport a = assess(e, gold, g);
  const AssessmentReport b = assess(pe, pg, g.permuted(perm));
  CHECK(*a.correlation == doctest::Approx(*b.correlation).epsilon(1e-12));
  CHECK(*a.rmse == doctest::Approx(*b.rmse).epsilon(1e-12));
  CHECK(*a.coverage == *b.coverage);
  CHECK(*a.morans_i == doctest::Approx(*b.morans_i).epsilon(1e-12));
}

TEST_CASE("posterior Moran comparison") {
  const AreaGraph g = lattice_graph(3, 3, 9, false);
  const Eigen::VectorXd gold = Eigen::VectorXd::LinSpaced(9, 0.1, 0.5);
  Eigen::MatrixXd same = gold.transpose().replicate(150, 1);
  CHECK(morans_comparison_bayes(same, gold, g).probability == 0.0);
  CHECK_THROWS_AS(morans_comparison_bayes(same.topRows(99), gold, g), ValidationError);

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd draws(300, 9);
  for (Eigen::Index r = 0; r < draws.rows(); ++r) {
    for (Eigen::Index c = 0; c < 9; ++c) draws(r, c) = u(rng);
  }
  draws.row(17).setConstant(0.2);
  const double reference = morans_i(gold, g);
  int below = 0;
  int used = 0;
  for (Eigen::Index r = 0; r < draws.rows(); ++r) {
    if (r == 17) continue;
    ++used;
    below += oracle::morans_i(draws.row(r).transpose(), Eigen::MatrixXd(g.adjacency())) < reference;
  }
  const MoranComparison c = morans_comparison_bayes(draws, gold, g);
  CHECK(c.degenerate == 1);
  CHECK(c.used == used);
  CHECK(c.probability == static_cast<double>(below) / used);
  CHECK(morans_comparison_bayes(draws, 2.0, g).probability == 1.0);

  // Raising the reference cannot lower the probability.
  double previous = 0.0;
  for (double ref = -1.0; ref <= 1.0; ref += 0.1) {
    const double p = morans_comparison_bayes(draws, ref, g).probability;
    CHECK(p >= previous);
    CHECK(p <= 1.0);
    previous = p;
  }
}

TEST_CASE("t-simulation Moran comparison") {
  const AreaGraph g = lattice_graph(3, 3, 9, false);
  const Eigen::VectorXd gold = Eigen::VectorXd::LinSpaced(9, 0.1, 0.5);
  EstimateSet e = exact(gold);
  for (auto& a : e.areas) a.point = *a.point + 0.01;
  // Zero variances: every replicate equals the point vector.
  const MoranComparison zero = morans_comparison_freq(e, gold, g, 50, 1);
  CHECK((zero.probability == 0.0 || zero.probability == 1.0));

  for (int i = 0; i < 9; ++i) {
    e.areas[i].variance = 0.002 * (1 + i % 3);
    e.areas[i].df = 4.0 + i;
  }
  e.areas[2].df.reset();
  const MoranComparison a = morans_comparison_freq(e, gold, g, 10000, 99);
  const MoranComparison b = morans_comparison_freq(e, gold, g, 10000, 99);
  CHECK(a.probability == b.probability);
  CHECK(a.excluded_areas == 1);
  CHECK(a.probability > 0.0);
  CHECK(a.probability < 1.0);
  const MoranComparison one = morans_comparison_freq(e, gold, g, 1, 5);
  CHECK((one.probability == 0.0 || one.probability == 1.0));
  const MoranComparison clipped = morans_comparison_freq(e, gold, g, 500, 99, true);
  CHECK(clipped.probability >= 0.0);
  CHECK(clipped.probability <= 1.0);
}

TEST_CASE("report writers") {
  const auto dir = oracle::scratch_dir("assess");
  const AreaGraph g = build_graph(3, {{0, 1}, {1, 2}});
  const Eigen::Vector3d gold(0.2, 0.5, 0.7);
  AssessmentReport r = assess(exact(gold), gold, g);
  r.moran_comparison = MoranComparison{0.25, 0.3, 100, 0, 0};
  r.comparison_method = "posterior";
  write_assessment_csv(dir / "a.csv", {r}, "config-hash: 00ff");
  write_assessment_json(dir / "a.json", {r}, "00ff");
  std::ifstream csv(dir / "a.csv");
  std::string first;
  std::string header;
  std::string row;
  std::getline(csv, first);
  std::getline(csv, header);
  std::getline(csv, row);
  CHECK(first == "# config-hash: 00ff");
  CHECK(header.rfind("estimator,correlation,rmse,ci_length,coverage,morans_i", 0) == 0);
  CHECK(row.rfind("exact,1,0,0,1,", 0) == 0);
  std::ifstream json(dir / "a.json");
  const std::string text((std::istreambuf_iterator<char>(json)), {});
  CHECK(text.find("\"p_below_gold\": 0.25") != std::string::npos);
}
