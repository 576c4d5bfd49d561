#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "sae/cli/config.hpp"
#include "sae/cli/pipeline.hpp"
#include "sae/cli/svg.hpp"
#include "sae/csv.hpp"
#include "sae/error.hpp"
#include "sae/estimate.hpp"
#include "sae/random.hpp"

using namespace sae;
using namespace sae::cli;
namespace fs = std::filesystem;

namespace {

const char* kSmallRun = R"(
seed = 7
alpha = 0.1

[simulate]
areas = 16
columns = 4
population_mean = 300
population_log_sd = 0.2
intercept = -1.0
lambda = 0.8
sigma = 0.5
design = "stratified"
stratum = "age"
divisions = 2
sample_size = 120

[[simulate.variables]]
name = "age"
labels = ["young", "middle", "old"]
probabilities = [0.5, 0.4, 0.1]
effects = [0.0, 0.5, 1.0]

[[simulate.variables]]
name = "work"
parent = "age"
probabilities = [[0.7, 0.3], [0.6, 0.4], [0.2, 0.8]]
effects = [0.0, -0.5]

[estimators]
list = ["srs", "bayes_srs", "spatial", "spatial_fpc", "stratified", "ratio", "combined", "str_small", "full"]
stratum = "age"
ratio_variable = "work"
combined = ["age", "work"]
beta_draws = 200

[mcmc]
chains = 2
iterations = 400
burn_in = 200
thin = 1
adaptation_window = 25

[assess]
replicates = 200
)";

RunConfig small_config(const fs::path& out, const std::string& extra = {}, const Overrides& o = {}) {
  Json doc = parse_toml(kSmallRun + extra);
  doc["out"] = out.string();
  return make_run_config(doc, out, o);
}

Overrides seed_override(std::uint64_t seed) {
  Overrides o;
  o.seed = seed;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

std::string validation_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "(no error)";
}

// Replace one `key = value` line of the small config.
std::string with_line(const std::string& key, const std::string& replacement) {
  std::string text = kSmallRun;
  const std::regex line("\n" + key + " = [^\n]*");
  return std::regex_replace(text, line, "\n" + replacement, std::regex_constants::format_first_only);
}

}  // namespace

TEST_CASE("toml subset: tables, arrays of tables, inline tables and comments") {
  const Json doc = parse_toml(R"(
# comment
title = "a \"quoted\" # not a comment"
count = 1_000   # trailing comment
ratio = -2.5e-1
flag = true
empty = []
nested = [[1, 2], [3, 4]]
multi = [
  "x",  # inside
  'y',
]
point = { x = 1, y = 2.0 }
a.b = 3

[table]
inner = false

[table.sub]
z = inf

[[items]]
name = "first"

[[items]]
name = "second"
)");
  CHECK(doc["title"] == "a \"quoted\" # not a comment");
  CHECK(doc["count"] == 1000);
  CHECK(doc["ratio"].get<double>() == -0.25);
  CHECK(doc["flag"] == true);
  CHECK(doc["empty"].empty());
  CHECK(doc["nested"][1][0] == 3);
  CHECK(doc["multi"] == Json::array({"x", "y"}));
  CHECK(doc["point"]["y"].get<double>() == 2.0);
  CHECK(doc["a"]["b"] == 3);
  CHECK(doc["table"]["inner"] == false);
  CHECK(std::isinf(doc["table"]["sub"]["z"].get<double>()));
  REQUIRE(doc["items"].size() == 2);
  CHECK(doc["items"][1]["name"] == "second");
}

TEST_CASE("toml subset errors carry the line number") {
  CHECK(validation_message([] { parse_toml("a = 1\na = 2\n", "run.toml"); }).find("run.toml:2") != std::string::npos);
  CHECK(validation_message([] { parse_toml("x = [1, 2\n", "f"); }).find("unterminated array") != std::string::npos);
  CHECK(validation_message([] { parse_toml("\n\ny = \"open\n", "f"); }).find("f:3") != std::string::npos);
  CHECK(validation_message([] { parse_toml("[t]\n[t]\n", "f"); }).find("defined twice") != std::string::npos);
  CHECK(validation_message([] { parse_toml("k = 12abc\n", "f"); }).find("invalid") != std::string::npos);
}

TEST_CASE("config validation names the offending field") {
  const fs::path dir = oracle::scratch_dir("cli-validation");
  auto message = [&](const std::string& text) {
    return validation_message([&] { make_run_config(parse_toml(text), dir); });
  };
  CHECK(message(with_line("lambda", "lambda = 1.0")).find("simulate.lambda") != std::string::npos);
  CHECK(message(with_line("lambda", "lambda = -0.1")).find("simulate.lambda") != std::string::npos);
  CHECK(message(with_line("sigma", "sigma = 0")).find("simulate.sigma") != std::string::npos);
  CHECK(message(with_line("stratum", "stratum = \"income\"")).find("simulate.stratum") != std::string::npos);
  CHECK(message(with_line("list", "list = [\"srs\", \"magic\"]")).find("unknown estimator 'magic'") !=
        std::string::npos);
  CHECK(message(with_line("burn_in", "burn_in = 400")).find("mcmc.burn_in") != std::string::npos);
  CHECK(message(with_line("alpha", "alpha = 1.5")).find("alpha") != std::string::npos);
  CHECK(message(with_line("alpha", "alpha = 0.1\ncolour = \"red\"")).find("colour: unknown key") != std::string::npos);
  CHECK(message(with_line("effects", "effects = [0.0, 0.5]")).find("simulate.variables[0].labels") !=
        std::string::npos);
  CHECK(message(with_line("probabilities", "probabilities = [0.5, 0.4, 0.2]")).find("simulate.variables[0].probabilities") !=
        std::string::npos);
  CHECK(message(with_line("ratio_variable", "ratio_variable = \"\"")).find("estimators.ratio_variable") !=
        std::string::npos);
}

TEST_CASE("config hash ignores output location and threads but not the seed") {
  const fs::path dir = oracle::scratch_dir("cli-hash");
  const RunConfig a = small_config(dir / "a");
  const RunConfig b = small_config(dir / "b", {}, [] {
    Overrides o;
    o.threads = 3;
    return o;
  }());
  const RunConfig c = small_config(dir / "a", {}, seed_override(8));
  CHECK(a.hash.size() == 16);
  CHECK(a.hash == b.hash);
  CHECK(a.hash != c.hash);
  CHECK(c.seed == 8);
  CHECK(b.mcmc.threads == 3);
}

TEST_CASE("simulate is deterministic and matches a direct synth run") {
  const fs::path dir = oracle::scratch_dir("cli-simulate");
  const RunConfig a = small_config(dir / "a");
  const RunConfig b = small_config(dir / "b");
  cmd_simulate(a);
  cmd_simulate(b);
  std::set<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir / "a" / "data")) {
    files.insert(entry.path().filename().string());
    CHECK_MESSAGE(slurp(entry.path()) == slurp(dir / "b" / "data" / entry.path().filename()), entry.path());
  }
  CHECK(files == std::set<std::string>{"adjacency.csv", "areas.csv", "areas.geojson", "crosstab.csv", "gold.csv",
                                       "margins.csv", "sample.csv", "schema.json"});

  const RunConfig other = small_config(dir / "c", {}, seed_override(8));
  cmd_simulate(other);
  CHECK(slurp(dir / "a" / "data" / "sample.csv") != slurp(dir / "c" / "data" / "sample.csv"));

  // The stratified sample equals draw_stratified on the same truth and stream.
  const SimulatedData d = simulate_data(a);
  std::vector<int> division(16);
  for (int i = 0; i < 16; ++i) division[i] = i * 2 / 16;
  const Eigen::MatrixXi allocation =
      proportional_allocation(stratum_populations(d.truth, "age", division), 120 / 2);
  const SurveySample direct = draw_stratified(d.truth, "age", allocation, division, derive_seed(7, "simulate/sample"));
  REQUIRE(direct.records.size() == d.sample.records.size());
  for (std::size_t r = 0; r < direct.records.size(); ++r) {
    CHECK(direct.records[r].area == d.sample.records[r].area);
    CHECK(direct.records[r].y == d.sample.records[r].y);
    CHECK(direct.records[r].categories == d.sample.records[r].categories);
  }
  // Per-area stratum counts vary although every frame unit gets a fixed allocation.
  const CellTable cells = cell_counts(d.sample, std::vector<std::string>{"age"});
  CHECK(cells.n.col(0).minCoeff() != cells.n.col(0).maxCoeff());
  CHECK(d.sample.records.size() == static_cast<std::size_t>(allocation.sum()));

  // Reloaded files agree with the in-memory data.
  const Inputs in = load_inputs(a);
  CHECK(in.areas.labels() == d.areas.labels());
  CHECK(in.graph.edges() == d.graph.edges());
  REQUIRE(in.gold);
  CHECK((*in.gold - d.truth.pi_gold).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(in.sample.records.size() == d.sample.records.size());
}

TEST_CASE("estimate a registry subset writes only that estimator") {
  const fs::path dir = oracle::scratch_dir("cli-subset");
  const RunConfig sim = small_config(dir);
  cmd_simulate(sim);
  const RunConfig cfg = small_config(dir, {}, {});
  Json doc = cfg.document;
  doc["estimators"]["list"] = Json::array({"srs"});
  cmd_estimate(make_run_config(doc, dir));
  std::set<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir / "estimates")) files.insert(entry.path().filename().string());
  CHECK(files == std::set<std::string>{"manifest.json", "srs.csv", "srs.t.csv"});
  CHECK_FALSE(fs::exists(dir / "draws"));
}

TEST_CASE("estimators needing absent margins are skipped with a reason") {
  const fs::path dir = oracle::scratch_dir("cli-skip");
  const RunConfig sim = small_config(dir);
  cmd_simulate(sim);
  fs::remove(dir / "data" / "margins.csv");
  fs::remove(dir / "data" / "crosstab.csv");
  Json doc = sim.document;
  doc["estimators"]["list"] = Json::array({"srs", "stratified", "combined"});
  cmd_estimate(make_run_config(doc, dir));
  std::ifstream in(dir / "estimates" / "manifest.json");
  const Json manifest = Json::parse(in);
  const Json& list = manifest["estimators"];
  CHECK(list[0]["status"] == "ok");  // population comes from the area list
  CHECK(list[1]["status"] == "skipped");
  CHECK(list[1]["reason"].get<std::string>().find("margins") != std::string::npos);
  CHECK(list[2]["status"] == "skipped");
  CHECK(fs::exists(dir / "estimates" / "srs.csv"));
  CHECK_FALSE(fs::exists(dir / "estimates" / "stratified.csv"));

  doc["estimators"]["stratum"] = "income";
  doc["estimators"]["list"] = Json::array({"stratified"});
  const std::string msg = validation_message([&] { cmd_estimate(make_run_config(doc, dir)); });
  CHECK(msg.find("estimators.stratum") != std::string::npos);
  CHECK(msg.find("income") != std::string::npos);
}

TEST_CASE("full pipeline on synthetic data") {
  const fs::path dir = oracle::scratch_dir("cli-full");
  const RunConfig cfg = small_config(dir);
  cmd_simulate(cfg);
  cmd_estimate(cfg);
  for (const auto& name : estimator_registry()) {
    CHECK_MESSAGE(fs::exists(dir / "estimates" / (name + ".csv")), name);
  }
  for (const std::string name : {"spatial", "spatial_fpc", "str_small", "full"}) {
    CHECK(fs::exists(dir / "diagnostics" / (name + ".json")));
    CHECK(fs::exists(dir / "draws" / (name + ".csv")));
  }

  const Inputs in = load_inputs(cfg);
  const EstimateSet stratified = read_estimates_csv(dir / "estimates" / "stratified.csv", in.areas);
  const EstimateSet str_small = read_estimates_csv(dir / "estimates" / "str_small.csv", in.areas);
  const CellTable cells = cell_counts(in.sample, std::vector<std::string>{"age"});
  const Eigen::MatrixXd& table = in.margins->table("age");
  for (int i = 0; i < in.areas.size(); ++i) {
    bool unsampled = false;
    for (int k = 0; k < 3; ++k) unsampled = unsampled || (cells.n(i, k) == 0 && table(i, k) > 0);
    CHECK(stratified.areas[i].missing() == unsampled);
    CHECK(str_small.areas[i].has_interval());
  }
  CHECK(stratified.n_missing() > 0);

  cmd_assess(cfg);
  cmd_report(cfg);

  // Rows follow the configured order; SRS rows restricted to other direct estimators come last.
  const CsvTable table_rows = read_csv(dir / "assessment.csv");
  const std::size_t col = table_rows.column("estimator");
  for (std::size_t r = 0; r < estimator_registry().size(); ++r) {
    CHECK(table_rows.rows[r][col] == cfg.estimators.names[r]);
  }
  for (std::size_t r = estimator_registry().size(); r < table_rows.rows.size(); ++r) {
    CHECK(table_rows.rows[r][col].rfind("srs@", 0) == 0);
  }

  // Every output carries the config hash.
  const std::string stamp = "config-hash: " + cfg.hash;
  int checked = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    const std::string text = slurp(entry.path());
    if (ext == ".csv" || ext == ".txt") {
      CHECK_MESSAGE(first_line(entry.path()) == "# " + stamp, entry.path());
    } else if (ext == ".json" || ext == ".geojson") {
      CHECK_MESSAGE(Json::parse(text).value("config_hash", "") == cfg.hash, entry.path());
    } else if (ext == ".svg" || ext == ".md") {
      CHECK_MESSAGE(text.find("<!-- " + stamp + " -->") != std::string::npos, entry.path());
    } else {
      FAIL("unexpected output " << entry.path());
    }
    ++checked;
  }
  CHECK(checked > 40);
  const std::string report = slurp(dir / "report.md");
  CHECK(report.find("stratified (") != std::string::npos);
  CHECK(report.find("P(estimated I < real I)") != std::string::npos);
}

TEST_CASE("assess gold against itself") {
  const fs::path dir = oracle::scratch_dir("cli-gold");
  RunConfig cfg = small_config(dir);
  cmd_simulate(cfg);
  Json doc = cfg.document;
  doc["estimators"]["list"] = Json::array({"srs"});
  cfg = make_run_config(doc, dir);
  const Inputs in = load_inputs(cfg);
  EstimateSet exact;
  exact.estimator = "srs";
  for (Eigen::Index i = 0; i < in.gold->size(); ++i) {
    AreaEstimate a;
    a.point = a.low = a.high = (*in.gold)(i);
    a.variance = 0.0;
    a.df = 10.0;
    exact.areas.push_back(a);
  }
  write_estimates_csv(dir / "estimates" / "srs.csv", exact, in.areas);
  write_t_reference(dir / "estimates" / "srs.t.csv", exact, in.areas);
  cmd_assess(cfg);
  std::ifstream json_in(dir / "assessment.json");
  const Json doc_out = Json::parse(json_in);
  REQUIRE(doc_out["estimators"].size() == 1);
  const Json& row = doc_out["estimators"][0];
  CHECK(row["correlation"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(row["rmse"].get<double>() == 0.0);
  CHECK(row["coverage"].get<double>() == 1.0);
  CHECK(row["morans_i"].get<double>() == doctest::Approx(row["gold_morans_i"].get<double>()).epsilon(1e-12));
  // Zero-scale t draws reproduce gold exactly, never strictly below it.
  CHECK(row["moran_comparison"]["p_below_gold"].get<double>() == 0.0);

  fs::remove(dir / "data" / "gold.csv");
  CHECK(validation_message([&] { cmd_assess(cfg); }).find("inputs.gold") != std::string::npos);
}

TEST_CASE("choropleth: one polygon per area coloured by the shared seven-bin scale") {
  const fs::path dir = oracle::scratch_dir("cli-svg");
  const RunConfig cfg = small_config(dir);
  cmd_simulate(cfg);
  Json doc = cfg.document;
  doc["estimators"]["list"] = Json::array({"srs", "stratified"});
  const RunConfig run = make_run_config(doc, dir);
  cmd_estimate(run);
  cmd_assess(run);
  const Inputs in = load_inputs(run);

  // Independent range over gold and the point estimates read back from disk.
  double lo = in.gold->minCoeff(), hi = in.gold->maxCoeff();
  std::map<std::string, Eigen::VectorXd> values{{"gold", *in.gold}};
  for (const std::string name : {"srs", "stratified"}) {
    values[name] = read_estimates_csv(dir / "estimates" / (name + ".csv"), in.areas).points();
    for (double v : values[name]) {
      if (!std::isnan(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  const std::vector<std::string> palette{"#ffffb2", "#fed976", "#feb24c", "#fd8d3c", "#fc4e2a", "#e31a1c", "#b10026"};
  const std::regex path_re(R"re(<path class="area" data-area="([^"]+)" data-value="([^"]+)" fill="([^"]+)")re");
  for (const auto& [name, v] : values) {
    const std::string svg = slurp(dir / "maps" / (name + ".svg"));
    int count = 0;
    int missing = 0;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), path_re); it != std::sregex_iterator(); ++it) {
      const int area = in.areas.find((*it)[1].str(), "svg");
      CHECK(area == count);
      const std::string fill = (*it)[3];
      if (std::isnan(v(area))) {
        CHECK(fill == "#cccccc");
        CHECK((*it)[2] == "NA");
        ++missing;
      } else {
        int bin = static_cast<int>((v(area) - lo) / (hi - lo) * 7.0);
        bin = std::min(bin, 6);
        CHECK_MESSAGE(fill == palette[bin], name << " area " << area);
      }
      ++count;
    }
    CHECK(count == in.areas.size());
    CHECK(std::count(svg.begin(), svg.end(), '\n') > count);
    CHECK(svg.find("class=\"legend-bin\"") != std::string::npos);
    CHECK((missing > 0) == (svg.find("legend-missing") != std::string::npos));
  }
}

TEST_CASE("colour scale bins") {
  const ColorScale s{0.0, 0.7};
  CHECK(s.bin(0.0) == 0);
  CHECK(s.bin(0.0999) == 0);
  CHECK(s.bin(0.1001) == 1);
  CHECK(s.bin(0.7) == 6);
  CHECK(s.bin(-1.0) == 0);
  CHECK(s.color(std::nan("")) == "#cccccc");
  const ColorScale flat = pooled_scale({Eigen::VectorXd::Constant(3, 0.2)});
  CHECK(flat.bin(0.2) == 0);
}

#ifdef SAE_TOOL_PATH
TEST_CASE("command-line exit codes") {
  const fs::path dir = oracle::scratch_dir("cli-exit");
  auto run = [&](const std::string& args) {
    const std::string cmd = std::string(SAE_TOOL_PATH) + " " + args + " > " + (dir / "log.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };
  {
    std::ofstream good(dir / "run.toml");
    good << kSmallRun;
  }
  {
    std::ofstream bad(dir / "bad.toml");
    bad << with_line("lambda", "lambda = 1.5");
  }
  CHECK(run("simulate --config " + (dir / "run.toml").string() + " --out " + (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out" / "data" / "gold.csv"));
  CHECK(run("simulate --config " + (dir / "bad.toml").string()) == 1);
  CHECK(slurp(dir / "log.txt").find("simulate.lambda") != std::string::npos);
  CHECK(run("simulate --config " + (dir / "run.toml").string() + " --adjacency-rule diagonal") == 1);
  CHECK(run("report --config " + (dir / "run.toml").string() + " --out " + (dir / "empty").string()) == 1);
}
#endif

TEST_CASE("estimate and assess outputs are identical across runs, threads and parallel estimators") {
  const fs::path dir = oracle::scratch_dir("cli-determinism");
  const RunConfig serial = small_config(dir / "serial");
  Json doc = serial.document;
  doc["estimators"]["parallel"] = true;
  doc["out"] = (dir / "parallel").string();
  doc["threads"] = 2;
  const RunConfig concurrent = make_run_config(doc, dir / "parallel");
  for (const RunConfig* cfg : {&serial, &concurrent}) {
    cmd_simulate(*cfg);
    cmd_estimate(*cfg);
    cmd_assess(*cfg);
  }
  int compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "serial")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), dir / "serial");
    CHECK_MESSAGE(slurp(entry.path()) == slurp(dir / "parallel" / rel), rel);
    ++compared;
  }
  CHECK(compared > 40);
}
