#include "sae/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "sae/error.hpp"
#include "sae/random.hpp"

namespace sae::cli {

namespace {

// ---------------------------------------------------------------- TOML subset

class TomlReader {
 public:
  TomlReader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  Json parse() {
    Json root = Json::object();
    Json* table = &root;
    while (true) {
      skip_blank_lines();
      if (at_end()) break;
      if (peek() == '[') {
        table = header(root);
      } else {
        key_value(*table);
      }
      end_of_line();
    }
    return root;
  }

 private:
  const std::string& text_;
  std::string source_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::set<std::string> defined_tables_;

  [[noreturn]] void fail(const std::string& message) const {
    throw ValidationError(source_ + ":" + std::to_string(line_) + ": " + message);
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }
  char take() {
    const char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_spaces() {
    while (!at_end() && (peek() == ' ' || peek() == '\t')) take();
  }
  void skip_comment() {
    if (peek() == '#') {
      while (!at_end() && peek() != '\n') take();
    }
  }
  void skip_blank_lines() {
    while (!at_end()) {
      skip_spaces();
      skip_comment();
      if (peek() == '\r') take();
      if (peek() == '\n') {
        take();
      } else {
        break;
      }
    }
  }
  // Whitespace, comments and newlines inside arrays and inline tables.
  void skip_layout() {
    while (!at_end()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        take();
      } else if (c == '#') {
        skip_comment();
      } else {
        break;
      }
    }
  }
  void end_of_line() {
    skip_spaces();
    skip_comment();
    if (peek() == '\r') take();
    if (at_end()) return;
    if (peek() != '\n') fail(std::string("unexpected character '") + peek() + "'");
    take();
  }

  std::string bare_or_quoted_key() {
    skip_spaces();
    if (peek() == '"' || peek() == '\'') return string_value();
    std::string key;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) {
      key += take();
    }
    if (key.empty()) fail("expected a key");
    return key;
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts{bare_or_quoted_key()};
    skip_spaces();
    while (peek() == '.') {
      take();
      parts.push_back(bare_or_quoted_key());
      skip_spaces();
    }
    return parts;
  }

  static std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : ".") + p;
    return out;
  }

  Json* descend(Json& root, const std::vector<std::string>& parts, std::size_t count) {
    Json* node = &root;
    for (std::size_t i = 0; i < count; ++i) {
      Json& child = (*node)[parts[i]];
      if (child.is_null()) child = Json::object();
      if (child.is_array()) {
        if (child.empty() || !child.back().is_object()) fail("'" + parts[i] + "' is not a table");
        node = &child.back();
      } else if (child.is_object()) {
        node = &child;
      } else {
        fail("'" + parts[i] + "' is already a value");
      }
    }
    return node;
  }

  Json* header(Json& root) {
    take();
    const bool array = peek() == '[';
    if (array) take();
    const auto parts = dotted_key();
    if (peek() != ']') fail("expected ']'");
    take();
    if (array) {
      if (peek() != ']') fail("expected ']]'");
      take();
    }
    Json* parent = descend(root, parts, parts.size() - 1);
    Json& slot = (*parent)[parts.back()];
    if (array) {
      if (slot.is_null()) slot = Json::array();
      if (!slot.is_array()) fail("'" + join(parts) + "' is not an array of tables");
      slot.push_back(Json::object());
      return &slot.back();
    }
    if (!defined_tables_.insert(join(parts)).second) fail("table '" + join(parts) + "' defined twice");
    if (slot.is_null()) slot = Json::object();
    if (!slot.is_object()) fail("'" + join(parts) + "' is already a value");
    return &slot;
  }

  void key_value(Json& table) {
    const auto parts = dotted_key();
    skip_spaces();
    if (peek() != '=') fail("expected '=' after key '" + join(parts) + "'");
    take();
    skip_spaces();
    Json* target = descend(table, parts, parts.size() - 1);
    if (target->contains(parts.back())) fail("duplicate key '" + join(parts) + "'");
    (*target)[parts.back()] = value();
  }

  Json value() {
    const char c = peek();
    if (c == '"' || c == '\'') return string_value();
    if (c == '[') return array_value();
    if (c == '{') return inline_table();
    if (text_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return true;
    }
    if (text_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return false;
    }
    return number_value();
  }

  std::string string_value() {
    const char quote = take();
    std::string out;
    while (true) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      const char c = take();
      if (c == quote) break;
      if (c == '\\' && quote == '"') {
        if (at_end()) fail("unterminated string");
        const char e = take();
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '\\': out += '\\'; break;
          case '"': out += '"'; break;
          default: fail(std::string("unsupported escape '\\") + e + "'");
        }
      } else {
        out += c;
      }
    }
    return out;
  }

  Json array_value() {
    take();
    Json out = Json::array();
    while (true) {
      skip_layout();
      if (at_end()) fail("unterminated array");
      if (peek() == ']') {
        take();
        return out;
      }
      out.push_back(value());
      skip_layout();
      if (at_end()) fail("unterminated array");
      if (peek() == ',') {
        take();
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  Json inline_table() {
    take();
    Json out = Json::object();
    skip_spaces();
    if (peek() == '}') {
      take();
      return out;
    }
    while (true) {
      key_value(out);
      skip_spaces();
      if (peek() == ',') {
        take();
      } else if (peek() == '}') {
        take();
        return out;
      } else {
        fail("expected ',' or '}' in inline table");
      }
    }
  }

  Json number_value() {
    std::string token;
    while (!at_end()) {
      const char c = peek();
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.' || c == '_') {
        token += take();
      } else {
        break;
      }
    }
    if (token.empty()) fail("expected a value");
    std::string digits;
    std::copy_if(token.begin(), token.end(), std::back_inserter(digits), [](char c) { return c != '_'; });
    const std::string body = (digits[0] == '+' || digits[0] == '-') ? digits.substr(1) : digits;
    const double sign = digits[0] == '-' ? -1.0 : 1.0;
    if (body == "inf") return sign * std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    const bool is_float = body.find_first_of(".eE") != std::string::npos;
    const char* first = digits.data() + (digits[0] == '+' ? 1 : 0);
    const char* last = digits.data() + digits.size();
    if (is_float) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last) fail("invalid number '" + token + "'");
      return v;
    }
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) fail("invalid value '" + token + "'");
    return v;
  }
};

// ---------------------------------------------------------------- typed access

[[noreturn]] void invalid(const std::string& field, const std::string& message) {
  throw ValidationError("config: " + field + ": " + message);
}

std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// A table with a dotted path prefix for error messages; flags unknown keys.
class Section {
 public:
  Section(const Json* node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_->is_object()) invalid(path_, "expected a table");
  }

  bool present() const { return node_ != nullptr; }
  bool has(const std::string& key) const { return node_ && node_->contains(key); }
  std::string field(const std::string& key) const { return join_path(path_, key); }

  const Json* raw(const std::string& key) const {
    used_.insert(key);
    if (!node_) return nullptr;
    const auto it = node_->find(key);
    return it == node_->end() ? nullptr : &*it;
  }

  Section table(const std::string& key) const { return Section(raw(key), field(key)); }

  double number(const std::string& key, double fallback) const {
    const Json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_number()) invalid(field(key), "expected a number");
    return v->get<double>();
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    const Json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) invalid(field(key), "expected an integer");
    return v->get<std::int64_t>();
  }

  bool boolean(const std::string& key, bool fallback) const {
    const Json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_boolean()) invalid(field(key), "expected true or false");
    return v->get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    const Json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_string()) invalid(field(key), "expected a string");
    return v->get<std::string>();
  }

  std::vector<std::string> texts(const std::string& key) const {
    const Json* v = raw(key);
    std::vector<std::string> out;
    if (!v) return out;
    if (!v->is_array()) invalid(field(key), "expected an array of strings");
    for (const auto& item : *v) {
      if (!item.is_string()) invalid(field(key), "expected an array of strings");
      out.push_back(item.get<std::string>());
    }
    return out;
  }

  std::vector<double> numbers(const std::string& key) const {
    const Json* v = raw(key);
    std::vector<double> out;
    if (!v) return out;
    if (!v->is_array()) invalid(field(key), "expected an array of numbers");
    for (const auto& item : *v) {
      if (!item.is_number()) invalid(field(key), "expected an array of numbers");
      out.push_back(item.get<double>());
    }
    return out;
  }

  void reject_unknown() const {
    if (!node_) return;
    for (const auto& [key, value] : node_->items()) {
      if (!used_.count(key)) invalid(field(key), "unknown key");
    }
  }

 private:
  const Json* node_;
  std::string path_;
  mutable std::set<std::string> used_;
};

int positive_int(const Section& s, const std::string& key, int fallback, int minimum = 1) {
  const std::int64_t v = s.integer(key, fallback);
  if (v < minimum || v > std::numeric_limits<int>::max()) {
    invalid(s.field(key), "must be an integer >= " + std::to_string(minimum));
  }
  return static_cast<int>(v);
}

std::optional<std::filesystem::path> optional_path(const Section& s, const std::string& key,
                                                   const std::filesystem::path& base) {
  if (!s.has(key)) {
    s.raw(key);
    return std::nullopt;
  }
  const std::filesystem::path p = s.text(key, "");
  if (p.empty()) invalid(s.field(key), "empty path");
  return p.is_absolute() ? p : base / p;
}

std::filesystem::path required_path(const Section& s, const std::string& key, const std::filesystem::path& base) {
  auto p = optional_path(s, key, base);
  if (!p) invalid(s.field(key), "required");
  return *p;
}

SimulatedVariable read_variable(const Json& node, const std::string& path, const std::vector<SimulatedVariable>& earlier) {
  Section s(&node, path);
  SimulatedVariable v;
  v.name = s.text("name", "");
  if (v.name.empty()) invalid(s.field("name"), "required");
  for (const auto& e : earlier) {
    if (e.name == v.name) invalid(s.field("name"), "duplicate variable '" + v.name + "'");
  }
  v.labels = s.texts("labels");
  const std::vector<double> effects = s.numbers("effects");
  if (effects.size() < 2) invalid(s.field("effects"), "need one effect per category, at least two");
  const int k = static_cast<int>(effects.size());
  if (!v.labels.empty() && static_cast<int>(v.labels.size()) != k) {
    invalid(s.field("labels"), "expected " + std::to_string(k) + " labels");
  }
  if (effects[0] != 0.0) invalid(s.field("effects"), "the reference level (first entry) must be 0");
  v.effects = Eigen::Map<const Eigen::VectorXd>(effects.data(), k);
  for (double e : effects) {
    if (!std::isfinite(e)) invalid(s.field("effects"), "must be finite");
  }
  v.parent = s.text("parent", "");
  int rows = 1;
  if (!v.parent.empty()) {
    const auto it = std::find_if(earlier.begin(), earlier.end(), [&](const auto& e) { return e.name == v.parent; });
    if (it == earlier.end()) invalid(s.field("parent"), "must name an earlier variable");
    rows = static_cast<int>(it->effects.size());
  }
  const Json* probs = s.raw("probabilities");
  v.probabilities = Eigen::MatrixXd::Constant(rows, k, 1.0 / k);
  if (probs) {
    const std::string field = s.field("probabilities");
    auto read_row = [&](const Json& row, int r) {
      if (!row.is_array() || static_cast<int>(row.size()) != k) {
        invalid(field, "each row needs " + std::to_string(k) + " probabilities");
      }
      for (int c = 0; c < k; ++c) {
        if (!row[c].is_number() || !(row[c].get<double>() >= 0.0)) invalid(field, "entries must be non-negative numbers");
        v.probabilities(r, c) = row[c].get<double>();
      }
      if (std::abs(v.probabilities.row(r).sum() - 1.0) > 1e-9) invalid(field, "each row must sum to 1");
    };
    if (!probs->is_array() || probs->empty()) invalid(field, "expected an array");
    if ((*probs)[0].is_array()) {
      if (static_cast<int>(probs->size()) != rows) {
        invalid(field, "expected " + std::to_string(rows) + (rows == 1 ? " row" : " rows (one per parent category)"));
      }
      for (int r = 0; r < rows; ++r) read_row((*probs)[r], r);
    } else {
      if (rows != 1) invalid(field, "expected one row per parent category");
      read_row(*probs, 0);
    }
  }
  v.area_variation = s.number("area_variation", 0.0);
  if (!(v.area_variation >= 0.0) || !std::isfinite(v.area_variation)) {
    invalid(s.field("area_variation"), "must be a non-negative number");
  }
  if (v.area_variation > 0.0 && !v.parent.empty()) {
    invalid(s.field("area_variation"), "not supported for variables with a parent");
  }
  s.reject_unknown();
  return v;
}

SimulationSettings read_simulation(const Section& s) {
  SimulationSettings sim;
  sim.areas = positive_int(s, "areas", sim.areas, 2);
  sim.columns = positive_int(s, "columns", static_cast<int>(std::ceil(std::sqrt(sim.areas))));
  sim.population_mean = s.number("population_mean", sim.population_mean);
  if (!(sim.population_mean >= 1.0) || !std::isfinite(sim.population_mean)) {
    invalid(s.field("population_mean"), "must be at least 1");
  }
  sim.population_log_sd = s.number("population_log_sd", sim.population_log_sd);
  if (!(sim.population_log_sd >= 0.0) || sim.population_log_sd > 3.0) {
    invalid(s.field("population_log_sd"), "must lie in [0, 3]");
  }
  sim.intercept = s.number("intercept", sim.intercept);
  if (!std::isfinite(sim.intercept)) invalid(s.field("intercept"), "must be finite");
  sim.field.lambda = s.number("lambda", sim.field.lambda);
  if (!(sim.field.lambda >= 0.0 && sim.field.lambda < 1.0)) invalid(s.field("lambda"), "must lie in [0, 1)");
  sim.field.sigma = s.number("sigma", sim.field.sigma);
  if (!(sim.field.sigma > 0.0) || !std::isfinite(sim.field.sigma)) invalid(s.field("sigma"), "must be positive");

  if (const Json* vars = s.raw("variables")) {
    if (!vars->is_array()) invalid(s.field("variables"), "expected an array of tables");
    for (std::size_t i = 0; i < vars->size(); ++i) {
      sim.variables.push_back(
          read_variable((*vars)[i], s.field("variables") + "[" + std::to_string(i) + "]", sim.variables));
    }
  }

  sim.design = s.text("design", sim.design);
  if (sim.design != "srs" && sim.design != "stratified") invalid(s.field("design"), "must be \"srs\" or \"stratified\"");
  sim.sample_size = positive_int(s, "sample_size", sim.sample_size);
  sim.stratum = s.text("stratum", "");
  sim.divisions = positive_int(s, "divisions", 1);
  if (sim.divisions > sim.areas) invalid(s.field("divisions"), "cannot exceed the number of areas");
  if (sim.design == "stratified") {
    if (sim.stratum.empty()) invalid(s.field("stratum"), "required for a stratified design");
    if (std::none_of(sim.variables.begin(), sim.variables.end(), [&](const auto& v) { return v.name == sim.stratum; })) {
      invalid(s.field("stratum"), "unknown variable '" + sim.stratum + "'");
    }
  }
  s.reject_unknown();
  return sim;
}

}  // namespace

Json parse_toml(const std::string& text, const std::string& source) { return TomlReader(text, source).parse(); }

Json read_toml(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_toml(buffer.str(), path.filename().string());
}

std::string config_hash(const Json& document) {
  Json canonical = document;
  canonical.erase("out");
  canonical.erase("threads");
  // Concurrency settings never change results.
  if (canonical.contains("estimators") && canonical["estimators"].is_object()) {
    canonical["estimators"].erase("parallel");
  }
  // ordered_json keeps insertion order; re-sort keys so equivalent files hash alike.
  const std::string text = nlohmann::json(canonical).dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

InputPaths RunConfig::input_paths() const {
  if (inputs) return *inputs;
  const auto data = out / "data";
  InputPaths p;
  p.areas = data / "areas.csv";
  p.schema = data / "schema.json";
  p.sample = data / "sample.csv";
  p.margins = data / "margins.csv";
  if (std::filesystem::exists(data / "crosstab.csv")) p.crosstab = data / "crosstab.csv";
  p.adjacency = data / "adjacency.csv";
  p.geojson = data / "areas.geojson";
  p.gold = data / "gold.csv";
  return p;
}

RunConfig make_run_config(Json document, const std::filesystem::path& base_dir, const Overrides& overrides) {
  if (!document.is_object()) invalid("(root)", "expected a table");
  if (overrides.seed) document["seed"] = *overrides.seed;
  if (overrides.out) document["out"] = overrides.out->string();
  if (overrides.threads) document["threads"] = *overrides.threads;
  if (overrides.clip_t_draws) document["assess"]["clip_t_draws"] = true;
  if (overrides.adjacency_rule) document["adjacency_rule"] = *overrides.adjacency_rule;

  RunConfig cfg;
  cfg.base_dir = base_dir;
  Section root(&document, "");

  const std::int64_t seed = root.integer("seed", 1);
  if (seed < 0) invalid("seed", "must be non-negative");
  cfg.seed = static_cast<std::uint64_t>(seed);
  const std::filesystem::path out = root.text("out", "out");
  cfg.out = out.is_absolute() ? out : base_dir / out;
  cfg.alpha = root.number("alpha", 0.05);
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) invalid("alpha", "must lie in (0, 1)");
  cfg.threads = positive_int(root, "threads", 1);
  const std::string rule = root.text("adjacency_rule", "segment");
  try {
    cfg.adjacency_rule = parse_adjacency_rule(rule);
  } catch (const ValidationError&) {
    invalid("adjacency_rule", "must be \"segment\" or \"point\", got \"" + rule + "\"");
  }

  if (const Section sim = root.table("simulate"); sim.present()) cfg.simulate = read_simulation(sim);

  if (const Section in = root.table("inputs"); in.present()) {
    InputPaths p;
    p.areas = required_path(in, "areas", base_dir);
    p.schema = required_path(in, "schema", base_dir);
    p.sample = required_path(in, "sample", base_dir);
    p.margins = required_path(in, "margins", base_dir);
    p.crosstab = optional_path(in, "crosstab", base_dir);
    p.adjacency = optional_path(in, "adjacency", base_dir);
    p.geojson = optional_path(in, "geojson", base_dir);
    p.gold = optional_path(in, "gold", base_dir);
    p.one_based = in.boolean("one_based", false);
    if (!p.adjacency && !p.geojson) invalid("inputs.adjacency", "an edge list or inputs.geojson is required");
    in.reject_unknown();
    cfg.inputs = p;
  }

  const Section est = root.table("estimators");
  cfg.estimators.names = est.has("list") ? est.texts("list") : std::vector<std::string>{"srs", "bayes_srs", "spatial", "spatial_fpc"};
  if (cfg.estimators.names.empty()) invalid("estimators.list", "must name at least one estimator");
  std::set<std::string> seen;
  for (const auto& name : cfg.estimators.names) {
    const auto& reg = estimator_registry();
    if (std::find(reg.begin(), reg.end(), name) == reg.end()) {
      invalid("estimators.list", "unknown estimator '" + name + "'");
    }
    if (!seen.insert(name).second) invalid("estimators.list", "duplicate estimator '" + name + "'");
  }
  cfg.estimators.stratum = est.text("stratum", cfg.simulate ? cfg.simulate->stratum : "");
  cfg.estimators.ratio_variable = est.text("ratio_variable", "");
  cfg.estimators.combined = est.texts("combined");
  if (!cfg.estimators.combined.empty() && cfg.estimators.combined.size() != 2) {
    invalid("estimators.combined", "must name exactly two variables");
  }
  if (!cfg.estimators.combined.empty() && cfg.estimators.combined[0] == cfg.estimators.combined[1]) {
    invalid("estimators.combined", "variables must differ");
  }
  const std::string mode = est.text("combine_mode", "crosstab");
  try {
    cfg.estimators.combine_mode = parse_combine_mode(mode);
  } catch (const ValidationError&) {
    invalid("estimators.combine_mode", "must be \"crosstab\" or \"independence\", got \"" + mode + "\"");
  }
  const std::string lik = est.text("likelihood", "binomial");
  try {
    cfg.estimators.likelihood = parse_likelihood(lik);
  } catch (const ValidationError&) {
    invalid("estimators.likelihood", "must be \"binomial\" or \"bernoulli\", got \"" + lik + "\"");
  }
  cfg.estimators.beta_draws = positive_int(est, "beta_draws", cfg.estimators.beta_draws, 100);
  for (const auto& name : cfg.estimators.names) {
    if ((name == "stratified" || name == "str_small") && cfg.estimators.stratum.empty()) {
      invalid("estimators.stratum", "required by estimator '" + name + "'");
    }
    if (name == "ratio" && cfg.estimators.ratio_variable.empty()) {
      invalid("estimators.ratio_variable", "required by estimator 'ratio'");
    }
    if ((name == "combined" || name == "full") && cfg.estimators.combined.empty()) {
      invalid("estimators.combined", "required by estimator '" + name + "'");
    }
  }
  cfg.estimators.parallel = est.boolean("parallel", false);
  est.reject_unknown();

  const Section mc = root.table("mcmc");
  cfg.mcmc.chains = positive_int(mc, "chains", cfg.mcmc.chains, 2);
  cfg.mcmc.iterations = positive_int(mc, "iterations", cfg.mcmc.iterations);
  cfg.mcmc.burn_in = positive_int(mc, "burn_in", cfg.mcmc.burn_in, 0);
  cfg.mcmc.thin = positive_int(mc, "thin", cfg.mcmc.thin);
  cfg.mcmc.adaptation_window = positive_int(mc, "adaptation_window", cfg.mcmc.adaptation_window);
  cfg.mcmc.target_acceptance = mc.number("target_acceptance", cfg.mcmc.target_acceptance);
  if (!(cfg.mcmc.target_acceptance > 0.0 && cfg.mcmc.target_acceptance < 1.0)) {
    invalid("mcmc.target_acceptance", "must lie in (0, 1)");
  }
  if (cfg.mcmc.burn_in >= cfg.mcmc.iterations || cfg.mcmc.draws_per_chain() < 1) {
    invalid("mcmc.burn_in", "no retained draws: iterations must exceed burn_in by at least thin");
  }
  cfg.mcmc.seed = cfg.seed;
  cfg.mcmc.threads = cfg.threads;
  mc.reject_unknown();

  const Section hp = root.table("hyperpriors");
  const std::string intercept = hp.text("intercept", "normal");
  if (intercept == "normal") {
    cfg.hyperpriors.intercept = InterceptPrior::Normal;
  } else if (intercept == "flat") {
    cfg.hyperpriors.intercept = InterceptPrior::Flat;
  } else if (intercept == "logistic") {
    cfg.hyperpriors.intercept = InterceptPrior::Logistic;
  } else {
    invalid("hyperpriors.intercept", "must be \"normal\", \"flat\" or \"logistic\"");
  }
  cfg.hyperpriors.intercept_mean = hp.number("intercept_mean", cfg.hyperpriors.intercept_mean);
  cfg.hyperpriors.intercept_sd = hp.number("intercept_sd", cfg.hyperpriors.intercept_sd);
  if (!(cfg.hyperpriors.intercept_sd > 0.0)) invalid("hyperpriors.intercept_sd", "must be positive");
  cfg.hyperpriors.effect_sd = hp.number("effect_sd", cfg.hyperpriors.effect_sd);
  if (!(cfg.hyperpriors.effect_sd > 0.0)) invalid("hyperpriors.effect_sd", "must be positive (inf for flat)");
  cfg.hyperpriors.sigma_max = hp.number("sigma_max", cfg.hyperpriors.sigma_max);
  if (!(cfg.hyperpriors.sigma_max > 0.0) || !std::isfinite(cfg.hyperpriors.sigma_max)) {
    invalid("hyperpriors.sigma_max", "must be positive and finite");
  }
  cfg.hyperpriors.lambda_max = hp.number("lambda_max", cfg.hyperpriors.lambda_max);
  if (!(cfg.hyperpriors.lambda_max > 0.0 && cfg.hyperpriors.lambda_max < 1.0)) {
    invalid("hyperpriors.lambda_max", "must lie in (0, 1)");
  }
  hp.reject_unknown();

  const Section as = root.table("assess");
  cfg.assess.replicates = positive_int(as, "replicates", cfg.assess.replicates, 100);
  cfg.assess.clip_t_draws = as.boolean("clip_t_draws", false);
  cfg.assess.matched_srs = as.boolean("matched_srs", true);
  as.reject_unknown();

  root.reject_unknown();
  cfg.document = document;
  cfg.hash = config_hash(document);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, const Overrides& overrides) {
  return make_run_config(read_toml(path), path.parent_path(), overrides);
}

}  // namespace sae::cli
