#include "sae/frame.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "sae/csv.hpp"
#include "sae/error.hpp"

namespace sae {

using json = nlohmann::ordered_json;

int Variable::code(std::string_view token, const std::string& where) const {
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] == token) return static_cast<int>(k);
  }
  int value = -1;
  try {
    value = parse_int(token, where);
  } catch (const ValidationError&) {
    throw ValidationError(where + ": unknown category '" + std::string(token) + "' for variable '" + name + "'");
  }
  if (value < 0 || value >= cardinality) {
    throw ValidationError(where + ": category " + std::to_string(value) + " outside [0, " +
                          std::to_string(cardinality) + ") for variable '" + name + "'");
  }
  return value;
}

std::string Variable::label(int code) const {
  if (!labels.empty()) return labels.at(code);
  return std::to_string(code);
}

AreaIndex::AreaIndex(std::vector<std::string> labels, Eigen::VectorXd population)
    : labels_(std::move(labels)), population_(std::move(population)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!lookup_.emplace(labels_[i], static_cast<int>(i)).second) {
      throw ValidationError("duplicate area label '" + labels_[i] + "'");
    }
  }
  if (population_.size() != 0 && population_.size() != static_cast<Eigen::Index>(labels_.size())) {
    throw ValidationError("area population vector does not match the area list");
  }
}

AreaIndex AreaIndex::numbered(int n_areas) {
  std::vector<std::string> labels;
  for (int i = 0; i < n_areas; ++i) labels.push_back(std::to_string(i));
  return AreaIndex(std::move(labels));
}

int AreaIndex::find(std::string_view label, const std::string& where) const {
  const auto it = lookup_.find(std::string(label));
  if (it == lookup_.end()) throw ValidationError(where + ": unknown area '" + std::string(label) + "'");
  return it->second;
}

int DesignDescriptor::n_divisions() const {
  int m = 0;
  for (int d : division) m = std::max(m, d + 1);
  return division.empty() ? 1 : m;
}

std::optional<int> Schema::find(std::string_view name) const {
  for (std::size_t v = 0; v < variables.size(); ++v) {
    if (variables[v].name == name) return static_cast<int>(v);
  }
  return std::nullopt;
}

int Schema::index_of(std::string_view name) const {
  if (auto v = find(name)) return *v;
  throw ValidationError("unknown variable '" + std::string(name) + "'");
}

void Schema::validate(int n_areas) const {
  for (std::size_t v = 0; v < variables.size(); ++v) {
    const auto& var = variables[v];
    if (var.name.empty() || var.name == "area" || var.name == "y") {
      throw ValidationError("schema: invalid variable name '" + var.name + "'");
    }
    if (var.cardinality < 1) throw ValidationError("schema: variable '" + var.name + "' needs cardinality >= 1");
    if (!var.labels.empty() && static_cast<int>(var.labels.size()) != var.cardinality) {
      throw ValidationError("schema: variable '" + var.name + "' has " + std::to_string(var.labels.size()) +
                            " labels for cardinality " + std::to_string(var.cardinality));
    }
    for (std::size_t w = 0; w < v; ++w) {
      if (variables[w].name == var.name) throw ValidationError("schema: duplicate variable '" + var.name + "'");
    }
  }
  if (!crosstab.empty()) {
    if (crosstab.size() != 2 || crosstab[0] == crosstab[1]) {
      throw ValidationError("schema: crosstab must name two distinct variables");
    }
    index_of(crosstab[0]);
    index_of(crosstab[1]);
  }
  if (design.kind == DesignDescriptor::Kind::Stratified && !find(design.stratum_variable)) {
    throw ValidationError("schema: stratum variable '" + design.stratum_variable + "' is not a declared variable");
  }
  if (!design.division.empty()) {
    if (static_cast<int>(design.division.size()) != n_areas) {
      throw ValidationError("schema: division map must list one division per area");
    }
    for (int d : design.division) {
      if (d < 0) throw ValidationError("schema: negative division index");
    }
  }
}

std::optional<int> SurveySample::find_variable(std::string_view name) const {
  for (std::size_t v = 0; v < variables.size(); ++v) {
    if (variables[v].name == name) return static_cast<int>(v);
  }
  return std::nullopt;
}

int SurveySample::variable_index(std::string_view name) const {
  if (auto v = find_variable(name)) return *v;
  throw ValidationError("unknown variable '" + std::string(name) + "'");
}

Eigen::VectorXi SurveySample::area_sizes() const {
  Eigen::VectorXi n = Eigen::VectorXi::Zero(n_areas);
  for (const auto& r : records) ++n(r.area);
  return n;
}

Eigen::VectorXi SurveySample::area_successes() const {
  Eigen::VectorXi o = Eigen::VectorXi::Zero(n_areas);
  for (const auto& r : records) o(r.area) += r.y;
  return o;
}

const Eigen::MatrixXd& PopulationMargins::table(const std::string& variable) const {
  const auto it = tables.find(variable);
  if (it == tables.end()) throw ValidationError("margins: no population table for variable '" + variable + "'");
  return it->second;
}

void PopulationMargins::validate() const {
  if (population.size() != n_areas) throw ValidationError("margins: population vector length mismatch");
  auto check_count = [](double v, const std::string& what) {
    if (!(v >= 0.0) || v != std::floor(v)) throw ValidationError("margins: " + what + " is not a non-negative integer");
  };
  for (int i = 0; i < n_areas; ++i) check_count(population(i), "population of area " + std::to_string(i));
  for (const auto& [name, t] : tables) {
    if (t.rows() != n_areas) throw ValidationError("margins: table '" + name + "' has the wrong number of areas");
    for (int i = 0; i < n_areas; ++i) {
      for (Eigen::Index k = 0; k < t.cols(); ++k) check_count(t(i, k), "count of " + name + " in area " + std::to_string(i));
      if (t.row(i).sum() != population(i)) {
        throw ValidationError("margins: counts of '" + name + "' in area " + std::to_string(i) +
                              " sum to " + format_double(t.row(i).sum()) + ", population is " +
                              format_double(population(i)));
      }
    }
  }
  if (crosstab) {
    if (static_cast<int>(crosstab->cells.size()) != n_areas) throw ValidationError("margins: crosstab area count mismatch");
    for (int i = 0; i < n_areas; ++i) {
      const auto& c = crosstab->cells[i];
      for (Eigen::Index a = 0; a < c.rows(); ++a) {
        for (Eigen::Index b = 0; b < c.cols(); ++b) check_count(c(a, b), "crosstab count in area " + std::to_string(i));
      }
      if (c.sum() != population(i)) {
        throw ValidationError("margins: crosstab of area " + std::to_string(i) + " does not sum to the population");
      }
    }
  }
}

int CellTable::cell_index(std::span<const int> levels) const {
  int idx = 0;
  for (std::size_t v = 0; v < cardinalities.size(); ++v) idx = idx * cardinalities[v] + levels[v];
  return idx;
}

std::vector<int> CellTable::levels_of(int cell) const {
  std::vector<int> levels(cardinalities.size());
  for (std::size_t v = cardinalities.size(); v-- > 0;) {
    levels[v] = cell % cardinalities[v];
    cell /= cardinalities[v];
  }
  return levels;
}

CellTable cell_counts(const SurveySample& sample, std::span<const std::string> variables) {
  CellTable table;
  for (const auto& name : variables) {
    const int v = sample.variable_index(name);
    table.variables.push_back(v);
    table.cardinalities.push_back(sample.variables[v].cardinality);
    table.cells_per_area *= sample.variables[v].cardinality;
  }
  table.n = Eigen::MatrixXi::Zero(sample.n_areas, table.cells_per_area);
  table.successes = Eigen::MatrixXi::Zero(sample.n_areas, table.cells_per_area);
  std::vector<int> levels(table.variables.size());
  for (const auto& r : sample.records) {
    for (std::size_t v = 0; v < table.variables.size(); ++v) levels[v] = r.categories[table.variables[v]];
    const int c = table.cell_index(levels);
    ++table.n(r.area, c);
    table.successes(r.area, c) += r.y;
  }
  return table;
}

AreaIndex load_area_list(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t ca = t.column("area");
  const auto cp = t.find_column("population");
  std::vector<std::string> labels;
  Eigen::VectorXd pop(cp ? static_cast<Eigen::Index>(t.rows.size()) : 0);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    labels.push_back(t.rows[r][ca]);
    if (cp) {
      const int n = parse_int(t.rows[r][*cp], t.location(r));
      if (n <= 0) throw ValidationError(t.location(r) + ": population must be positive");
      pop(static_cast<Eigen::Index>(r)) = n;
    }
  }
  if (labels.empty()) throw ValidationError(path.string() + ": area list is empty");
  return AreaIndex(std::move(labels), std::move(pop));
}

Schema load_schema(const std::filesystem::path& path, const AreaIndex& areas) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  Schema schema;
  try {
    for (const auto& v : doc.value("variables", json::array())) {
      Variable var;
      var.name = v.at("name").get<std::string>();
      var.labels = v.value("labels", std::vector<std::string>{});
      var.cardinality = v.contains("cardinality") ? v["cardinality"].get<int>() : static_cast<int>(var.labels.size());
      schema.variables.push_back(std::move(var));
    }
    schema.crosstab = doc.value("crosstab", std::vector<std::string>{});
    if (doc.contains("design")) {
      const auto& d = doc["design"];
      const std::string kind = d.value("kind", "srs");
      if (kind == "stratified") {
        schema.design.kind = DesignDescriptor::Kind::Stratified;
        schema.design.stratum_variable = d.at("stratum").get<std::string>();
      } else if (kind != "srs") {
        throw ValidationError(path.string() + ": design.kind must be 'srs' or 'stratified'");
      }
      schema.design.division = d.value("divisions", std::vector<int>{});
    }
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  schema.validate(areas.size());
  return schema;
}

SurveySample load_sample(const std::filesystem::path& path, const Schema& schema, const AreaIndex& areas) {
  SurveySample sample;
  sample.n_areas = areas.size();
  sample.variables = schema.variables;
  sample.design = schema.design;
  const CsvTable t = read_csv(path);
  if (t.empty()) return sample;
  const std::size_t ca = t.column("area");
  const std::size_t cy = t.column("y");
  std::vector<std::size_t> cols;
  for (const auto& v : schema.variables) cols.push_back(t.column(v.name));
  sample.records.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = t.location(r);
    SurveyRecord rec;
    rec.area = areas.find(row[ca], where);
    if (row[cy] == "0") {
      rec.y = 0;
    } else if (row[cy] == "1") {
      rec.y = 1;
    } else {
      throw ValidationError(where + ": outcome y must be 0 or 1, found '" + row[cy] + "'");
    }
    for (std::size_t v = 0; v < cols.size(); ++v) rec.categories.push_back(schema.variables[v].code(row[cols[v]], where));
    sample.records.push_back(std::move(rec));
  }
  return sample;
}

PopulationMargins load_margins(const std::filesystem::path& path, const Schema& schema, const AreaIndex& areas,
                               const std::optional<std::filesystem::path>& crosstab_path) {
  PopulationMargins m;
  m.n_areas = areas.size();
  for (const auto& v : schema.variables) m.tables[v.name] = Eigen::MatrixXd::Zero(m.n_areas, v.cardinality);
  const CsvTable t = read_csv(path);
  std::map<std::string, bool> seen;
  if (!t.empty()) {
    const std::size_t ca = t.column("area");
    const std::size_t cv = t.column("variable");
    const std::size_t cc = t.column("category");
    const std::size_t cn = t.column("count");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto& row = t.rows[r];
      const std::string where = t.location(r);
      const int area = areas.find(row[ca], where);
      const auto v = schema.find(row[cv]);
      if (!v) throw ValidationError(where + ": unknown variable '" + row[cv] + "'");
      const int k = schema.variables[*v].code(row[cc], where);
      const int count = parse_int(row[cn], where);
      if (count < 0) throw ValidationError(where + ": negative count");
      m.tables[row[cv]](area, k) += count;
      seen[row[cv]] = true;
    }
  }
  for (const auto& v : schema.variables) {
    if (!seen[v.name]) m.tables.erase(v.name);
  }
  if (areas.population().size() == areas.size()) {
    m.population = areas.population();
  } else if (!m.tables.empty()) {
    m.population = m.tables.begin()->second.rowwise().sum();
  } else {
    throw ValidationError("population totals unavailable: the area list has no population column and no margins were given");
  }
  if (crosstab_path) {
    if (schema.crosstab.size() != 2) throw ValidationError("a crosstab file was given but the schema names no crosstab variables");
    const auto& v1 = schema.variables[schema.index_of(schema.crosstab[0])];
    const auto& v2 = schema.variables[schema.index_of(schema.crosstab[1])];
    PopulationMargins::Crosstab ct{v1.name, v2.name,
                                   std::vector<Eigen::MatrixXd>(m.n_areas, Eigen::MatrixXd::Zero(v1.cardinality, v2.cardinality))};
    const CsvTable c = read_csv(*crosstab_path);
    const std::size_t ca = c.column("area");
    const std::size_t c1 = c.column("cat1");
    const std::size_t c2 = c.column("cat2");
    const std::size_t cn = c.column("count");
    for (std::size_t r = 0; r < c.rows.size(); ++r) {
      const auto& row = c.rows[r];
      const std::string where = c.location(r);
      const int count = parse_int(row[cn], where);
      if (count < 0) throw ValidationError(where + ": negative count");
      ct.cells[areas.find(row[ca], where)](v1.code(row[c1], where), v2.code(row[c2], where)) += count;
    }
    m.crosstab = std::move(ct);
  }
  m.validate();
  return m;
}

Eigen::VectorXd load_gold(const std::filesystem::path& path, const AreaIndex& areas) {
  const CsvTable t = read_csv(path);
  const std::size_t ca = t.column("area");
  const std::size_t cp = t.column("pi");
  Eigen::VectorXd gold = Eigen::VectorXd::Constant(areas.size(), std::nan(""));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = t.location(r);
    const double p = parse_double(t.rows[r][cp], where);
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(where + ": gold proportion outside [0, 1]");
    gold(areas.find(t.rows[r][ca], where)) = p;
  }
  for (int i = 0; i < areas.size(); ++i) {
    if (std::isnan(gold(i))) throw ValidationError(path.string() + ": no gold value for area '" + areas.label(i) + "'");
  }
  return gold;
}

namespace {

void comment_line(std::ofstream& out, const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << "\n";
}

}  // namespace

void write_area_list(const std::filesystem::path& path, const AreaIndex& areas, const std::string& comment) {
  std::ofstream out = open_output(path);
  comment_line(out, comment);
  const bool pop = areas.population().size() == areas.size();
  out << (pop ? "area,population\n" : "area\n");
  for (int i = 0; i < areas.size(); ++i) {
    out << areas.label(i);
    if (pop) out << "," << static_cast<long long>(areas.population()(i));
    out << "\n";
  }
}

void write_schema(const std::filesystem::path& path, const Schema& schema, const std::string& config_hash) {
  json doc;
  if (!config_hash.empty()) doc["config_hash"] = config_hash;
  json vars = json::array();
  for (const auto& v : schema.variables) {
    json entry{{"name", v.name}, {"cardinality", v.cardinality}};
    if (!v.labels.empty()) entry["labels"] = v.labels;
    vars.push_back(entry);
  }
  doc["variables"] = vars;
  if (!schema.crosstab.empty()) doc["crosstab"] = schema.crosstab;
  json design{{"kind", schema.design.kind == DesignDescriptor::Kind::Stratified ? "stratified" : "srs"}};
  if (schema.design.kind == DesignDescriptor::Kind::Stratified) design["stratum"] = schema.design.stratum_variable;
  if (!schema.design.division.empty()) design["divisions"] = schema.design.division;
  doc["design"] = design;
  std::ofstream out = open_output(path);
  out << doc.dump(2) << "\n";
}

void write_sample(const std::filesystem::path& path, const SurveySample& sample, const AreaIndex& areas,
                  const std::string& comment) {
  std::ofstream out = open_output(path);
  comment_line(out, comment);
  out << "area,y";
  for (const auto& v : sample.variables) out << "," << v.name;
  out << "\n";
  for (const auto& r : sample.records) {
    out << areas.label(r.area) << "," << r.y;
    for (std::size_t v = 0; v < sample.variables.size(); ++v) out << "," << sample.variables[v].label(r.categories[v]);
    out << "\n";
  }
}

void write_margins(const std::filesystem::path& path, const PopulationMargins& margins, const Schema& schema,
                   const AreaIndex& areas, const std::string& comment) {
  std::ofstream out = open_output(path);
  comment_line(out, comment);
  out << "area,variable,category,count\n";
  for (int i = 0; i < margins.n_areas; ++i) {
    for (const auto& v : schema.variables) {
      if (!margins.has_table(v.name)) continue;
      const auto& t = margins.table(v.name);
      for (int k = 0; k < v.cardinality; ++k) {
        out << areas.label(i) << "," << v.name << "," << v.label(k) << "," << static_cast<long long>(t(i, k)) << "\n";
      }
    }
  }
}

void write_crosstab(const std::filesystem::path& path, const PopulationMargins& margins, const AreaIndex& areas,
                    const std::string& comment) {
  if (!margins.crosstab) throw ValidationError("write_crosstab: margins carry no crosstab");
  std::ofstream out = open_output(path);
  comment_line(out, comment);
  out << "area,cat1,cat2,count\n";
  for (int i = 0; i < margins.n_areas; ++i) {
    const auto& c = margins.crosstab->cells[i];
    for (Eigen::Index a = 0; a < c.rows(); ++a) {
      for (Eigen::Index b = 0; b < c.cols(); ++b) {
        out << areas.label(i) << "," << a << "," << b << "," << static_cast<long long>(c(a, b)) << "\n";
      }
    }
  }
}

void write_gold(const std::filesystem::path& path, const Eigen::VectorXd& gold, const AreaIndex& areas,
                const std::string& comment) {
  std::ofstream out = open_output(path);
  comment_line(out, comment);
  out << "area,pi\n";
  for (int i = 0; i < areas.size(); ++i) out << areas.label(i) << "," << format_double(gold(i)) << "\n";
}

}  // namespace sae
