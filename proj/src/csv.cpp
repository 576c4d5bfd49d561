#include "sae/csv.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include "sae/error.hpp"

namespace sae {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
  if (auto c = find_column(name)) return *c;
  throw ValidationError(path.string() + ": missing column '" + std::string(name) + "'");
}

std::optional<std::size_t> CsvTable::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

std::string CsvTable::location(std::size_t row) const {
  return path.string() + ", line " + std::to_string(line_numbers.at(row));
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.emplace_back(trim(current));
  return fields;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  CsvTable table;
  table.path = path;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto fields = split_csv_line(view);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ValidationError(path.string() + ", line " + std::to_string(line_no) + ": expected " +
                            std::to_string(table.header.size()) + " fields, found " +
                            std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  return table;
}

int parse_int(std::string_view text, const std::string& where) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ValidationError(where + ": '" + std::string(text) + "' is not an integer");
  }
  return value;
}

double parse_double(std::string_view text, const std::string& where) {
  if (text == "NA" || text == "nan" || text == "NaN") return std::nan("");
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ValidationError(where + ": '" + std::string(text) + "' is not a number");
  }
  return value;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "NA";
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) return "NA";
  return std::string(buffer, ptr);
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace sae
