#pragma once

// Minimal CSV plumbing shared by every file reader and writer.
// Lines that are blank or start with '#' are skipped (header comments).

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sae {

struct CsvTable {
  std::filesystem::path path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  bool empty() const { return header.empty(); }
  std::size_t column(std::string_view name) const;
  std::optional<std::size_t> find_column(std::string_view name) const;
  /// "file.csv, line 7" style location used in error messages.
  std::string location(std::size_t row) const;
};

/// Throws ValidationError on unreadable files or ragged rows.
CsvTable read_csv(const std::filesystem::path& path);

std::vector<std::string> split_csv_line(std::string_view line);

int parse_int(std::string_view text, const std::string& where);
double parse_double(std::string_view text, const std::string& where);

/// Shortest round-trip decimal representation; "NA" for NaN.
std::string format_double(double value);

/// Opens a file for writing, creating parent directories. Throws on failure.
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace sae
