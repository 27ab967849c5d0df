#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace layerscope {

/// Header plus string cells; every row has the header's width.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws ConfigError if absent.
  std::size_t column(const std::string& name) const;
  void add_row(std::vector<std::string> row);
};

/// Shortest decimal text that round-trips the value.
std::string format_number(double v);
std::string format_optional(const std::optional<double>& v);

void write_csv(std::ostream& out, const CsvTable& table);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// RFC 4180 quoting; throws ParseError on ragged rows or bad quotes.
CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace layerscope
