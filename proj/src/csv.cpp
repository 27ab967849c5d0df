#include "layerscope/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "layerscope/errors.hpp"
#include "layerscope/io_util.hpp"

namespace layerscope {
namespace {

std::string quote(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ConfigError("CSV has no column '" + name + "'");
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header.size())
    throw ShapeError("CSV row has " + std::to_string(row.size()) +
                     " cells, header has " + std::to_string(header.size()));
  rows.push_back(std::move(row));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_optional(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string{};
}

void write_csv(std::ostream& out, const CsvTable& table) {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << quote(cells[i]);
    }
    out << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  write_file_atomic(path, [&](std::ostream& out) { write_csv(out, table); });
}

CsvTable parse_csv(std::istream& in) {
  CsvTable table;
  std::vector<std::string> row;
  std::string cell;
  bool in_quotes = false;
  bool any = false;
  std::size_t line = 1;

  auto end_row = [&] {
    row.push_back(std::move(cell));
    cell.clear();
    if (table.header.empty()) {
      table.header = std::move(row);
    } else {
      if (row.size() != table.header.size())
        throw ParseError(line, "expected " + std::to_string(table.header.size()) +
                                   " cells, found " + std::to_string(row.size()));
      table.rows.push_back(std::move(row));
    }
    row.clear();
    any = false;
  };

  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          cell += '"';
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        cell += c;
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell.clear();
      any = true;
    } else if (c == '\r') {
      continue;
    } else if (c == '\n') {
      if (any || !cell.empty()) end_row();
      ++line;
    } else {
      cell += c;
      any = true;
    }
  }
  if (in_quotes) throw ParseError(line, "unterminated quoted cell");
  if (any || !cell.empty()) end_row();
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::kIo, "cannot open " + path.string());
  return parse_csv(in);
}

}  // namespace layerscope
