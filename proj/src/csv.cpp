#include "promine/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "promine/error.hpp"

namespace promine::csv {

std::optional<std::size_t> Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

std::size_t Table::require(std::string_view name) const {
  if (auto i = column(name)) return *i;
  throw ValidationError("csv: missing required column '" + std::string(name) + "'");
}

Table read(std::istream& in) {
  Table table;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool have_any = false;
  bool first = true;

  auto finish_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    const bool blank = record.size() == 1 && record[0].empty();
    if (!blank) {
      if (first) {
        table.header = std::move(record);
        first = false;
      } else {
        if (record.size() != table.header.size())
          throw ValidationError("csv: row " + std::to_string(table.rows.size() + 1) + " has " +
                                std::to_string(record.size()) + " fields, header has " +
                                std::to_string(table.header.size()));
        table.rows.push_back(std::move(record));
      }
    }
    record.clear();
    have_any = false;
  };

  char ch;
  while (in.get(ch)) {
    have_any = true;
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        in_quotes = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        break;
      case '\r':
        break;
      case '\n':
        finish_record();
        break;
      default:
        field.push_back(ch);
    }
  }
  if (in_quotes) throw ValidationError("csv: unterminated quoted field");
  if (have_any || !record.empty()) finish_record();
  return table;
}

Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("csv: cannot open '" + path.string() + "'");
  return read(in);
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

std::string fixed(double x, int decimals) {
  if (std::isnan(x)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  // Avoid "-0.000" from tiny negatives.
  std::string s = buf;
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string exact(double x) {
  if (std::isnan(x)) return "NA";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_optional_double(std::string_view cell, std::string_view what) {
  while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
  while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
  if (cell.empty()) return std::nullopt;
  double v = 0.0;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    throw ValidationError("invalid number '" + std::string(cell) + "' for " + std::string(what));
  return v;
}

double parse_double(std::string_view cell, std::string_view what) {
  auto v = parse_optional_double(cell, what);
  if (!v) throw ValidationError("missing value for " + std::string(what));
  return *v;
}

long parse_long(std::string_view cell, std::string_view what) {
  const double v = parse_double(cell, what);
  if (v != std::floor(v)) throw ValidationError("expected an integer for " + std::string(what));
  return static_cast<long>(v);
}

}  // namespace promine::csv
