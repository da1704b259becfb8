#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace promine::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
  // Index of a header column; throws ValidationError naming the column.
  std::size_t require(std::string_view name) const;
};

// RFC-4180-ish reader: quoted fields, doubled quotes, CRLF tolerant.
Table read(std::istream& in);
Table read_file(const std::filesystem::path& path);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Fixed-point formatting with a set number of decimals ("%.*f").
std::string fixed(double x, int decimals);
// Shortest text that round-trips the double exactly.
std::string exact(double x);

// Parses a double; empty -> nullopt; garbage -> ValidationError naming `what`.
std::optional<double> parse_optional_double(std::string_view cell, std::string_view what);
double parse_double(std::string_view cell, std::string_view what);
long parse_long(std::string_view cell, std::string_view what);

}  // namespace promine::csv
