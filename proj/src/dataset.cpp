#include "promine/dataset.hpp"

#include <cmath>
#include <cstdio>

#include "promine/error.hpp"

namespace promine {

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::binned: return "binned";
  }
  return "numeric";
}

ColumnKind column_kind_from_string(std::string_view s) {
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "categorical") return ColumnKind::categorical;
  if (s == "binned") return ColumnKind::binned;
  throw ConfigError("unknown column kind '" + std::string(s) + "'");
}

std::optional<std::size_t> Dataset::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == name) return i;
  return std::nullopt;
}

const Column& Dataset::column(std::string_view name) const {
  if (auto i = find(name)) return columns[*i];
  throw SchemaError("dataset has no column '" + std::string(name) + "'");
}

std::vector<std::string> Dataset::names() const {
  std::vector<std::string> out;
  out.reserve(columns.size());
  for (const auto& c : columns) out.push_back(c.name);
  return out;
}

std::vector<double> Dataset::row(std::size_t r) const {
  std::vector<double> out(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) out[j] = columns[j].values[r];
  return out;
}

Dataset Dataset::take_rows(std::span<const std::size_t> idx) const {
  Dataset out;
  out.columns.reserve(columns.size());
  for (const auto& c : columns) {
    Column nc;
    nc.name = c.name;
    nc.kind = c.kind;
    nc.levels = c.levels;
    nc.cuts = c.cuts;
    nc.values.reserve(idx.size());
    for (auto i : idx) nc.values.push_back(c.values[i]);
    out.columns.push_back(std::move(nc));
  }
  out.target.reserve(idx.size());
  for (auto i : idx) out.target.push_back(target[i]);
  return out;
}

Dataset Dataset::take_columns(std::span<const std::size_t> idx) const {
  Dataset out;
  for (auto j : idx) out.columns.push_back(columns.at(j));
  out.target = target;
  return out;
}

Dataset Dataset::take_columns(const std::vector<std::string>& wanted) const {
  std::vector<std::size_t> idx;
  for (const auto& n : wanted) {
    auto j = find(n);
    if (!j) throw SchemaError("dataset has no column '" + n + "'");
    idx.push_back(*j);
  }
  return take_columns(idx);
}

std::size_t Dataset::positives() const {
  std::size_t n = 0;
  for (int y : target) n += y == 1;
  return n;
}

void Dataset::validate() const {
  for (int y : target)
    if (y != 0 && y != 1) throw ValidationError("target labels must be 0 or 1");
  for (const auto& c : columns) {
    if (c.values.size() != target.size())
      throw ValidationError("column '" + c.name + "' has " + std::to_string(c.values.size()) +
                            " values for " + std::to_string(target.size()) + " rows");
    for (double v : c.values) {
      if (std::isnan(v)) throw ValidationError("column '" + c.name + "' contains NaN");
      if (c.discrete() && v != kUnknownLevel &&
          (v < 0 || v >= static_cast<double>(c.levels.size()) || v != std::floor(v)))
        throw ValidationError("column '" + c.name + "' has an invalid level code");
    }
    for (std::size_t i = 1; i < c.cuts.size(); ++i)
      if (!(c.cuts[i] > c.cuts[i - 1]))
        throw ValidationError("column '" + c.name + "' cut points are not strictly increasing");
  }
}

Schema schema_of(const Dataset& data) {
  Schema s;
  s.reserve(data.cols());
  for (const auto& c : data.columns) s.push_back({c.name, c.kind, c.cardinality()});
  return s;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fingerprint(const Schema& schema) {
  std::string canon;
  for (const auto& f : schema) {
    canon += f.name;
    canon += ':';
    canon += to_string(f.kind);
    canon += ':';
    canon += std::to_string(f.cardinality);
    canon += ';';
  }
  return fnv1a(canon);
}

std::string fingerprint_hex(const Schema& schema) { return to_hex(fingerprint(schema)); }

}  // namespace promine
