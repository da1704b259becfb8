#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace promine {

enum class ColumnKind { numeric, categorical, binned };

std::string_view to_string(ColumnKind kind);
ColumnKind column_kind_from_string(std::string_view s);

// Discrete cells hold a level/bin code as a double; this code marks a level
// that was not seen when the column was fitted.
inline constexpr double kUnknownLevel = -1.0;

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::vector<double> values;
  // Level names (categorical) or interval labels (binned).
  std::vector<std::string> levels;
  // Binned only: strictly increasing cut points, intervals are (c[i-1], c[i]].
  std::vector<double> cuts;

  bool discrete() const { return kind != ColumnKind::numeric; }
  std::size_t cardinality() const { return discrete() ? levels.size() : 0; }
};

// Column-major table with a binary target (0 = at/below mean, 1 = above).
class Dataset {
 public:
  std::vector<Column> columns;
  std::vector<int> target;

  std::size_t rows() const { return target.size(); }
  std::size_t cols() const { return columns.size(); }

  std::optional<std::size_t> find(std::string_view name) const;
  const Column& column(std::string_view name) const;
  std::vector<std::string> names() const;

  std::vector<double> row(std::size_t r) const;
  Dataset take_rows(std::span<const std::size_t> idx) const;
  Dataset take_columns(std::span<const std::size_t> idx) const;
  Dataset take_columns(const std::vector<std::string>& names) const;

  std::size_t positives() const;
  // Throws ValidationError on ragged columns, NaN cells, bad codes or labels.
  void validate() const;
};

struct FeatureInfo {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::size_t cardinality = 0;

  bool operator==(const FeatureInfo&) const = default;
};

using Schema = std::vector<FeatureInfo>;

Schema schema_of(const Dataset& data);
std::uint64_t fingerprint(const Schema& schema);
std::string fingerprint_hex(const Schema& schema);

// FNV-1a over arbitrary bytes; shared by manifest and schema hashing.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 1469598103934665603ULL);
std::string to_hex(std::uint64_t v);

}  // namespace promine
