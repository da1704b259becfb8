#pragma once

// Column transformations: z-scores, mean-split target, CAIM discretization and
// the zero-variance filter. Everything is fit on training rows and then
// applied; apply never looks at statistics of the data it transforms.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "promine/dataset.hpp"
#include "promine/error.hpp"

namespace promine::preprocess {

class ConstantColumnError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct ZScore {
  double mean = 0.0;
  double sd = 1.0;  // sample (n-1) standard deviation
};

// Throws ConstantColumnError when the training column has zero spread.
ZScore zscore_fit(std::span<const double> train);
std::vector<double> zscore_apply(const ZScore& z, std::span<const double> values);

struct ZScoreResult {
  std::vector<double> values;
  ZScore stats;
};
ZScoreResult zscore_fit_apply(std::span<const double> train, std::span<const double> apply);

struct BinaryTarget {
  double threshold = 0.0;   // arithmetic mean of the fitted deltas
  bool degenerate = false;  // every label fell on one side
};

struct TargetResult {
  BinaryTarget target;
  std::vector<int> labels;  // 1 iff delta > threshold
};

TargetResult binarize_target(std::span<const double> deltas);
std::vector<int> apply_target(const BinaryTarget& t, std::span<const double> deltas);

// --- CAIM -------------------------------------------------------------------------

struct CaimStep {
  double cut = 0.0;
  double criterion = 0.0;
};

struct CaimResult {
  std::vector<double> cuts;  // ascending
  double criterion = 0.0;
  std::vector<CaimStep> trace;  // accepted insertions in order
};

// Midpoints between consecutive distinct values, skipping a gap whose two
// sides are pure in the same single class.
std::vector<double> caim_candidates(std::span<const double> values, std::span<const int> labels);

// (1/n) * sum over intervals of max_class_count^2 / interval_count.
double caim_criterion(std::span<const double> values, std::span<const int> labels,
                      std::span<const double> cuts);

// Greedy boundary insertion. Throws ConstantColumnError for a constant column
// and ValidationError when fewer than two classes are present.
CaimResult caim_discretize(std::span<const double> values, std::span<const int> labels);

// Interval index of x: the number of cuts strictly below x, so a value equal
// to a cut falls in the lower interval.
std::size_t bin_index(std::span<const double> cuts, double x);
std::vector<std::string> interval_labels(std::span<const double> cuts, int decimals = 2);

// --- Variance filter --------------------------------------------------------------

std::vector<std::string> constant_columns(const Dataset& data);

struct VarianceFilterResult {
  Dataset data;
  std::vector<std::string> removed;
};

VarianceFilterResult variance_filter(const Dataset& data);

// --- Fitted preprocessor ----------------------------------------------------------

enum class Binning { bin_target, caim };

std::string_view to_string(Binning b);
Binning binning_from_string(std::string_view s);

struct ColumnTransform {
  std::string name;
  ColumnKind source_kind = ColumnKind::numeric;
  std::vector<std::string> levels;  // categorical source levels
  std::optional<ZScore> zscore;     // numeric sources
  std::vector<double> cuts;         // CAIM cuts in z units (binned output)
  std::vector<std::string> bin_labels;

  ColumnKind output_kind() const;
};

class FittedPreprocessor {
 public:
  Binning binning = Binning::bin_target;
  std::vector<std::string> removed;
  std::vector<ColumnTransform> columns;

  // Input must carry every kept column by name; categorical levels are matched
  // by string. Unseen levels become kUnknownLevel.
  Dataset apply(const Dataset& raw) const;
  Schema output_schema() const;
  std::vector<std::string> input_columns() const;

  nlohmann::json to_json() const;
  static FittedPreprocessor from_json(const nlohmann::json& j);
};

// Variance filter, then z-score numeric columns, then (CAIM mode) discretize
// them against the training labels. Categorical columns pass through.
FittedPreprocessor fit_preprocessor(const Dataset& train, Binning binning);

}  // namespace promine::preprocess
