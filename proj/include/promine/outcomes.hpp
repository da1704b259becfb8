#pragma once

// Reliable change, clinical significance, descriptives and the equal-expectation
// chi-square test, plus their text/CSV report layouts.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "promine/cohort.hpp"

namespace promine::outcomes {

inline constexpr double kReliableChangeThreshold = 4.0;
inline constexpr double kClinicalCutoff = 25.0;

// Numeric codes follow the report convention 1/2/3.
enum class ReliableChange { deteriorate = 1, no_change = 2, improve = 3 };

std::string_view to_string(ReliableChange rc);

// delta < -4 deteriorate, |delta| <= 4 no change, delta > 4 improve.
ReliableChange reliable_change(double delta);

// nullopt when baseline is above the cutoff (not in the clinical range);
// otherwise true iff the final score exceeds the cutoff.
std::optional<bool> clinical_significance(double bl_ors, double final_ors);

struct ChiSquareResult {
  double chi2 = 0.0;
  int df = 0;
  double p = 1.0;
};

ChiSquareResult chi_square_equal_expectation(std::span<const double> counts);

struct Descriptives {
  std::size_t n = 0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double sd = 0.0;  // n-1 denominator; NaN when n < 2
};

Descriptives describe(std::span<const double> values);

// Reliable change (rows: deteriorate, no change, improve) by clinical
// significance (cols: 0, 1).
struct CrosstabPanel {
  std::array<std::array<std::size_t, 2>, 3> counts{};

  std::size_t total() const;
  std::size_t row_total(std::size_t r) const;
  std::size_t col_total(std::size_t c) const;
  // Percent of the panel total; 0 for an empty panel.
  double pct(std::size_t count) const;
};

struct OutcomeCrosstab {
  CrosstabPanel old_clients;
  CrosstabPanel new_clients;
};

// Only rows with baseline ORS <= 25 contribute.
OutcomeCrosstab crosstab(std::span<const cohort::CohortRow> rows);

// Reliable-change category counts over all rows (no baseline filter).
std::array<std::size_t, 3> reliable_change_counts(std::span<const cohort::CohortRow> rows);

// "0.0123", or "<0.0005" below the reporting floor.
std::string format_p(double p);

// Descriptives of bl_ors / final_ors / final_delta_ors grouped by state and
// by new/old, in a descriptives-table layout (N, min, max, mean, Std. Dev.).
std::string descriptives_text(std::span<const cohort::CohortRow> rows);
std::string descriptives_csv(std::span<const cohort::CohortRow> rows);

std::string crosstab_text(const OutcomeCrosstab& table);
std::string crosstab_csv(const OutcomeCrosstab& table);

// Reliable-change counts and the chi-square test for all clients.
std::string reliable_change_text(std::span<const cohort::CohortRow> rows);

}  // namespace promine::outcomes
