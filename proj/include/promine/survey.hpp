#pragma once

// Clinician-survey statistics: TPB composites, Spearman correlation matrices,
// OLS with the overall F test, Welch's t-test and one-way ANOVA.
//
// Missing values are NaN throughout; correlations use pairwise-complete rows.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace promine::survey {

inline constexpr std::size_t kItems = 10;
inline constexpr double kLikertMin = 1.0;
inline constexpr double kLikertMax = 4.0;

// 1-based item numbers of the negatively worded items.
inline constexpr std::array<std::size_t, 2> kReverseKeyed = {3, 7};

struct SurveyResponse {
  std::string clinician_id;
  std::array<std::optional<double>, kItems> items;
  double years_exp = NAN;
  double age = NAN;
  std::string gender;
  double adoption_rate = NAN;  // 0..1
  double bl_ors = NAN;
  double bl_srs = NAN;
  double final_delta_ors = NAN;
};

// Columns: clinician_id,q1..q10,years_exp,age,gender,adoption_rate and
// optionally bl_ors,bl_srs,final_delta_ors. Empty cells are missing.
std::vector<SurveyResponse> read_survey(std::istream& in);
std::vector<SurveyResponse> read_survey_file(const std::filesystem::path& path);
void write_survey(std::ostream& out, std::span<const SurveyResponse> rows);

// Synthetic responses with intent driven by normative beliefs and perceived
// utility; for demos and tests.
std::vector<SurveyResponse> generate_survey(std::size_t n, std::uint64_t seed);

struct TpbScores {
  std::string clinician_id;
  double pu = NAN;      // items 1-3
  double nb = NAN;      // items 4-6
  double cb = NAN;      // items 7-9
  double intent = NAN;  // item 10
};

// Composite = mean of the component's items after reverse-keying (5 - score)
// when enabled. A component with a missing item is NaN for that clinician.
std::vector<TpbScores> tpb_scores(std::span<const SurveyResponse> rows, bool reverse_key = true);

struct Correlation {
  std::optional<double> rho;  // empty when a variable is constant
  std::optional<double> p;
  std::size_t n = 0;
};

// Average-rank Spearman rho with a t-approximation two-sided p-value.
// Throws ValidationError when fewer than 3 complete pairs remain.
Correlation spearman(std::span<const double> x, std::span<const double> y);

// Ranks with ties sharing the average rank (1-based).
std::vector<double> average_ranks(std::span<const double> v);

struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<Correlation>> cells;

  // Lower-triangular Correlation / Sig. (2-tailed) / N block per variable, with
  // * for p < .05 and ** for p < .01.
  std::string text() const;
  std::string csv() const;
};

CorrelationMatrix correlation_matrix(const std::vector<std::string>& names,
                                     const std::vector<std::vector<double>>& columns);

struct OlsResult {
  std::vector<std::string> names;   // "(intercept)" first
  std::vector<double> coefficients;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  double f = 0.0;
  double df_model = 0.0;
  double df_resid = 0.0;
  double p = 1.0;
  std::vector<double> residuals;
};

// Least squares with intercept. Throws ValidationError when n <= k + 1 or
// when the design is rank deficient (naming the collinear columns).
OlsResult ols_regression(std::span<const double> y, const std::vector<std::vector<double>>& columns,
                         const std::vector<std::string>& names = {});

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

// Welch's unequal-variance t-test.
TTestResult t_test_two_sample(std::span<const double> a, std::span<const double> b);

struct AnovaResult {
  double f = 0.0;
  double df_between = 0.0;
  double df_within = 0.0;
  double p = 1.0;
};

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups);

// Correlation matrix plus the intent and adoption regressions.
std::string survey_report(std::span<const SurveyResponse> rows, bool reverse_key = true);

}  // namespace promine::survey
