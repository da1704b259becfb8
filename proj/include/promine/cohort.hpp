#pragma once

// Session-level data model, cohort assembly and the synthetic cohort generator.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "promine/dataset.hpp"

namespace promine::cohort {

enum class ServiceFlag : std::uint8_t { case_mgmt = 0, medical, therapy, ind_therapy, grp_therapy };
inline constexpr std::size_t kServiceFlagCount = 5;
inline constexpr std::array<const char*, kServiceFlagCount> kServiceFlagNames = {
    "case_mgmt", "medical", "therapy", "ind_therapy", "grp_therapy"};
// Cohort column for each service flag, same order as ServiceFlag.
inline constexpr std::array<const char*, kServiceFlagCount> kServiceFlagColumns = {
    "q_case_mgmt_bin", "q_medical_bin", "q_therapy_bin", "q_ind_therapy_bin", "q_grp_therapy_bin"};

inline constexpr double kItemMin = 0.0;
inline constexpr double kItemMax = 10.0;
inline constexpr double kScaleMax = 40.0;
inline constexpr int kMinAge = 14;
inline constexpr int kNewClientWindowDays = 90;
inline constexpr int kFinalWindowFirst = 5;
inline constexpr int kFinalWindowLast = 10;

struct SessionRecord {
  std::string client_id;
  int visit_index = 1;
  int days_from_baseline = 0;
  std::array<std::optional<double>, 4> ors_items;
  std::array<std::optional<double>, 4> srs_items;
  std::uint8_t service_flags = 0;  // bit i set = ServiceFlag(i) received

  bool has(ServiceFlag f) const { return service_flags & (1u << static_cast<unsigned>(f)); }
  void set(ServiceFlag f) { service_flags |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(f)); }

  // A total exists only when all four items are present.
  std::optional<double> ors_total() const;
  std::optional<double> srs_total() const;
};

// Demographics and prior-contact history for one client.
struct ClientProfile {
  std::string client_id;
  std::string gender;
  int age = 0;
  std::string diag_cat;
  std::string payor_grp;
  std::string county;
  std::string region_type;
  std::string state;
  // Days before the baseline CDOI of each earlier contact (positive = earlier).
  std::vector<int> prior_visit_days;
};

struct CohortRow {
  std::string client_id;
  double bl_ors = 0.0;
  std::optional<double> bl_srs;
  double third_delta_ors = 0.0;
  std::optional<double> third_delta_srs;
  std::string gender;
  std::string diag_cat;
  int age = 0;
  std::string payor_grp;
  std::string county;
  std::string region_type;
  std::array<int, kServiceFlagCount> service_bins{};
  std::string state;
  int is_new = 0;
  double final_ors = 0.0;
  double final_delta_ors = 0.0;
  int final_visit = 0;

  bool operator==(const CohortRow&) const = default;
};

struct Exclusion {
  std::string client_id;
  std::string reason;
};

// Builds one row per client meeting the inclusion rules: ORS at visit 1 and at
// visit 3, and at least one ORS among visits 5..10 (the latest is "final"),
// age >= 14. Rows are emitted in client_id order. Throws ValidationError
// naming client and visit for out-of-range item scores or broken visit order.
std::vector<CohortRow> assemble_cohort(std::span<const SessionRecord> sessions,
                                       std::span<const ClientProfile> profiles,
                                       std::vector<Exclusion>* excluded = nullptr);

// New iff no contact within the 90 days before baseline. Days are measured
// backwards from baseline, so 0 is the baseline day itself.
bool classify_new(std::span<const int> prior_visit_days);

// --- Synthetic cohorts --------------------------------------------------------

struct NumericFeatureSpec {
  std::string name;
  double mean = 0.0;
  double sd = 1.0;
  // Log-odds contribution of being above the column's sample median.
  double log_odds = 0.0;
};

struct LevelSpec {
  std::string name;
  double frequency = 0.0;
  double log_odds = 0.0;
};

struct CategoricalFeatureSpec {
  std::string name;
  std::vector<LevelSpec> levels;
};

struct FlagSpec {
  std::string name;
  double rate = 0.0;
  double log_odds = 0.0;
};

struct CohortSpec {
  std::size_t n = 714;
  // Target fraction of rows whose final delta lies above the cohort mean.
  double class_balance = 0.5;
  // Exact fraction of rows flagged is_new (rounded to a count).
  double new_fraction = 253.0 / 714.0;
  double new_log_odds = 0.0;
  // Scale of the logistic latent noise; planted log-odds are per unit scale.
  double noise_scale = 0.6;
  double mean_delta = 4.0;
  double delta_scale = 3.5;
  std::uint64_t seed = 42;
  // bl_ors, bl_srs, third_delta_ors, third_delta_srs, age.
  std::vector<NumericFeatureSpec> numeric;
  // gender, diag_cat, payor_grp, county, region_type, state.
  std::vector<CategoricalFeatureSpec> categorical;
  // q_*_bin service flags.
  std::vector<FlagSpec> flags;

  // Defaults: third_delta_ors and bl_ors as the dominant effects, the rest weak.
  static CohortSpec defaults();
  // Throws ValidationError on bad frequencies, rates or sizes.
  void validate() const;

  NumericFeatureSpec& numeric_feature(const std::string& name);
  const NumericFeatureSpec& numeric_feature(const std::string& name) const;
};

nlohmann::json to_json(const CohortSpec& spec);
// Missing keys take their defaults() values.
CohortSpec cohort_spec_from_json(const nlohmann::json& j);
CohortSpec load_cohort_spec(const std::filesystem::path& path);

std::vector<CohortRow> generate_synthetic(const CohortSpec& spec);

// --- Modeling table -------------------------------------------------------------

// Predictor columns of the cohort file, in file order.
const std::vector<std::string>& default_features();
bool is_categorical_feature(std::string_view name);

struct FeatureTable {
  Dataset data;  // target left all-zero; see preprocess::binarize_target
  std::vector<double> outcome;  // final_delta_ors per kept row
  std::vector<std::string> client_ids;
  std::size_t dropped_incomplete = 0;
};

// Turns cohort rows into a modeling table. Categorical levels are the sorted
// distinct strings. Rows with a missing value in a requested feature are dropped.
FeatureTable to_feature_table(std::span<const CohortRow> rows, const std::vector<std::string>& features);

// --- Files ----------------------------------------------------------------------

std::vector<SessionRecord> read_sessions(std::istream& in);
std::vector<SessionRecord> read_sessions_file(const std::filesystem::path& path);
void write_sessions(std::ostream& out, std::span<const SessionRecord> sessions);

// clients CSV: client_id,gender,age,diag_cat,payor_grp,county,region_type,state,prior_visit_days
std::vector<ClientProfile> read_profiles(std::istream& in);
std::vector<ClientProfile> read_profiles_file(const std::filesystem::path& path);
void write_profiles(std::ostream& out, std::span<const ClientProfile> profiles);

const std::vector<std::string>& cohort_csv_header();
void write_cohort(std::ostream& out, std::span<const CohortRow> rows);
std::vector<CohortRow> read_cohort(std::istream& in);
std::vector<CohortRow> read_cohort_file(const std::filesystem::path& path);

}  // namespace promine::cohort
