#pragma once

// Declarative experiments: config parsing and the end-to-end run that writes
// the report directory.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "promine/cohort.hpp"
#include "promine/featsel.hpp"
#include "promine/learners.hpp"
#include "promine/preprocess.hpp"

namespace promine::runner {

inline constexpr const char* kVersion = "1.0.0";

enum class InputKind { synthetic, sessions, cohort };
enum class CohortFilter { all, new_only };

std::string_view to_string(CohortFilter f);

struct InputConfig {
  InputKind kind = InputKind::synthetic;
  cohort::CohortSpec synthetic = cohort::CohortSpec::defaults();
  bool synthetic_seed_set = false;  // otherwise the run seed drives generation
  std::filesystem::path sessions;   // sessions input
  std::filesystem::path clients;    // sessions input: demographics
  std::filesystem::path cohort;     // cohort input
};

struct ExperimentConfig {
  InputConfig input;
  std::vector<CohortFilter> filters = {CohortFilter::all};
  std::vector<preprocess::Binning> binnings = {preprocess::Binning::bin_target, preprocess::Binning::caim};
  featsel::Selector selector = featsel::Selector::nb_wrapper;
  featsel::WrapperOptions wrapper;
  std::vector<learners::ClassifierSpec> models;
  std::vector<std::string> features = cohort::default_features();
  std::size_t folds = 10;
  std::uint64_t seed = 42;
  std::filesystem::path output = "promine_out";
  bool save_models = true;
  std::size_t threads = 1;

  nlohmann::json to_json() const;
  // Relative input/output paths resolve against base_dir.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  // FNV-1a over the canonical JSON, ignoring output location and threads.
  std::string hash() const;
};

// Reads a JSON config (comments allowed). Throws ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunSummary {
  std::vector<std::filesystem::path> files;  // relative to the output directory
  std::size_t cohort_rows = 0;
};

// Full run: cohort, outcome reports, and per filter the cross-validated
// report, selection traces, odds ratios and (optionally) fitted pipelines.
RunSummary run_experiment(const ExperimentConfig& config);

// Cohort assembly plus descriptive and outcome reports only.
RunSummary describe(const ExperimentConfig& config);

// Loads or generates the cohort named by the config.
std::vector<cohort::CohortRow> load_cohort(const ExperimentConfig& config);

}  // namespace promine::runner
