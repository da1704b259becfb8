#pragma once

// Pipelines (preprocess -> select -> model), stratified k-fold evaluation on
// pooled out-of-fold predictions, and per-model accuracy/AUC/H reports.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "promine/dataset.hpp"
#include "promine/featsel.hpp"
#include "promine/learners.hpp"
#include "promine/preprocess.hpp"

namespace promine::eval {

struct PipelineSpec {
  learners::ClassifierSpec model;
  preprocess::Binning binning = preprocess::Binning::bin_target;
  featsel::Selector selector = featsel::Selector::nb_wrapper;
  featsel::WrapperOptions wrapper;  // seed is overridden per fit

  // "<algorithm>:<binning>", e.g. "naive_bayes:CAIM".
  std::string name() const;
};

// Everything fitted on one training partition.
class FittedPipeline {
 public:
  std::string name;
  preprocess::FittedPreprocessor preprocessor;
  std::vector<std::string> selected;
  featsel::WrapperResult selection;
  learners::ClassifierPtr model;

  // Raw rows (cohort feature columns) -> model input.
  Dataset transform(const Dataset& raw) const;
  std::vector<learners::Distribution> predict(const Dataset& raw) const;
  // Raw input columns the pipeline reads.
  std::vector<std::string> input_columns() const { return preprocessor.input_columns(); }

  nlohmann::json to_json() const;
  static FittedPipeline from_json(const nlohmann::json& j);
};

FittedPipeline fit_pipeline(const PipelineSpec& spec, const Dataset& train, std::uint64_t seed);

struct FoldPlan {
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  std::vector<std::size_t> assignment;  // fold index per row

  std::vector<std::size_t> test_rows(std::size_t f) const;
  std::vector<std::size_t> train_rows(std::size_t f) const;
};

FoldPlan make_fold_plan(std::span<const int> labels, std::size_t folds, std::uint64_t seed);

struct EvalRow {
  std::string model;
  std::string binning;
  double accuracy = 0.0;
  double auc = 0.5;
  double tp_rate = 0.0;
  double fp_rate = 0.0;
  double h = 0.0;
  std::size_t n = 0;  // pooled held-out rows
};

struct FoldDetail {
  std::size_t fold = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  bool degenerate = false;
  std::vector<std::string> selected;
  std::vector<featsel::WrapperStep> trace;
};

struct CvResult {
  EvalRow row;
  std::vector<FoldDetail> folds;
  FoldPlan plan;
  std::vector<double> scores;  // pooled P(class 1); NaN for rows of excluded folds
  std::vector<int> labels;
};

// Fits the whole pipeline inside every training fold and pools held-out
// predictions. Folds whose training part has one class are excluded with a
// warning. `threads` > 1 evaluates folds concurrently with identical results.
CvResult cross_validate(const PipelineSpec& spec, const Dataset& data, std::uint64_t seed, std::size_t folds = 10,
                        std::size_t threads = 1);

struct EvalReport {
  std::vector<EvalRow> rows;
  std::size_t folds = 10;  // for the report header

  void sort_by_auc();  // descending, stable
  std::string text() const;
  std::string csv() const;
  nlohmann::json to_json() const;
};

std::string wrapper_trace_csv(const std::string& pipeline, const std::vector<FoldDetail>& folds);

}  // namespace promine::eval
