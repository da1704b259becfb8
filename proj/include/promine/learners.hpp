#pragma once

// Classifier zoo behind one probabilistic-prediction contract, plus the
// forward-selection ensemble and the max-probability vote.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "promine/dataset.hpp"

namespace promine::learners {

enum class Algorithm {
  naive_bayes,
  aode,
  logistic,
  linreg_classifier,
  knn,
  c45_tree,
  random_forest,
  mlp,
  ensemble,
  vote,
};

std::string_view to_string(Algorithm a);
// Throws NotImplementedError for recognised out-of-scope learners (hnb, lbr,
// bayesnet_k2, bayesnet_tan) and ConfigError listing valid names otherwise.
Algorithm algorithm_from_string(std::string_view name);
const std::vector<std::string>& algorithm_names();

struct NaiveBayesParams {
  double alpha = 1.0;  // Laplace pseudo-count for counts-based likelihoods
  double min_sd = 1e-6;
};

struct AodeParams {
  double alpha = 1.0;
  std::size_t frequency_limit = 1;  // minimum parent-value count to act as a super-parent
};

struct LogisticParams {
  double ridge = 1e-8;
  std::size_t max_iterations = 100;
};

struct LinRegParams {
  double ridge = 1e-8;
};

struct KnnParams {
  std::size_t k = 3;
};

struct TreeParams {
  bool prune = true;
  double confidence = 0.25;
  std::size_t min_leaf = 2;
  std::size_t max_depth = 0;  // 0 = unlimited
};

struct ForestParams {
  std::size_t trees = 30;
  std::size_t features_per_split = 0;  // 0 = ceil(log2(M) + 1)
  std::size_t min_leaf = 1;
};

struct MlpParams {
  std::size_t hidden = 0;  // 0 = ceil((features + classes) / 2)
  double learning_rate = 0.3;
  double momentum = 0.2;
  std::size_t epochs = 500;
  double weight_decay = 1e-4;        // L2 coefficient on connection weights; 0 turns it off
  bool learning_rate_decay = false;  // divide the rate by the epoch number
};

struct EnsembleParams {
  std::vector<std::string> library = {"naive_bayes", "mlp", "random_forest", "knn", "logistic"};
  std::size_t inner_folds = 5;
  std::size_t max_steps = 25;
};

struct VoteParams {
  std::vector<std::string> members = {"naive_bayes", "mlp", "random_forest", "knn", "logistic"};
};

using Hyperparameters = std::variant<NaiveBayesParams, AodeParams, LogisticParams, LinRegParams, KnnParams,
                                     TreeParams, ForestParams, MlpParams, EnsembleParams, VoteParams>;

struct ClassifierSpec {
  Algorithm algorithm = Algorithm::naive_bayes;
  Hyperparameters params = NaiveBayesParams{};
  std::uint64_t seed = 1;

  // Defaults for the algorithm, overridden by any keys present in `overrides`.
  static ClassifierSpec make(std::string_view name, const nlohmann::json& overrides = nlohmann::json::object(),
                             std::uint64_t seed = 1);
  static ClassifierSpec make(Algorithm a, std::uint64_t seed = 1);

  nlohmann::json to_json() const;
  static ClassifierSpec from_json(const nlohmann::json& j);

  bool operator==(const ClassifierSpec& other) const;
};

// (P(class 0), P(class 1)).
using Distribution = std::array<double, 2>;

// Argmax with ties going to the negative class (counted as "prediction_tie").
int predicted_class(const Distribution& d);

class Classifier {
 public:
  virtual ~Classifier() = default;

  // Validates the row against the training schema, then predicts.
  Distribution predict_proba(std::span<const double> row) const;
  std::vector<double> positive_scores(const Dataset& data) const;

  const ClassifierSpec& spec() const { return spec_; }
  const Schema& schema() const { return schema_; }
  std::string fingerprint() const { return fingerprint_hex(schema_); }

  // Fitted parameters in the model document's "fitted" field.
  virtual nlohmann::json fitted_json() const = 0;

 protected:
  Classifier(ClassifierSpec spec, Schema schema) : spec_(std::move(spec)), schema_(std::move(schema)) {}
  virtual Distribution proba(std::span<const double> row) const = 0;

 private:
  ClassifierSpec spec_;
  Schema schema_;
};

using ClassifierPtr = std::shared_ptr<const Classifier>;

// Fits a model. A training set with a single class yields a prior-only model.
ClassifierPtr train(const ClassifierSpec& spec, const Dataset& data);

// Shorthand for predict_proba.
Distribution predict_proba(const Classifier& model, std::span<const double> row);

nlohmann::json model_to_json(const Classifier& model);
ClassifierPtr model_from_json(const nlohmann::json& doc);

// --- Meta-models ------------------------------------------------------------------

struct EnsembleStep {
  std::size_t step = 0;
  std::size_t model = 0;
  double auc = 0.0;
};

struct EnsembleSelection {
  std::vector<std::size_t> multiplicity;  // times each library model was picked
  std::vector<EnsembleStep> trace;
  double auc = 0.0;
};

// Greedy forward selection with replacement: each step adds the library model
// whose inclusion maximises the AUC of the averaged positive-class scores.
// Stops at max_steps or at the first step without improvement.
EnsembleSelection ensemble_select(const std::vector<std::vector<double>>& library_scores,
                                  std::span<const int> labels, std::size_t max_steps = 25);

// Max-probability committee decision; ties go to the negative class.
int vote_predict(std::span<const ClassifierPtr> models, std::span<const double> row);

// Stratified assignment of rows to k folds, reproducible from the seed.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed);

}  // namespace promine::learners
