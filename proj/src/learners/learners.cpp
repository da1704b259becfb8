#include <algorithm>
#include <array>
#include <cmath>

#include "internal.hpp"
#include "promine/log.hpp"

namespace promine::learners {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(NaiveBayesParams, alpha, min_sd)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(AodeParams, alpha, frequency_limit)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LogisticParams, ridge, max_iterations)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LinRegParams, ridge)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(KnnParams, k)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TreeParams, prune, confidence, min_leaf, max_depth)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ForestParams, trees, features_per_split, min_leaf)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(MlpParams, hidden, learning_rate, momentum, epochs, weight_decay,
                                   learning_rate_decay)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EnsembleParams, library, inner_folds, max_steps)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(VoteParams, members)

namespace {

using detail::json;

constexpr std::array<std::string_view, 10> kNames = {
    "naive_bayes", "aode", "logistic", "linreg_classifier", "knn",
    "c45_tree",    "random_forest", "mlp", "ensemble",      "vote",
};

constexpr std::array<std::string_view, 4> kOutOfScope = {"hnb", "lbr", "bayesnet_k2", "bayesnet_tan"};

constexpr const char* kModelSchema = "promine.model";
constexpr int kModelVersion = 1;

Hyperparameters default_params(Algorithm a) {
  switch (a) {
    case Algorithm::naive_bayes: return NaiveBayesParams{};
    case Algorithm::aode: return AodeParams{};
    case Algorithm::logistic: return LogisticParams{};
    case Algorithm::linreg_classifier: return LinRegParams{};
    case Algorithm::knn: return KnnParams{};
    case Algorithm::c45_tree: return TreeParams{};
    case Algorithm::random_forest: return ForestParams{};
    case Algorithm::mlp: return MlpParams{};
    case Algorithm::ensemble: return EnsembleParams{};
    case Algorithm::vote: return VoteParams{};
  }
  throw ConfigError("unknown algorithm");
}

json params_to_json(const Hyperparameters& h) {
  return std::visit([](const auto& p) { return json(p); }, h);
}

Hyperparameters params_from_json(Algorithm a, const json& overrides) {
  if (!overrides.is_object()) throw ConfigError("hyperparameters must be a JSON object");
  json merged = params_to_json(default_params(a));
  for (const auto& [key, value] : overrides.items()) {
    if (!merged.contains(key)) {
      std::string valid;
      for (const auto& [k, _] : merged.items()) valid += (valid.empty() ? "" : ", ") + k;
      throw ConfigError("unknown hyperparameter '" + key + "' for " + std::string(to_string(a)) +
                        " (valid: " + valid + ")");
    }
    merged[key] = value;
  }
  try {
    Hyperparameters h = default_params(a);
    std::visit([&](auto& p) { merged.get_to(p); }, h);
    return h;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad hyperparameter value for ") + std::string(to_string(a)) + ": " + e.what());
  }
}

void check_params(const ClassifierSpec& s) {
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, NaiveBayesParams> || std::is_same_v<P, AodeParams>) {
          if (!(p.alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
        } else if constexpr (std::is_same_v<P, KnnParams>) {
          if (p.k == 0) throw ConfigError("knn: k must be >= 1");
        } else if constexpr (std::is_same_v<P, TreeParams>) {
          if (!(p.confidence > 0.0 && p.confidence <= 0.5)) throw ConfigError("c45_tree: confidence must lie in (0, 0.5]");
          if (p.min_leaf == 0) throw ConfigError("c45_tree: min_leaf must be >= 1");
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          if (p.trees == 0) throw ConfigError("random_forest: trees must be >= 1");
          if (p.min_leaf == 0) throw ConfigError("random_forest: min_leaf must be >= 1");
        } else if constexpr (std::is_same_v<P, MlpParams>) {
          if (!(p.learning_rate > 0.0)) throw ConfigError("mlp: learning_rate must be > 0");
          if (!(p.momentum >= 0.0 && p.momentum < 1.0)) throw ConfigError("mlp: momentum must lie in [0, 1)");
          if (!(p.weight_decay >= 0.0)) throw ConfigError("mlp: weight_decay must be >= 0");
        } else if constexpr (std::is_same_v<P, EnsembleParams>) {
          if (p.library.empty()) throw ConfigError("ensemble: library is empty");
          if (p.inner_folds < 2) throw ConfigError("ensemble: inner_folds must be >= 2");
          for (const auto& m : p.library) {
            const auto a = algorithm_from_string(m);
            if (a == Algorithm::ensemble || a == Algorithm::vote)
              throw ConfigError("ensemble: library members must be base learners");
          }
        } else if constexpr (std::is_same_v<P, VoteParams>) {
          if (p.members.empty()) throw ConfigError("vote: no members");
          for (const auto& m : p.members) {
            const auto a = algorithm_from_string(m);
            if (a == Algorithm::ensemble || a == Algorithm::vote)
              throw ConfigError("vote: members must be base learners");
          }
        }
      },
      s.params);
}

// Class frequencies of a training set without features to learn from.
class PriorModel final : public Classifier {
 public:
  PriorModel(ClassifierSpec spec, Schema schema, Distribution prior)
      : Classifier(std::move(spec), std::move(schema)), prior_(prior) {}

  json fitted_json() const override { return {{"prior_only", true}, {"prior", {prior_[0], prior_[1]}}}; }

 protected:
  Distribution proba(std::span<const double>) const override { return prior_; }

 private:
  Distribution prior_;
};

}  // namespace

std::string_view to_string(Algorithm a) { return kNames.at(static_cast<std::size_t>(a)); }

const std::vector<std::string>& algorithm_names() {
  static const std::vector<std::string> names(kNames.begin(), kNames.end());
  return names;
}

Algorithm algorithm_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<Algorithm>(i);
  for (auto o : kOutOfScope)
    if (o == name)
      throw NotImplementedError("learner '" + std::string(name) + "' is not implemented (out of scope)");
  std::string valid;
  for (auto n : kNames) valid += (valid.empty() ? "" : ", ") + std::string(n);
  throw ConfigError("unknown model '" + std::string(name) + "' (valid: " + valid + ")");
}

ClassifierSpec ClassifierSpec::make(std::string_view name, const json& overrides, std::uint64_t seed) {
  ClassifierSpec s;
  s.algorithm = algorithm_from_string(name);
  s.params = params_from_json(s.algorithm, overrides.is_null() ? json::object() : overrides);
  s.seed = seed;
  check_params(s);
  return s;
}

ClassifierSpec ClassifierSpec::make(Algorithm a, std::uint64_t seed) {
  ClassifierSpec s;
  s.algorithm = a;
  s.params = default_params(a);
  s.seed = seed;
  return s;
}

json ClassifierSpec::to_json() const {
  return {{"algorithm", std::string(to_string(algorithm))}, {"hyperparameters", params_to_json(params)}, {"seed", seed}};
}

ClassifierSpec ClassifierSpec::from_json(const json& j) {
  if (!j.is_object() || !j.contains("algorithm")) throw ConfigError("classifier spec needs an 'algorithm'");
  for (const auto& [key, _] : j.items())
    if (key != "algorithm" && key != "hyperparameters" && key != "seed")
      throw ConfigError("unknown classifier spec key '" + key + "'");
  try {
    return make(j.at("algorithm").get<std::string>(), j.value("hyperparameters", json::object()),
                j.value("seed", std::uint64_t{1}));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad classifier spec: ") + e.what());
  }
}

bool ClassifierSpec::operator==(const ClassifierSpec& other) const { return to_json() == other.to_json(); }

int predicted_class(const Distribution& d) {
  if (d[1] > d[0]) return 1;
  if (d[1] == d[0]) log::count_event("prediction_tie");
  return 0;
}

Distribution Classifier::predict_proba(std::span<const double> row) const {
  if (row.size() != schema_.size())
    throw SchemaError("row has " + std::to_string(row.size()) + " values; model expects " +
                      std::to_string(schema_.size()));
  for (std::size_t i = 0; i < row.size(); ++i) {
    const double v = row[i];
    if (!std::isfinite(v)) throw ValidationError("feature '" + schema_[i].name + "' is not a finite number");
    if (schema_[i].kind != ColumnKind::numeric) {
      if (v != std::floor(v) || v < kUnknownLevel || v >= static_cast<double>(schema_[i].cardinality))
        throw SchemaError("feature '" + schema_[i].name + "' has invalid level code");
    }
  }
  return proba(row);
}

std::vector<double> Classifier::positive_scores(const Dataset& data) const {
  if (schema_of(data) != schema_) throw SchemaError("dataset schema does not match the model's training schema");
  std::vector<double> out(data.rows());
  std::vector<double> row(data.cols());
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t c = 0; c < data.cols(); ++c) row[c] = data.columns[c].values[r];
    out[r] = predict_proba(row)[1];
  }
  return out;
}

Distribution predict_proba(const Classifier& model, std::span<const double> row) { return model.predict_proba(row); }

ClassifierPtr train(const ClassifierSpec& spec, const Dataset& data) {
  check_params(spec);
  data.validate();
  if (data.rows() == 0) throw ValidationError("train: dataset is empty");
  const std::size_t pos = data.positives();
  if (pos == 0 || pos == data.rows() || data.cols() == 0) {
    const double p1 = static_cast<double>(pos) / static_cast<double>(data.rows());
    return std::make_shared<PriorModel>(spec, schema_of(data), Distribution{1.0 - p1, p1});
  }
  switch (spec.algorithm) {
    case Algorithm::naive_bayes: return detail::fit_naive_bayes(spec, data);
    case Algorithm::aode: return detail::fit_aode(spec, data);
    case Algorithm::logistic: return detail::fit_logistic(spec, data);
    case Algorithm::linreg_classifier: return detail::fit_linreg(spec, data);
    case Algorithm::knn: return detail::fit_knn(spec, data);
    case Algorithm::c45_tree: return detail::fit_c45(spec, data);
    case Algorithm::random_forest: return detail::fit_forest(spec, data);
    case Algorithm::mlp: return detail::fit_mlp(spec, data);
    case Algorithm::ensemble: return detail::fit_ensemble(spec, data);
    case Algorithm::vote: return detail::fit_vote(spec, data);
  }
  throw ConfigError("unknown algorithm");
}

json model_to_json(const Classifier& model) {
  json features = json::array();
  for (const auto& f : model.schema())
    features.push_back({{"name", f.name}, {"kind", std::string(to_string(f.kind))}, {"cardinality", f.cardinality}});
  return {{"schema", kModelSchema},     {"version", kModelVersion},        {"spec", model.spec().to_json()},
          {"features", features},       {"fingerprint", model.fingerprint()}, {"fitted", model.fitted_json()}};
}

ClassifierPtr model_from_json(const json& doc) {
  try {
    if (doc.value("schema", "") != kModelSchema) throw SchemaError("not a promine model document");
    if (doc.value("version", 0) != kModelVersion)
      throw SchemaError("unsupported model document version " + doc.value("version", json()).dump());
    const auto spec = ClassifierSpec::from_json(doc.at("spec"));
    Schema schema;
    for (const auto& f : doc.at("features"))
      schema.push_back({f.at("name").get<std::string>(), column_kind_from_string(f.at("kind").get<std::string>()),
                        f.at("cardinality").get<std::size_t>()});
    if (doc.contains("fingerprint") && doc.at("fingerprint").get<std::string>() != fingerprint_hex(schema))
      throw SchemaError("model fingerprint does not match its feature list");
    const json& fitted = doc.at("fitted");
    if (fitted.value("prior_only", false)) {
      const auto p = fitted.at("prior");
      return std::make_shared<PriorModel>(spec, std::move(schema), Distribution{p.at(0).get<double>(), p.at(1).get<double>()});
    }
    switch (spec.algorithm) {
      case Algorithm::naive_bayes: return detail::load_naive_bayes(spec, std::move(schema), fitted);
      case Algorithm::aode: return detail::load_aode(spec, std::move(schema), fitted);
      case Algorithm::logistic:
      case Algorithm::linreg_classifier: return detail::load_linear(spec, std::move(schema), fitted);
      case Algorithm::knn: return detail::load_knn(spec, std::move(schema), fitted);
      case Algorithm::c45_tree:
      case Algorithm::random_forest: return detail::load_trees(spec, std::move(schema), fitted);
      case Algorithm::mlp: return detail::load_mlp(spec, std::move(schema), fitted);
      case Algorithm::ensemble:
      case Algorithm::vote: return detail::load_committee(spec, std::move(schema), fitted);
    }
    throw SchemaError("unknown algorithm in model document");
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed model document: ") + e.what());
  }
}

namespace detail {

Encoder::Encoder(const Schema& schema, const Rows& rows, bool standardize, bool drop_first)
    : drop_first_(drop_first) {
  for (std::size_t c = 0; c < schema.size(); ++c) {
    Slot s;
    s.offset = width_;
    if (schema[c].kind == ColumnKind::numeric) {
      if (standardize && rows.size() > 1) {
        double sum = 0.0;
        for (const auto& r : rows) sum += r[c];
        s.mean = sum / static_cast<double>(rows.size());
        double ss = 0.0;
        for (const auto& r : rows) ss += (r[c] - s.mean) * (r[c] - s.mean);
        const double sd = std::sqrt(ss / static_cast<double>(rows.size() - 1));
        s.scale = sd > 0.0 ? sd : 1.0;
      }
      width_ += 1;
    } else {
      s.cardinality = std::max<std::size_t>(schema[c].cardinality, 1);
      width_ += drop_first ? s.cardinality - 1 : s.cardinality;
    }
    slots_.push_back(s);
  }
}

std::vector<double> Encoder::encode(std::span<const double> row) const {
  std::vector<double> out(width_, 0.0);
  for (std::size_t c = 0; c < slots_.size(); ++c) {
    const Slot& s = slots_[c];
    if (s.cardinality == 0) {
      out[s.offset] = (row[c] - s.mean) / s.scale;
      continue;
    }
    // Unknown levels leave the block at zero.
    const int level = level_of(row[c], s.cardinality);
    if (level < 0) continue;
    if (drop_first_) {
      if (level > 0) out[s.offset + static_cast<std::size_t>(level) - 1] = 1.0;
    } else {
      out[s.offset + static_cast<std::size_t>(level)] = 1.0;
    }
  }
  return out;
}

json Encoder::to_json() const {
  json centers = json::array(), scales = json::array();
  for (const auto& s : slots_) {
    centers.push_back(s.mean);
    scales.push_back(s.scale);
  }
  return {{"drop_first", drop_first_}, {"mean", centers}, {"scale", scales}};
}

Encoder Encoder::from_json(const json& j, const Schema& schema) {
  Encoder e(schema, {}, false, j.at("drop_first").get<bool>());
  const auto& m = j.at("mean");
  const auto& s = j.at("scale");
  if (m.size() != schema.size() || s.size() != schema.size()) throw SchemaError("encoder size mismatch");
  for (std::size_t c = 0; c < schema.size(); ++c) {
    e.slots_[c].mean = m.at(c).get<double>();
    e.slots_[c].scale = s.at(c).get<double>();
  }
  return e;
}

}  // namespace detail
}  // namespace promine::learners
