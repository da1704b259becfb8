#include <algorithm>
#include <limits>

#include "internal.hpp"
#include "promine/log.hpp"
#include "promine/metrics.hpp"
#include "promine/random.hpp"

namespace promine::learners {
namespace {

using detail::json;

// Ensemble: weighted mean of member probabilities. Vote: per-class maximum
// over members, renormalised.
class Committee final : public Classifier {
 public:
  Committee(ClassifierSpec spec, Schema schema, std::vector<ClassifierPtr> members, std::vector<double> weights,
            std::vector<EnsembleStep> trace = {})
      : Classifier(std::move(spec), std::move(schema)),
        members_(std::move(members)),
        weights_(std::move(weights)),
        trace_(std::move(trace)) {
    if (members_.empty() || members_.size() != weights_.size()) throw SchemaError("committee: bad member list");
    for (const auto& m : members_)
      if (m->schema() != this->schema()) throw SchemaError("committee: member schema differs");
  }

  json fitted_json() const override {
    json members = json::array(), trace = json::array();
    for (const auto& m : members_) members.push_back(model_to_json(*m));
    for (const auto& s : trace_) trace.push_back({{"step", s.step}, {"model", s.model}, {"auc", s.auc}});
    return {{"members", members}, {"weights", weights_}, {"trace", trace}};
  }

 protected:
  Distribution proba(std::span<const double> row) const override {
    if (spec().algorithm == Algorithm::vote) {
      Distribution best{0.0, 0.0};
      for (const auto& m : members_) {
        const auto d = m->predict_proba(row);
        best[0] = std::max(best[0], d[0]);
        best[1] = std::max(best[1], d[1]);
      }
      return detail::normalized(best[0], best[1]);
    }
    Distribution acc{0.0, 0.0};
    double total = 0.0;
    for (std::size_t i = 0; i < members_.size(); ++i) {
      const auto d = members_[i]->predict_proba(row);
      acc[0] += weights_[i] * d[0];
      acc[1] += weights_[i] * d[1];
      total += weights_[i];
    }
    return {acc[0] / total, acc[1] / total};
  }

 private:
  std::vector<ClassifierPtr> members_;
  std::vector<double> weights_;
  std::vector<EnsembleStep> trace_;
};

}  // namespace

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("stratified_folds: need at least two folds");
  if (labels.size() < k) throw ValidationError("stratified_folds: fewer rows than folds");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  Rng rng(seed);
  rng.shuffle(pos);
  rng.shuffle(neg);
  std::vector<std::size_t> fold(labels.size());
  // One counter across both classes keeps every fold size within one.
  std::size_t next = 0;
  for (auto i : pos) fold[i] = next++ % k;
  for (auto i : neg) fold[i] = next++ % k;
  return fold;
}

EnsembleSelection ensemble_select(const std::vector<std::vector<double>>& library_scores, std::span<const int> labels,
                                  std::size_t max_steps) {
  if (library_scores.empty()) throw ValidationError("ensemble_select: empty library");
  for (const auto& s : library_scores)
    if (s.size() != labels.size()) throw ValidationError("ensemble_select: score length differs from labels");
  EnsembleSelection sel;
  sel.multiplicity.assign(library_scores.size(), 0);
  std::vector<double> sum(labels.size(), 0.0), trial(labels.size());
  double current = -std::numeric_limits<double>::infinity();
  for (std::size_t step = 1; step <= max_steps; ++step) {
    std::size_t best_model = 0;
    double best_auc = -1.0;
    for (std::size_t m = 0; m < library_scores.size(); ++m) {
      for (std::size_t i = 0; i < sum.size(); ++i) trial[i] = sum[i] + library_scores[m][i];
      const double a = metrics::auc(trial, labels);
      if (a > best_auc) {
        best_auc = a;
        best_model = m;
      }
    }
    if (step > 1 && !(best_auc > current)) break;
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += library_scores[best_model][i];
    ++sel.multiplicity[best_model];
    sel.trace.push_back({step, best_model, best_auc});
    current = best_auc;
  }
  sel.auc = current;
  return sel;
}

int vote_predict(std::span<const ClassifierPtr> models, std::span<const double> row) {
  if (models.empty()) throw ValidationError("vote_predict: no models");
  Distribution best{0.0, 0.0};
  for (const auto& m : models) {
    const auto d = m->predict_proba(row);
    best[0] = std::max(best[0], d[0]);
    best[1] = std::max(best[1], d[1]);
  }
  return predicted_class(best);
}

namespace detail {

ClassifierPtr fit_ensemble(const ClassifierSpec& spec, const Dataset& data) {
  const auto& p = std::get<EnsembleParams>(spec.params);
  const std::size_t n_lib = p.library.size();
  const std::size_t k = std::min(p.inner_folds, data.rows());
  const auto folds = stratified_folds(data.target, k, derive_seed(spec.seed, 0xE5E));
  std::vector<std::vector<double>> oof(n_lib, std::vector<double>(data.rows(), 0.0));
  std::vector<ClassifierSpec> specs;
  for (std::size_t m = 0; m < n_lib; ++m) specs.push_back(ClassifierSpec::make(p.library[m], json::object(), derive_seed(spec.seed, m)));

  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < data.rows(); ++i) (folds[i] == f ? te : tr).push_back(i);
    const Dataset train_part = data.take_rows(tr);
    const Dataset test_part = data.take_rows(te);
    for (std::size_t m = 0; m < n_lib; ++m) {
      const auto model = train(specs[m], train_part);
      const auto s = model->positive_scores(test_part);
      for (std::size_t i = 0; i < te.size(); ++i) oof[m][te[i]] = s[i];
    }
  }
  const auto sel = ensemble_select(oof, data.target, p.max_steps);
  std::vector<ClassifierPtr> members;
  std::vector<double> weights;
  for (std::size_t m = 0; m < n_lib; ++m) {
    if (sel.multiplicity[m] == 0) continue;
    members.push_back(train(specs[m], data));
    weights.push_back(static_cast<double>(sel.multiplicity[m]));
  }
  return std::make_shared<Committee>(spec, schema_of(data), std::move(members), std::move(weights), sel.trace);
}

ClassifierPtr fit_vote(const ClassifierSpec& spec, const Dataset& data) {
  const auto& p = std::get<VoteParams>(spec.params);
  std::vector<ClassifierPtr> members;
  for (std::size_t m = 0; m < p.members.size(); ++m)
    members.push_back(train(ClassifierSpec::make(p.members[m], json::object(), derive_seed(spec.seed, m)), data));
  std::vector<double> weights(members.size(), 1.0);
  return std::make_shared<Committee>(spec, schema_of(data), std::move(members), std::move(weights));
}

ClassifierPtr load_committee(const ClassifierSpec& spec, Schema schema, const json& j) {
  std::vector<ClassifierPtr> members;
  for (const auto& m : j.at("members")) members.push_back(model_from_json(m));
  std::vector<EnsembleStep> trace;
  if (j.contains("trace"))
    for (const auto& s : j.at("trace"))
      trace.push_back({s.at("step").get<std::size_t>(), s.at("model").get<std::size_t>(), s.at("auc").get<double>()});
  return std::make_shared<Committee>(spec, std::move(schema), std::move(members), j.at("weights").get<std::vector<double>>(),
                                     std::move(trace));
}

}  // namespace detail
}  // namespace promine::learners
