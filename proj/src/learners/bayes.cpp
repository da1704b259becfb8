#include <cmath>
#include <limits>
#include <numbers>

#include "internal.hpp"
#include "promine/preprocess.hpp"

namespace promine::learners::detail {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(num / den), or 0 when the estimate is undefined (empty denominator).
double log_ratio(double num, double den) {
  if (!(den > 0.0)) return 0.0;
  return std::log(num / den);
}

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

class NaiveBayes final : public Classifier {
 public:
  struct Feature {
    std::size_t cardinality = 0;                // 0 = Gaussian
    std::array<std::vector<double>, 2> counts;  // discrete: per class, per level
    std::array<double, 2> mean{0.0, 0.0};
    std::array<double, 2> sd{1.0, 1.0};
  };

  NaiveBayes(ClassifierSpec spec, Schema schema, std::array<double, 2> class_counts, std::vector<Feature> features)
      : Classifier(std::move(spec), std::move(schema)), class_counts_(class_counts), features_(std::move(features)) {
    alpha_ = std::get<NaiveBayesParams>(this->spec().params).alpha;
  }

  static std::shared_ptr<NaiveBayes> fit(const ClassifierSpec& spec, const Dataset& data) {
    const auto& p = std::get<NaiveBayesParams>(spec.params);
    std::array<double, 2> nc{0.0, 0.0};
    for (int y : data.target) nc[static_cast<std::size_t>(y)] += 1.0;
    std::vector<Feature> feats;
    for (const auto& col : data.columns) {
      Feature f;
      if (col.discrete()) {
        f.cardinality = col.cardinality();
        for (auto& c : f.counts) c.assign(f.cardinality, 0.0);
        for (std::size_t r = 0; r < data.rows(); ++r) {
          const int v = level_of(col.values[r], f.cardinality);
          if (v >= 0) f.counts[static_cast<std::size_t>(data.target[r])][static_cast<std::size_t>(v)] += 1.0;
        }
      } else {
        std::array<double, 2> sum{0.0, 0.0}, ss{0.0, 0.0};
        for (std::size_t r = 0; r < data.rows(); ++r) sum[static_cast<std::size_t>(data.target[r])] += col.values[r];
        for (std::size_t y = 0; y < 2; ++y) f.mean[y] = sum[y] / nc[y];
        for (std::size_t r = 0; r < data.rows(); ++r) {
          const auto y = static_cast<std::size_t>(data.target[r]);
          ss[y] += (col.values[r] - f.mean[y]) * (col.values[r] - f.mean[y]);
        }
        // Maximum-likelihood spread, floored so a pure class cannot collapse.
        for (std::size_t y = 0; y < 2; ++y) f.sd[y] = std::max(std::sqrt(ss[y] / nc[y]), p.min_sd);
      }
      feats.push_back(std::move(f));
    }
    return std::make_shared<NaiveBayes>(spec, schema_of(data), nc, std::move(feats));
  }

  json fitted_json() const override {
    json feats = json::array();
    for (const auto& f : features_) {
      if (f.cardinality)
        feats.push_back({{"counts", {f.counts[0], f.counts[1]}}});
      else
        feats.push_back({{"mean", {f.mean[0], f.mean[1]}}, {"sd", {f.sd[0], f.sd[1]}}});
    }
    return {{"class_counts", {class_counts_[0], class_counts_[1]}}, {"features", feats}};
  }

  static std::shared_ptr<NaiveBayes> load(const ClassifierSpec& spec, Schema schema, const json& j) {
    std::vector<Feature> feats;
    const auto& fj = j.at("features");
    if (fj.size() != schema.size()) throw SchemaError("naive_bayes: feature count mismatch");
    for (std::size_t c = 0; c < schema.size(); ++c) {
      Feature f;
      if (schema[c].kind != ColumnKind::numeric) {
        f.cardinality = schema[c].cardinality;
        for (std::size_t y = 0; y < 2; ++y) f.counts[y] = fj[c].at("counts").at(y).get<std::vector<double>>();
        if (f.counts[0].size() != f.cardinality || f.counts[1].size() != f.cardinality)
          throw SchemaError("naive_bayes: level count mismatch");
      } else {
        for (std::size_t y = 0; y < 2; ++y) {
          f.mean[y] = fj[c].at("mean").at(y).get<double>();
          f.sd[y] = fj[c].at("sd").at(y).get<double>();
        }
      }
      feats.push_back(std::move(f));
    }
    const auto& cc = j.at("class_counts");
    return std::make_shared<NaiveBayes>(spec, std::move(schema),
                                        std::array<double, 2>{cc.at(0).get<double>(), cc.at(1).get<double>()},
                                        std::move(feats));
  }

 protected:
  Distribution proba(std::span<const double> row) const override {
    const double n = class_counts_[0] + class_counts_[1];
    std::array<double, 2> lp{};
    for (std::size_t y = 0; y < 2; ++y) lp[y] = log_ratio(class_counts_[y] + alpha_, n + 2.0 * alpha_);
    for (std::size_t c = 0; c < features_.size(); ++c) {
      const Feature& f = features_[c];
      if (f.cardinality) {
        const int v = level_of(row[c], f.cardinality);
        if (v < 0) continue;  // unseen level carries no evidence
        const double k = static_cast<double>(f.cardinality);
        for (std::size_t y = 0; y < 2; ++y)
          lp[y] += log_ratio(f.counts[y][static_cast<std::size_t>(v)] + alpha_, class_counts_[y] + alpha_ * k);
      } else {
        for (std::size_t y = 0; y < 2; ++y) {
          const double z = (row[c] - f.mean[y]) / f.sd[y];
          lp[y] += -0.5 * z * z - std::log(f.sd[y]) - 0.5 * std::log(2.0 * std::numbers::pi);
        }
      }
    }
    return from_logs(lp[0], lp[1]);
  }

 private:
  std::array<double, 2> class_counts_;
  std::vector<Feature> features_;
  double alpha_ = 1.0;
};

// Averaged one-dependence estimators over discrete codes. Numeric inputs are
// discretized with CAIM cuts learned from the training rows.
class Aode final : public Classifier {
 public:
  Aode(ClassifierSpec spec, Schema schema, std::vector<std::vector<double>> cuts, std::vector<std::size_t> cards)
      : Classifier(std::move(spec), std::move(schema)), cuts_(std::move(cuts)), cards_(std::move(cards)) {
    const auto& p = std::get<AodeParams>(this->spec().params);
    alpha_ = p.alpha;
    limit_ = p.frequency_limit;
    const std::size_t m = cards_.size();
    offset_.resize(m + 1, 0);
    for (std::size_t i = 0; i < m; ++i) offset_[i + 1] = offset_[i] + cards_[i];
    for (auto& t : single_) t.assign(offset_[m], 0.0);
    for (auto& t : pair_) t.assign(offset_[m] * offset_[m], 0.0);
  }

  static std::shared_ptr<Aode> fit(const ClassifierSpec& spec, const Dataset& data) {
    std::vector<std::vector<double>> cuts(data.cols());
    std::vector<std::size_t> cards(data.cols());
    for (std::size_t c = 0; c < data.cols(); ++c) {
      const Column& col = data.columns[c];
      if (col.discrete()) {
        cards[c] = std::max<std::size_t>(col.cardinality(), 1);
        continue;
      }
      try {
        cuts[c] = preprocess::caim_discretize(col.values, data.target).cuts;
      } catch (const preprocess::ConstantColumnError&) {
        cuts[c].clear();
      }
      cards[c] = cuts[c].size() + 1;
    }
    auto model = std::make_shared<Aode>(spec, schema_of(data), std::move(cuts), std::move(cards));
    std::vector<double> row(data.cols());
    for (std::size_t r = 0; r < data.rows(); ++r) {
      for (std::size_t c = 0; c < data.cols(); ++c) row[c] = data.columns[c].values[r];
      model->add(row, data.target[r]);
    }
    return model;
  }

  json fitted_json() const override {
    return {{"cuts", cuts_}, {"class_counts", class_counts_}, {"single", single_}, {"pair", pair_}};
  }

  static std::shared_ptr<Aode> load(const ClassifierSpec& spec, Schema schema, const json& j) {
    auto cuts = j.at("cuts").get<std::vector<std::vector<double>>>();
    if (cuts.size() != schema.size()) throw SchemaError("aode: feature count mismatch");
    std::vector<std::size_t> cards(schema.size());
    for (std::size_t c = 0; c < schema.size(); ++c)
      cards[c] = schema[c].kind == ColumnKind::numeric ? cuts[c].size() + 1 : std::max<std::size_t>(schema[c].cardinality, 1);
    auto model = std::make_shared<Aode>(spec, std::move(schema), std::move(cuts), std::move(cards));
    model->class_counts_ = j.at("class_counts").get<std::array<double, 2>>();
    model->single_ = j.at("single").get<std::array<std::vector<double>, 2>>();
    model->pair_ = j.at("pair").get<std::array<std::vector<double>, 2>>();
    const std::size_t w = model->offset_.back();
    for (std::size_t y = 0; y < 2; ++y)
      if (model->single_[y].size() != w || model->pair_[y].size() != w * w) throw SchemaError("aode: table size mismatch");
    return model;
  }

 protected:
  Distribution proba(std::span<const double> row) const override {
    const auto codes = encode(row);
    const std::size_t m = cards_.size();
    const double n = class_counts_[0] + class_counts_[1];
    std::array<double, 2> total{kNegInf, kNegInf};
    bool any_parent = false;
    for (std::size_t i = 0; i < m; ++i) {
      if (codes[i] < 0) continue;
      const std::size_t pi = offset_[i] + static_cast<std::size_t>(codes[i]);
      if (single_[0][pi] + single_[1][pi] < static_cast<double>(limit_)) continue;
      any_parent = true;
      for (std::size_t y = 0; y < 2; ++y) {
        double lp = log_ratio(class_counts_[y] + alpha_, n + 2.0 * alpha_);
        lp += log_ratio(single_[y][pi] + alpha_, class_counts_[y] + alpha_ * static_cast<double>(cards_[i]));
        for (std::size_t j = 0; j < m; ++j) {
          if (j == i || codes[j] < 0) continue;
          const std::size_t pj = offset_[j] + static_cast<std::size_t>(codes[j]);
          lp += log_ratio(pair_[y][pi * offset_[m] + pj] + alpha_,
                          single_[y][pi] + alpha_ * static_cast<double>(cards_[j]));
        }
        total[y] = log_sum_exp(total[y], lp);
      }
    }
    if (!any_parent) {
      // Naive Bayes over the same tables.
      for (std::size_t y = 0; y < 2; ++y) {
        total[y] = log_ratio(class_counts_[y] + alpha_, n + 2.0 * alpha_);
        for (std::size_t j = 0; j < m; ++j) {
          if (codes[j] < 0) continue;
          const std::size_t pj = offset_[j] + static_cast<std::size_t>(codes[j]);
          total[y] += log_ratio(single_[y][pj] + alpha_, class_counts_[y] + alpha_ * static_cast<double>(cards_[j]));
        }
      }
    }
    return from_logs(total[0], total[1]);
  }

 private:
  std::vector<int> encode(std::span<const double> row) const {
    std::vector<int> codes(cards_.size());
    for (std::size_t c = 0; c < cards_.size(); ++c) {
      if (schema()[c].kind == ColumnKind::numeric)
        codes[c] = static_cast<int>(preprocess::bin_index(cuts_[c], row[c]));
      else
        codes[c] = level_of(row[c], cards_[c]);
    }
    return codes;
  }

  void add(std::span<const double> row, int label) {
    const auto y = static_cast<std::size_t>(label);
    const auto codes = encode(row);
    const std::size_t w = offset_.back();
    class_counts_[y] += 1.0;
    for (std::size_t i = 0; i < codes.size(); ++i) {
      if (codes[i] < 0) continue;
      const std::size_t pi = offset_[i] + static_cast<std::size_t>(codes[i]);
      single_[y][pi] += 1.0;
      for (std::size_t j = 0; j < codes.size(); ++j) {
        if (j == i || codes[j] < 0) continue;
        pair_[y][pi * w + offset_[j] + static_cast<std::size_t>(codes[j])] += 1.0;
      }
    }
  }

  std::vector<std::vector<double>> cuts_;
  std::vector<std::size_t> cards_;
  std::vector<std::size_t> offset_;
  std::array<double, 2> class_counts_{0.0, 0.0};
  std::array<std::vector<double>, 2> single_;
  std::array<std::vector<double>, 2> pair_;
  double alpha_ = 1.0;
  std::size_t limit_ = 1;
};

}  // namespace

ClassifierPtr fit_naive_bayes(const ClassifierSpec& spec, const Dataset& data) { return NaiveBayes::fit(spec, data); }
ClassifierPtr load_naive_bayes(const ClassifierSpec& spec, Schema schema, const json& j) {
  return NaiveBayes::load(spec, std::move(schema), j);
}
ClassifierPtr fit_aode(const ClassifierSpec& spec, const Dataset& data) { return Aode::fit(spec, data); }
ClassifierPtr load_aode(const ClassifierSpec& spec, Schema schema, const json& j) {
  return Aode::load(spec, std::move(schema), j);
}

}  // namespace promine::learners::detail
