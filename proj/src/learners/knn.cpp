#include <algorithm>
#include <cmath>
#include <numeric>

#include "internal.hpp"
#include "promine/log.hpp"

namespace promine::learners::detail {
namespace {

// Plain k-nearest-neighbour vote. Numeric features are z-scored with the
// training spread; a discrete mismatch (or an unknown level) costs 1.
class Knn final : public Classifier {
 public:
  Knn(ClassifierSpec spec, Schema schema, Rows rows, std::vector<int> labels, std::vector<double> mean,
      std::vector<double> scale)
      : Classifier(std::move(spec), std::move(schema)),
        rows_(std::move(rows)),
        labels_(std::move(labels)),
        mean_(std::move(mean)),
        scale_(std::move(scale)) {
    const std::size_t k = std::get<KnnParams>(this->spec().params).k;
    k_ = std::min(k, rows_.size());
    if (rows_.size() != labels_.size() || mean_.size() != this->schema().size() || scale_.size() != mean_.size())
      throw SchemaError("knn: stored training data is inconsistent");
  }

  json fitted_json() const override {
    return {{"rows", rows_}, {"labels", labels_}, {"mean", mean_}, {"scale", scale_}};
  }

 protected:
  Distribution proba(std::span<const double> row) const override {
    std::vector<std::pair<double, std::size_t>> dist(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) dist[i] = {distance(row, rows_[i]), i};
    // Equal distances resolve by training index, so results are reproducible.
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
    double pos = 0.0;
    for (std::size_t i = 0; i < k_; ++i) pos += labels_[dist[i].second];
    const double p = pos / static_cast<double>(k_);
    return {1.0 - p, p};
  }

 private:
  double distance(std::span<const double> a, const std::vector<double>& b) const {
    double d = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
      const auto& f = schema()[c];
      if (f.kind == ColumnKind::numeric) {
        const double z = (a[c] - b[c]) / scale_[c];
        d += z * z;
      } else {
        const int la = level_of(a[c], f.cardinality), lb = level_of(b[c], f.cardinality);
        if (la < 0 || la != lb) d += 1.0;
      }
    }
    return d;
  }

  Rows rows_;
  std::vector<int> labels_;
  std::vector<double> mean_, scale_;
  std::size_t k_ = 3;
};

}  // namespace

ClassifierPtr fit_knn(const ClassifierSpec& spec, const Dataset& data) {
  const std::size_t k = std::get<KnnParams>(spec.params).k;
  if (k > data.rows()) log::warn("knn: k exceeds the training rows; using all rows");
  std::vector<double> mean(data.cols(), 0.0), scale(data.cols(), 1.0);
  for (std::size_t c = 0; c < data.cols(); ++c) {
    const auto& v = data.columns[c].values;
    if (data.columns[c].discrete() || v.size() < 2) continue;
    mean[c] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean[c]) * (x - mean[c]);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    scale[c] = sd > 0.0 ? sd : 1.0;
  }
  return std::make_shared<Knn>(spec, schema_of(data), rows_of(data), data.target, std::move(mean), std::move(scale));
}

ClassifierPtr load_knn(const ClassifierSpec& spec, Schema schema, const json& j) {
  return std::make_shared<Knn>(spec, std::move(schema), j.at("rows").get<Rows>(), j.at("labels").get<std::vector<int>>(),
                               j.at("mean").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>());
}

}  // namespace promine::learners::detail
