#pragma once

// Shared plumbing for the learner implementations. Not installed.

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "promine/dataset.hpp"
#include "promine/error.hpp"
#include "promine/learners.hpp"

namespace promine::learners::detail {

using json = nlohmann::json;
using Rows = std::vector<std::vector<double>>;

inline Rows rows_of(const Dataset& data) {
  Rows out(data.rows(), std::vector<double>(data.cols()));
  for (std::size_t c = 0; c < data.cols(); ++c)
    for (std::size_t r = 0; r < data.rows(); ++r) out[r][c] = data.columns[c].values[r];
  return out;
}

// Code of a discrete cell, or -1 for an unknown/out-of-range level.
inline int level_of(double v, std::size_t cardinality) {
  if (v < 0.0 || v >= static_cast<double>(cardinality)) return -1;
  return static_cast<int>(v);
}

inline Distribution normalized(double w0, double w1) {
  const double s = w0 + w1;
  if (!(s > 0.0) || !std::isfinite(s)) return {0.5, 0.5};
  return {w0 / s, w1 / s};
}

// Softmax over two log-scores.
inline Distribution from_logs(double l0, double l1) {
  const double m = std::max(l0, l1);
  return normalized(std::exp(l0 - m), std::exp(l1 - m));
}

// Maps rows onto a dense real vector: numeric features pass through
// (optionally standardized), discrete features become indicator blocks.
// With drop_first the first level is the reference and has no column.
class Encoder {
 public:
  Encoder() = default;
  Encoder(const Schema& schema, const Rows& rows, bool standardize, bool drop_first);

  std::size_t width() const { return width_; }
  std::vector<double> encode(std::span<const double> row) const;

  json to_json() const;
  static Encoder from_json(const json& j, const Schema& schema);

 private:
  struct Slot {
    std::size_t offset = 0;
    std::size_t cardinality = 0;  // 0 = numeric
    double mean = 0.0;
    double scale = 1.0;
  };
  std::vector<Slot> slots_;
  std::size_t width_ = 0;
  bool drop_first_ = false;
};

// Per-family entry points, dispatched from learners.cpp.
ClassifierPtr fit_naive_bayes(const ClassifierSpec&, const Dataset&);
ClassifierPtr load_naive_bayes(const ClassifierSpec&, Schema, const json&);
ClassifierPtr fit_aode(const ClassifierSpec&, const Dataset&);
ClassifierPtr load_aode(const ClassifierSpec&, Schema, const json&);
ClassifierPtr fit_logistic(const ClassifierSpec&, const Dataset&);
ClassifierPtr fit_linreg(const ClassifierSpec&, const Dataset&);
ClassifierPtr load_linear(const ClassifierSpec&, Schema, const json&);
ClassifierPtr fit_knn(const ClassifierSpec&, const Dataset&);
ClassifierPtr load_knn(const ClassifierSpec&, Schema, const json&);
ClassifierPtr fit_c45(const ClassifierSpec&, const Dataset&);
ClassifierPtr fit_forest(const ClassifierSpec&, const Dataset&);
ClassifierPtr load_trees(const ClassifierSpec&, Schema, const json&);
ClassifierPtr fit_mlp(const ClassifierSpec&, const Dataset&);
ClassifierPtr load_mlp(const ClassifierSpec&, Schema, const json&);
ClassifierPtr fit_ensemble(const ClassifierSpec&, const Dataset&);
ClassifierPtr fit_vote(const ClassifierSpec&, const Dataset&);
ClassifierPtr load_committee(const ClassifierSpec&, Schema, const json&);

}  // namespace promine::learners::detail
