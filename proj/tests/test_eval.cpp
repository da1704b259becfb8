#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "promine/error.hpp"
#include "promine/eval.hpp"
#include "promine/log.hpp"
#include "promine/metrics.hpp"
#include "promine/preprocess.hpp"
#include "support.hpp"

using namespace promine;
using namespace promine::eval;

namespace {

PipelineSpec spec_for(std::string_view algo, preprocess::Binning b = preprocess::Binning::caim,
                      featsel::Selector sel = featsel::Selector::nb_wrapper) {
  PipelineSpec s;
  s.model = learners::ClassifierSpec::make(algo);
  s.binning = b;
  s.selector = sel;
  return s;
}

// Planted data with an extra pure-noise categorical column.
Dataset planted_plus(std::uint64_t seed, std::size_t n) {
  auto d = support::planted(seed, n);
  Rng rng(seed ^ 0xABC);
  std::vector<double> c(n);
  for (auto& v : c) v = double(rng.below(3));
  d.columns.push_back(support::categorical("noise_cat", c, {"u", "v", "w"}));
  return d;
}

}  // namespace

TEST_CASE("fold plan: a stratified partition") {
  Rng rng(1);
  for (int it = 0; it < 50; ++it) {
    const std::size_t n = 30 + rng.below(300), k = 2 + rng.below(9);
    const auto y = support::random_labels(rng, n, 0.2 + 0.6 * rng.uniform());
    const auto plan = make_fold_plan(y, k, it);
    std::vector<int> seen(n, 0);
    const double rate = double(std::count(y.begin(), y.end(), 1)) / double(n);
    for (std::size_t f = 0; f < k; ++f) {
      const auto te = plan.test_rows(f), tr = plan.train_rows(f);
      CHECK(te.size() + tr.size() == n);
      std::set<std::size_t> a(te.begin(), te.end());
      for (auto i : tr) CHECK(a.count(i) == 0);
      for (auto i : te) ++seen[i];
      double pos = 0;
      for (auto i : te) pos += y[i];
      // Each fold's positive count is within one of its proportional share.
      CHECK(std::abs(pos - rate * double(te.size())) <= 1.0 + 1e-9);
    }
    for (int s : seen) CHECK(s == 1);
  }
}

TEST_CASE("cross-validation: fold fits see only their training rows") {
  // Reconstruct every fold from a dataset that physically contains only the
  // training rows; any leak of held-out information would change the scores.
  const auto data = planted_plus(3, 200);
  const auto spec = spec_for("naive_bayes");
  const std::uint64_t seed = 17;
  const auto cv = cross_validate(spec, data, seed, 5);
  for (std::size_t f = 0; f < 5; ++f) {
    const auto train = data.take_rows(cv.plan.train_rows(f));
    const auto te = cv.plan.test_rows(f);
    const auto fitted = fit_pipeline(spec, train, derive_seed(seed, 100 + f));
    CHECK(fitted.selected == cv.folds[f].selected);
    const auto pred = fitted.predict(data.take_rows(te));
    for (std::size_t i = 0; i < te.size(); ++i) CHECK(pred[i][1] == cv.scores[te[i]]);
  }
  // Pooled metrics are recomputed from the pooled scores.
  CHECK(cv.row.auc == metrics::auc(cv.scores, cv.labels));
  CHECK(cv.row.n == data.rows());
}

TEST_CASE("cross-validation: changing held-out rows cannot change a fold's fit") {
  const auto data = planted_plus(4, 150);
  const auto spec = spec_for("logistic", preprocess::Binning::bin_target);
  const auto cv = cross_validate(spec, data, 5, 5);
  // Overwrite the features of fold 0's test rows with extreme values. The
  // labels (and so the fold plan) stay the same.
  auto poisoned = data;
  for (auto i : cv.plan.test_rows(0)) poisoned.columns[0].values[i] = 1e3 * (poisoned.target[i] ? -1 : 1);
  const auto cv2 = cross_validate(spec, poisoned, 5, 5);
  CHECK(cv2.plan.assignment == cv.plan.assignment);
  CHECK(cv2.folds[0].selected == cv.folds[0].selected);
  REQUIRE(cv2.folds[0].trace.size() == cv.folds[0].trace.size());
  for (std::size_t k = 0; k < cv.folds[0].trace.size(); ++k) CHECK(cv2.folds[0].trace[k].auc == cv.folds[0].trace[k].auc);
  // Rows outside fold 0 were scored by models that trained on the poisoned rows.
  CHECK(cv2.scores != cv.scores);
}

TEST_CASE("cross-validation is identical across thread counts") {
  const auto data = planted_plus(6, 240);
  for (auto algo : {"naive_bayes", "random_forest", "mlp"}) {
    auto spec = spec_for(algo);
    if (std::string(algo) == "mlp") spec.model = learners::ClassifierSpec::make("mlp", {{"epochs", 40}});
    const auto a = cross_validate(spec, data, 9, 10, 1);
    const auto b = cross_validate(spec, data, 9, 10, 4);
    CHECK(a.scores == b.scores);
    CHECK(a.row.auc == b.row.auc);
    CHECK(a.row.h == b.row.h);
    for (std::size_t f = 0; f < 10; ++f) CHECK(a.folds[f].selected == b.folds[f].selected);
  }
}

TEST_CASE("the wrapper's inner folds get their own preprocessing") {
  // Rebuild the wrapper input by hand: one preprocessor per inner training part.
  const auto d = planted_plus(8, 180);
  const auto spec = spec_for("naive_bayes");
  const std::uint64_t seed = 21;
  const auto fitted = fit_pipeline(spec, d, seed);
  auto opts = spec.wrapper;
  opts.seed = derive_seed(seed, 0x5E1);
  const auto assignment = learners::stratified_folds(d.target, opts.inner_folds, opts.seed);
  std::vector<featsel::WrapperFold> folds(opts.inner_folds);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> tr;
    for (std::size_t i = 0; i < d.rows(); ++i) (assignment[i] == f ? folds[f].test_rows : tr).push_back(i);
    const auto pre = preprocess::fit_preprocessor(d.take_rows(tr), spec.binning);
    folds[f].train = pre.apply(d.take_rows(tr));
    folds[f].test = pre.apply(d.take_rows(folds[f].test_rows));
  }
  const auto expected = featsel::nb_wrapper_select(folds, d.target, fitted.preprocessor.apply(d).names(), opts);
  CHECK(fitted.selected == expected.selected);
  CHECK(fitted.selection.auc == expected.auc);

  // With CAIM cuts fit on the whole training set, inner AUCs would be
  // optimistic; the nested estimate is never above that leaky one here.
  const auto leaky = featsel::nb_wrapper_select(fitted.preprocessor.apply(d), opts);
  CHECK(expected.auc <= leaky.auc);
}

TEST_CASE("degenerate training folds are excluded and counted") {
  // One positive among 20 rows: its fold trains on negatives only.
  std::vector<double> x(20);
  for (std::size_t i = 0; i < 20; ++i) x[i] = double(i);
  std::vector<int> y1(20, 0);
  y1[3] = 1;
  const auto d1 = support::make({support::numeric("x", x)}, y1);
  log::reset_events();
  const auto cv1 = cross_validate(spec_for("naive_bayes", preprocess::Binning::bin_target, featsel::Selector::none),
                                  d1, 1, 4);
  std::size_t degenerate = 0;
  for (const auto& f : cv1.folds) degenerate += f.degenerate;
  CHECK(degenerate == 1);
  CHECK(log::event_count("degenerate_fold") == 1);
  CHECK(cv1.row.n == 15);
  // Only negatives remain in the pooled set.
  CHECK(std::isnan(cv1.row.auc));
}

TEST_CASE("permuted target gives chance-level AUC") {
  for (std::uint64_t s : {1, 2, 3}) {
    auto d = planted_plus(20 + s, 600);
    Rng rng(s);
    rng.shuffle(d.target);
    const auto cv = cross_validate(spec_for("naive_bayes"), d, s, 10);
    CAPTURE(s);
    CHECK(cv.row.auc > 0.42);
    CHECK(cv.row.auc < 0.58);
  }
}

TEST_CASE("informative data is recovered") {
  const auto d = planted_plus(30, 400);
  const auto cv = cross_validate(spec_for("naive_bayes"), d, 3, 10);
  CHECK(cv.row.auc > 0.85);
  for (const auto& f : cv.folds) {
    REQUIRE(!f.selected.empty());
    CHECK(f.selected[0] == "x1");
  }
}

TEST_CASE("the wrapper can be switched off") {
  const auto d = planted_plus(31, 200);
  const auto fitted = fit_pipeline(spec_for("logistic", preprocess::Binning::caim, featsel::Selector::none), d, 1);
  CHECK(fitted.selected == std::vector<std::string>{"x1", "x2", "c1", "noise_cat"});
  CHECK(fitted.selection.trace.empty());
}

TEST_CASE("fitted pipeline JSON round-trip") {
  const auto d = planted_plus(32, 200);
  for (auto algo : {"naive_bayes", "c45_tree", "knn"})
    for (auto b : {preprocess::Binning::bin_target, preprocess::Binning::caim}) {
      const auto p = fit_pipeline(spec_for(algo, b), d, 2);
      const auto back = FittedPipeline::from_json(nlohmann::json::parse(p.to_json().dump()));
      CHECK(back.to_json() == p.to_json());
      CHECK(back.predict(d) == p.predict(d));
      CHECK(back.input_columns() == p.input_columns());
    }
  auto doc = fit_pipeline(spec_for("naive_bayes"), d, 2).to_json();
  doc["selected"].push_back("ghost");
  CHECK_THROWS_AS(FittedPipeline::from_json(doc), SchemaError);
  doc = fit_pipeline(spec_for("naive_bayes"), d, 2).to_json();
  doc["version"] = 9;
  CHECK_THROWS_AS(FittedPipeline::from_json(doc), SchemaError);
}

TEST_CASE("report layout and ordering") {
  EvalReport r;
  r.folds = 5;
  r.rows = {{"a", "CAIM", 0.8, 0.7, 0.6, 0.2, 0.3, 10},
            {"b", "CAIM", 0.8, std::nan(""), 0.6, 0.2, 0.3, 10},
            {"c", "BinTarget", 0.9, 0.9, 0.6, 0.2, 0.3, 10},
            {"d", "CAIM", 0.9, 0.7, 0.6, 0.2, 0.3, 10}};
  r.sort_by_auc();
  CHECK(r.rows[0].model == "c");
  CHECK(r.rows[1].model == "a");  // stable among equal AUCs
  CHECK(r.rows[2].model == "d");
  CHECK(r.rows[3].model == "b");  // NaN last
  CHECK(r.text().find("stratified 5-fold") != std::string::npos);
  CHECK(r.text().find("90.0%") != std::string::npos);
  CHECK(r.csv().rfind("model,binning,accuracy,auc,tp_rate,fp_rate,h,n\n", 0) == 0);
  CHECK(r.to_json()["rows"][3]["auc"].is_null());

  std::vector<FoldDetail> folds(1);
  folds[0].trace = {{1, "x1", 0.8}};
  CHECK(wrapper_trace_csv("nb:CAIM", folds) == "pipeline,fold,step,feature,auc\nnb:CAIM,0,1,x1,0.800000\n");
}
