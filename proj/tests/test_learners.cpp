#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <numeric>

#include "promine/error.hpp"
#include "promine/learners.hpp"
#include "promine/log.hpp"
#include "promine/metrics.hpp"
#include "promine/mlp.hpp"
#include "support.hpp"

using namespace promine;
using namespace promine::learners;
using nlohmann::json;

namespace {

ClassifierPtr fit(std::string_view name, const Dataset& d, json overrides = json::object(), std::uint64_t seed = 1) {
  return train(ClassifierSpec::make(name, overrides, seed), d);
}

double p1(const ClassifierPtr& m, std::vector<double> row) { return m->predict_proba(row)[1]; }

// A fixed-distribution model: a prior-only document with a chosen prior.
ClassifierPtr fixed(double pos) {
  const auto d = support::make({support::numeric("x", {0, 1})}, {1, 1});
  auto doc = model_to_json(*train(ClassifierSpec::make(Algorithm::naive_bayes), d));
  doc["fitted"] = {{"prior_only", true}, {"prior", {1.0 - pos, pos}}};
  return model_from_json(doc);
}

Dataset nb_example() {
  // (x=1,y=1) x3, (x=0,y=1) x1, (x=1,y=0) x1, (x=0,y=0) x3
  return support::make({support::binary("x", {1, 1, 1, 0, 1, 0, 0, 0})}, {1, 1, 1, 1, 0, 0, 0, 0});
}

double holdout_auc(const ClassifierPtr& m, const Dataset& test) {
  return metrics::auc(m->positive_scores(test), test.target);
}

}  // namespace

TEST_CASE("naive Bayes worked posterior") {
  const auto m = fit("naive_bayes", nb_example());
  // (4/6) / (4/6 + 2/6) with equal priors.
  CHECK(p1(m, {1}) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(p1(m, {0}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("naive Bayes posterior is invariant under dataset duplication with alpha = 0") {
  const auto base = support::planted(1, 60);
  auto dup = base;
  for (int k = 0; k < 2; ++k) {
    for (std::size_t c = 0; c < dup.cols(); ++c)
      dup.columns[c].values.insert(dup.columns[c].values.end(), base.columns[c].values.begin(),
                                   base.columns[c].values.end());
    dup.target.insert(dup.target.end(), base.target.begin(), base.target.end());
  }
  // Counts-only likelihoods: a discrete table.
  const auto disc = base.take_columns(std::vector<std::string>{"c1"});
  const auto disc3 = dup.take_columns(std::vector<std::string>{"c1"});
  const auto a = fit("naive_bayes", disc, {{"alpha", 0.0}}), b = fit("naive_bayes", disc3, {{"alpha", 0.0}});
  for (double v : {0.0, 1.0}) CHECK(p1(a, {v}) == doctest::Approx(p1(b, {v})).epsilon(1e-12));
}

TEST_CASE("kNN vote over the three nearest") {
  const auto d = support::make({support::numeric("x", {1, 2, 3, 10, 11})}, {0, 0, 1, 1, 1});
  const auto m = fit("knn", d);
  CHECK(p1(m, {2}) == doctest::Approx(1.0 / 3.0));
  CHECK(p1(m, {11}) == 1.0);
}

TEST_CASE("single-class training yields a prior-only model") {
  const auto d = support::make({support::numeric("x", {1, 2, 3})}, {0, 0, 0});
  for (const auto& name : algorithm_names()) {
    const auto m = fit(name, d);
    const auto pr = m->predict_proba(std::vector<double>{5});
    CHECK(pr[0] == 1.0);
    CHECK(pr[1] == 0.0);
  }
}

TEST_CASE("logistic with zero weights predicts one half") {
  const auto d = support::planted(2, 80);
  auto doc = model_to_json(*fit("logistic", d));
  doc["fitted"]["intercept"] = 0.0;
  for (auto& w : doc["fitted"]["weights"]) w = 0.0;
  const auto m = model_from_json(doc);
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto pr = m->predict_proba(std::vector<double>{rng.normal(0, 5), rng.normal(), double(rng.below(2))});
    CHECK(pr[0] == 0.5);
    CHECK(pr[1] == 0.5);
  }
}

TEST_CASE("logistic reaches perfect training accuracy on separable data") {
  const auto d = support::make({support::numeric("x", {-3, -2, -1, -0.5, 0.5, 1, 2, 3})}, {0, 0, 0, 0, 1, 1, 1, 1});
  const auto m = fit("logistic", d);
  for (std::size_t i = 0; i < d.rows(); ++i) CHECK(predicted_class(m->predict_proba(d.row(i))) == d.target[i]);
}

TEST_CASE("least-squares classifier equals closed-form OLS, clipped") {
  // mean x = 2, mean y = 0.6, Sxy = 2, Sxx = 10: slope 0.2, intercept 0.2.
  const auto d = support::make({support::numeric("x", {0, 1, 2, 3, 4})}, {0, 1, 0, 1, 1});
  const auto m = fit("linreg_classifier", d);
  CHECK(p1(m, {2}) == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(p1(m, {0}) == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(p1(m, {10}) == 1.0);
  CHECK(p1(m, {-10}) == 0.0);
}

TEST_CASE("AODE on a single discrete feature equals naive Bayes") {
  Rng rng(5);
  for (int it = 0; it < 20; ++it) {
    const std::size_t n = 20 + rng.below(40);
    const auto y = support::random_labels(rng, n);
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = double(rng.bernoulli(y[i] ? 0.7 : 0.3) ? rng.below(2) : 2);
    const auto d = support::make({support::categorical("c", c, {"a", "b", "z"})}, y);
    const auto nb = fit("naive_bayes", d), ao = fit("aode", d);
    for (double v : {0.0, 1.0, 2.0, kUnknownLevel}) CHECK(p1(ao, {v}) == doctest::Approx(p1(nb, {v})).epsilon(1e-12));
  }
}

TEST_CASE("unpruned C4.5 fits consistent data exactly") {
  Rng rng(7);
  std::vector<double> a(60), b(60), c(60);
  std::vector<int> y(60);
  for (std::size_t i = 0; i < 60; ++i) {
    a[i] = double(i);  // distinct, so no two rows conflict
    b[i] = rng.normal();
    c[i] = double(rng.below(3));
    y[i] = (b[i] > 0) != (c[i] == 1) ? 1 : 0;
  }
  const auto d = support::make({support::numeric("a", a), support::numeric("b", b),
                                support::categorical("c", c, {"p", "q", "r"})},
                               y);
  const auto m = fit("c45_tree", d, {{"prune", false}, {"min_leaf", 1}});
  for (std::size_t i = 0; i < d.rows(); ++i) CHECK(predicted_class(m->predict_proba(d.row(i))) == y[i]);
}

TEST_CASE("random forest is at least as good as one tree on planted data") {
  double rf_sum = 0.0, tree_sum = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto train_set = support::planted(100 + s, 300, 1.5);
    const auto test_set = support::planted(200 + s, 500, 1.5);
    rf_sum += holdout_auc(fit("random_forest", train_set, json::object(), s), test_set);
    tree_sum += holdout_auc(fit("c45_tree", train_set, json::object(), s), test_set);
  }
  CHECK(rf_sum / 5 >= tree_sum / 5 - 0.02);
}

TEST_CASE("MLP backprop matches central differences") {
  Rng rng(11);
  auto net = MlpNetwork::random(3, 4, rng);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 6; ++i) {
    x.push_back({rng.normal(), rng.normal(), rng.normal()});
    y.push_back(int(rng.below(2)));
  }
  if (std::count(y.begin(), y.end(), 1) == 0) y[0] = 1;
  for (double decay : {0.0, 1e-2}) {
    const auto g = mlp_gradient(net, x, y, decay);
    auto p = net.parameters();
    REQUIRE(g.size() == p.size());
    const double h = 1e-5;
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto up = p, dn = p;
      up[i] += h;
      dn[i] -= h;
      MlpNetwork a = net, b = net;
      a.set_parameters(up);
      b.set_parameters(dn);
      const double fd = (mlp_loss(a, x, y, decay) - mlp_loss(b, x, y, decay)) / (2 * h);
      const double scale = std::max({std::abs(fd), std::abs(g[i]), 1e-8});
      CHECK(std::abs(fd - g[i]) / scale < 1e-4);
    }
  }
}

TEST_CASE("MLP learns XOR") {
  const auto d = support::make({support::numeric("a", {0, 0, 1, 1}), support::numeric("b", {0, 1, 0, 1})}, {0, 1, 1, 0});
  const auto m = fit("mlp", d, {{"hidden", 4}, {"epochs", 5000}}, 3);
  for (std::size_t i = 0; i < 4; ++i) CHECK(predicted_class(m->predict_proba(d.row(i))) == d.target[i]);
}

TEST_CASE("every learner returns a distribution and is reproducible from its seed") {
  const auto d = support::planted(12, 120);
  auto shuffled_idx = std::vector<std::size_t>(d.rows());
  std::iota(shuffled_idx.begin(), shuffled_idx.end(), 0);
  Rng rng(13);
  rng.shuffle(shuffled_idx);
  const auto permuted = d.take_rows(shuffled_idx);
  const json small_meta = {{"library", {"naive_bayes", "logistic", "knn"}}, {"inner_folds", 3}};
  for (const auto& name : algorithm_names()) {
    json ov = name == "ensemble" ? small_meta : json::object();
    if (name == "vote") ov = {{"members", {"naive_bayes", "logistic", "knn"}}};
    if (name == "mlp") ov = {{"epochs", 100}};
    CAPTURE(name);
    const auto a = fit(name, d, ov, 9), b = fit(name, d, ov, 9);
    for (std::size_t i = 0; i < 20; ++i) {
      const auto pa = a->predict_proba(d.row(i));
      CHECK(pa[0] >= 0.0);
      CHECK(pa[1] >= 0.0);
      CHECK(std::abs(pa[0] + pa[1] - 1.0) < 1e-9);
      CHECK(pa == b->predict_proba(d.row(i)));
    }
    // Learners without seeded resampling ignore row order.
    if (name == "naive_bayes" || name == "logistic" || name == "linreg_classifier" || name == "aode" || name == "knn") {
      const auto c = fit(name, permuted, ov, 9);
      for (std::size_t i = 0; i < 20; ++i)
        CHECK(c->predict_proba(d.row(i))[1] == doctest::Approx(a->predict_proba(d.row(i))[1]).epsilon(1e-9));
    }
  }
}

TEST_CASE("serialization round-trips every learner") {
  const auto d = support::planted(14, 100);
  for (const auto& name : algorithm_names()) {
    json ov = json::object();
    if (name == "ensemble") ov = {{"library", {"naive_bayes", "c45_tree", "mlp"}}, {"inner_folds", 3}};
    if (name == "vote") ov = {{"members", {"random_forest", "mlp"}}};
    if (name == "mlp") ov = {{"epochs", 50}};
    CAPTURE(name);
    const auto m = fit(name, d, ov, 4);
    const auto doc = model_to_json(*m);
    const auto back = model_from_json(json::parse(doc.dump()));
    CHECK(model_to_json(*back) == doc);
    CHECK(back->spec() == m->spec());
    for (std::size_t i = 0; i < d.rows(); ++i) CHECK(back->predict_proba(d.row(i)) == m->predict_proba(d.row(i)));
  }
  auto doc = model_to_json(*fit("naive_bayes", d));
  doc["fingerprint"] = "0000000000000000";
  CHECK_THROWS_AS(model_from_json(doc), SchemaError);
}

TEST_CASE("schema and value checks at prediction time") {
  const auto m = fit("naive_bayes", support::planted(15, 50));
  CHECK_THROWS_AS(m->predict_proba(std::vector<double>{1, 2}), SchemaError);
  CHECK_THROWS_AS(m->predict_proba(std::vector<double>{1, 2, 5}), SchemaError);
  CHECK_THROWS_AS(m->predict_proba(std::vector<double>{std::nan(""), 2, 1}), ValidationError);
  CHECK_NOTHROW(m->predict_proba(std::vector<double>{1, 2, kUnknownLevel}));
  auto bad = support::planted(15, 50);
  bad.columns[0].values[3] = std::nan("");
  CHECK_THROWS_AS(fit("logistic", bad), ValidationError);
}

TEST_CASE("spec names, defaults and overrides") {
  CHECK_THROWS_AS(ClassifierSpec::make("hnb"), NotImplementedError);
  CHECK_THROWS_AS(ClassifierSpec::make("bayesnet_k2"), NotImplementedError);
  CHECK_THROWS_AS(ClassifierSpec::make("svm"), ConfigError);
  CHECK_THROWS_AS(ClassifierSpec::make("knn", {{"neighbours", 3}}), ConfigError);
  CHECK_THROWS_AS(ClassifierSpec::make("knn", {{"k", 0}}), ConfigError);
  CHECK_THROWS_AS(ClassifierSpec::make("ensemble", {{"library", {"vote"}}}), ConfigError);
  const auto k = ClassifierSpec::make("knn");
  CHECK(std::get<KnnParams>(k.params).k == 3);
  const auto m = ClassifierSpec::make("mlp");
  CHECK(std::get<MlpParams>(m.params).learning_rate == 0.3);
  CHECK(std::get<MlpParams>(m.params).momentum == 0.2);
  CHECK(std::get<MlpParams>(m.params).weight_decay > 0.0);
  CHECK(std::get<ForestParams>(ClassifierSpec::make("random_forest").params).trees == 30);
  CHECK(std::get<VoteParams>(ClassifierSpec::make("vote").params).members.size() == 5);
  for (const auto& name : algorithm_names()) {
    const auto s = ClassifierSpec::make(name, json::object(), 77);
    CHECK(ClassifierSpec::from_json(s.to_json()) == s);
  }
}

TEST_CASE("ensemble selection") {
  Rng rng(17);
  const auto y = support::random_labels(rng, 100);
  std::vector<double> perfect(y.begin(), y.end());
  std::vector<std::vector<double>> lib = {support::tied_scores(rng, 100, 50), perfect,
                                          support::tied_scores(rng, 100, 50), support::tied_scores(rng, 100, 50)};
  const auto sel = ensemble_select(lib, y);
  CHECK(sel.auc == 1.0);
  CHECK(sel.multiplicity[1] >= 1);
  CHECK(sel.trace.front().model == 1);

  CHECK_THROWS_AS(ensemble_select({}, y), ValidationError);
}

TEST_CASE("ensemble selection never loses to its best member and can repeat a member") {
  Rng rng(19);
  bool repeated = false;
  for (int it = 0; it < 300; ++it) {
    const std::size_t n = 30;
    const auto y = support::random_labels(rng, n);
    std::vector<std::vector<double>> lib;
    for (int m = 0; m < 3; ++m) lib.push_back(support::informative_scores(rng, y, 0.3 + rng.uniform()));
    const auto sel = ensemble_select(lib, y);
    double best_single = 0.0;
    for (const auto& s : lib) best_single = std::max(best_single, metrics::auc(s, y));
    CHECK(sel.auc >= best_single);
    std::size_t picks = 0;
    for (auto k : sel.multiplicity) {
      picks += k;
      repeated = repeated || k >= 2;
    }
    CHECK(picks == sel.trace.size());
  }
  // Duplication acts as weighting and is sometimes the best move.
  CHECK(repeated);
}

TEST_CASE("max-probability vote") {
  const std::vector<double> row = {0.0};
  const std::vector<ClassifierPtr> a = {fixed(0.1), fixed(0.8)};
  CHECK(vote_predict(a, row) == 0);
  const std::vector<ClassifierPtr> b = {fixed(0.7), fixed(0.7)};
  CHECK(vote_predict(b, row) == 1);
  log::reset_events();
  const std::vector<ClassifierPtr> c = {fixed(0.4), fixed(0.6)};
  CHECK(vote_predict(c, row) == 0);
  CHECK(log::event_count("prediction_tie") == 1);
}

TEST_CASE("stratified folds") {
  Rng rng(23);
  for (int it = 0; it < 100; ++it) {
    const std::size_t n = 20 + rng.below(200);
    const std::size_t k = 2 + rng.below(9);
    const auto y = support::random_labels(rng, n, 0.1 + 0.8 * rng.uniform());
    const auto f = stratified_folds(y, k, it);
    CHECK(f == stratified_folds(y, k, it));
    std::vector<std::size_t> size(k), pos(k);
    for (std::size_t i = 0; i < n; ++i) ++size[f[i]], pos[f[i]] += std::size_t(y[i]);
    const auto [smin, smax] = std::minmax_element(size.begin(), size.end());
    const auto [pmin, pmax] = std::minmax_element(pos.begin(), pos.end());
    CHECK(*smax - *smin <= 1);
    CHECK(*pmax - *pmin <= 1);
  }
  CHECK_THROWS_AS(stratified_folds(std::vector<int>{0, 1}, 3, 1), ValidationError);
}
