#include "promine/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "promine/csv.hpp"
#include "promine/error.hpp"
#include "promine/log.hpp"
#include "promine/metrics.hpp"
#include "promine/random.hpp"

namespace promine::eval {

using nlohmann::json;

std::string PipelineSpec::name() const {
  return std::string(learners::to_string(model.algorithm)) + ":" + std::string(preprocess::to_string(binning));
}

Dataset FittedPipeline::transform(const Dataset& raw) const {
  return preprocessor.apply(raw).take_columns(selected);
}

std::vector<learners::Distribution> FittedPipeline::predict(const Dataset& raw) const {
  const Dataset x = transform(raw);
  std::vector<learners::Distribution> out(x.rows());
  std::vector<double> row(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) row[c] = x.columns[c].values[r];
    out[r] = model->predict_proba(row);
  }
  return out;
}

json FittedPipeline::to_json() const {
  json trace = json::array();
  for (const auto& s : selection.trace) trace.push_back({{"step", s.step}, {"feature", s.feature}, {"auc", s.auc}});
  return {{"schema", "promine.pipeline"}, {"version", 1},
          {"name", name},                 {"preprocessor", preprocessor.to_json()},
          {"selected", selected},         {"selection_trace", trace},
          {"model", learners::model_to_json(*model)}};
}

FittedPipeline FittedPipeline::from_json(const json& j) {
  try {
    if (j.value("schema", "") != "promine.pipeline" || j.value("version", 0) != 1)
      throw SchemaError("pipeline: unsupported document schema/version");
    FittedPipeline p;
    p.name = j.at("name").get<std::string>();
    p.preprocessor = preprocess::FittedPreprocessor::from_json(j.at("preprocessor"));
    p.selected = j.at("selected").get<std::vector<std::string>>();
    if (j.contains("selection_trace"))
      for (const auto& s : j.at("selection_trace"))
        p.selection.trace.push_back(
            {s.at("step").get<std::size_t>(), s.at("feature").get<std::string>(), s.at("auc").get<double>()});
    p.selection.selected = p.selected;
    p.model = learners::model_from_json(j.at("model"));
    // The model must consume exactly the selected preprocessor outputs.
    Schema expected;
    const Schema full = p.preprocessor.output_schema();
    for (const auto& name : p.selected) {
      auto it = std::find_if(full.begin(), full.end(), [&](const FeatureInfo& f) { return f.name == name; });
      if (it == full.end()) throw SchemaError("pipeline: selected feature '" + name + "' is not produced");
      expected.push_back(*it);
    }
    if (expected != p.model->schema()) throw SchemaError("pipeline: model schema does not match preprocessor output");
    return p;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed pipeline document: ") + e.what());
  }
}

FittedPipeline fit_pipeline(const PipelineSpec& spec, const Dataset& train, std::uint64_t seed) {
  FittedPipeline p;
  p.name = spec.name();
  p.preprocessor = preprocess::fit_preprocessor(train, spec.binning);
  const Dataset x = p.preprocessor.apply(train);
  if (spec.selector == featsel::Selector::nb_wrapper) {
    auto opts = spec.wrapper;
    opts.seed = derive_seed(seed, 0x5E1);
    // Preprocessing is refit inside every inner fold: supervised cuts fit on
    // the whole training set would otherwise see the inner test labels.
    const std::size_t k = std::min(opts.inner_folds, train.rows());
    const auto assignment = learners::stratified_folds(train.target, k, opts.seed);
    std::vector<featsel::WrapperFold> folds(k);
    for (std::size_t f = 0; f < k; ++f) {
      std::vector<std::size_t> tr;
      for (std::size_t i = 0; i < train.rows(); ++i) (assignment[i] == f ? folds[f].test_rows : tr).push_back(i);
      const Dataset inner = train.take_rows(tr), held = train.take_rows(folds[f].test_rows);
      const std::size_t pos = inner.positives();
      if (pos == 0 || pos == inner.rows()) {
        // Single-class inner training part: nothing supervised can be refit.
        folds[f].train = p.preprocessor.apply(inner);
        folds[f].test = p.preprocessor.apply(held);
        continue;
      }
      const auto pre = preprocess::fit_preprocessor(inner, spec.binning);
      folds[f].train = pre.apply(inner);
      folds[f].test = pre.apply(held);
    }
    p.selection = featsel::nb_wrapper_select(folds, train.target, x.names(), opts);
    p.selected = p.selection.selected;
  } else {
    p.selected = x.names();
    p.selection.selected = p.selected;
  }
  auto model_spec = spec.model;
  model_spec.seed = derive_seed(seed, 0x30D);
  p.model = learners::train(model_spec, x.take_columns(p.selected));
  return p;
}

std::vector<std::size_t> FoldPlan::test_rows(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == f) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::train_rows(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] != f) out.push_back(i);
  return out;
}

FoldPlan make_fold_plan(std::span<const int> labels, std::size_t folds, std::uint64_t seed) {
  return {folds, seed, learners::stratified_folds(labels, folds, seed)};
}

CvResult cross_validate(const PipelineSpec& spec, const Dataset& data, std::uint64_t seed, std::size_t folds,
                        std::size_t threads) {
  data.validate();
  CvResult res;
  res.plan = make_fold_plan(data.target, folds, derive_seed(seed, 0xF0D));
  res.labels = data.target;
  res.scores.assign(data.rows(), std::numeric_limits<double>::quiet_NaN());
  res.folds.resize(folds);

  std::vector<std::string> errors(folds);
  auto run_fold = [&](std::size_t f) {
    FoldDetail& d = res.folds[f];
    d.fold = f;
    const auto tr = res.plan.train_rows(f);
    const auto te = res.plan.test_rows(f);
    d.train_rows = tr.size();
    d.test_rows = te.size();
    const Dataset train = data.take_rows(tr);
    const std::size_t pos = train.positives();
    if (pos == 0 || pos == train.rows()) {
      d.degenerate = true;
      return;
    }
    try {
      const auto fitted = fit_pipeline(spec, train, derive_seed(seed, 100 + f));
      d.selected = fitted.selected;
      d.trace = fitted.selection.trace;
      const auto pred = fitted.predict(data.take_rows(te));
      for (std::size_t i = 0; i < te.size(); ++i) res.scores[te[i]] = pred[i][1];
    } catch (const std::exception& e) {
      errors[f] = e.what();
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, folds));
  if (workers == 1) {
    for (std::size_t f = 0; f < folds; ++f) run_fold(f);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t f = next++; f < folds; f = next++) run_fold(f);
      });
    for (auto& t : pool) t.join();
  }
  for (std::size_t f = 0; f < folds; ++f)
    if (!errors[f].empty()) throw Error("fold " + std::to_string(f) + ": " + errors[f]);

  std::vector<double> s;
  std::vector<int> y, p;
  for (std::size_t f = 0; f < folds; ++f)
    if (res.folds[f].degenerate) {
      log::warn("cross_validate: fold " + std::to_string(f) + " has a single-class training part; excluded");
      log::count_event("degenerate_fold");
    }
  for (std::size_t i = 0; i < data.rows(); ++i) {
    if (std::isnan(res.scores[i])) continue;
    s.push_back(res.scores[i]);
    y.push_back(data.target[i]);
    p.push_back(learners::predicted_class({1.0 - res.scores[i], res.scores[i]}));
  }
  EvalRow& row = res.row;
  row.model = std::string(learners::to_string(spec.model.algorithm));
  row.binning = std::string(preprocess::to_string(spec.binning));
  row.n = s.size();
  if (s.empty()) throw ValidationError("cross_validate: every fold was degenerate");
  const auto cr = metrics::confusion_rates(p, y);
  row.accuracy = cr.accuracy;
  row.tp_rate = cr.tp_rate;
  row.fp_rate = cr.fp_rate;
  const auto npos = std::count(y.begin(), y.end(), 1);
  if (npos > 0 && npos < static_cast<long>(y.size())) {
    row.auc = metrics::auc(s, y);
    row.h = metrics::hand_h(s, y);
  } else {
    log::warn("cross_validate: pooled predictions contain one class; AUC and H undefined");
    row.auc = std::numeric_limits<double>::quiet_NaN();
    row.h = std::numeric_limits<double>::quiet_NaN();
  }
  return res;
}

void EvalReport::sort_by_auc() {
  std::stable_sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
    const double x = std::isnan(a.auc) ? -1.0 : a.auc, y = std::isnan(b.auc) ? -1.0 : b.auc;
    return x > y;
  });
}

namespace {

std::string pct(double x) { return std::isnan(x) ? "NA" : csv::fixed(100.0 * x, 1) + "%"; }
std::string pad(std::string s, std::size_t n) {
  if (s.size() < n) s.append(n - s.size(), ' ');
  return s;
}

}  // namespace

std::string EvalReport::text() const {
  std::size_t w = 5;
  for (const auto& r : rows) w = std::max(w, r.model.size());
  std::ostringstream os;
  os << "Pooled out-of-fold predictions, stratified " << folds << "-fold cross-validation\n";
  os << pad("Model", w + 2) << pad("Binning", 11) << pad("Accuracy", 10) << pad("AUC", 8) << pad("TP rate", 9)
     << pad("FP rate", 9) << "H\n";
  for (const auto& r : rows)
    os << pad(r.model, w + 2) << pad(r.binning, 11) << pad(pct(r.accuracy), 10) << pad(csv::fixed(r.auc, 4), 8)
       << pad(pct(r.tp_rate), 9) << pad(pct(r.fp_rate), 9) << csv::fixed(r.h, 4) << "\n";
  return os.str();
}

std::string EvalReport::csv() const {
  std::ostringstream os;
  csv::write_row(os, {"model", "binning", "accuracy", "auc", "tp_rate", "fp_rate", "h", "n"});
  for (const auto& r : rows)
    csv::write_row(os, {r.model, r.binning, csv::fixed(r.accuracy, 6), csv::fixed(r.auc, 6), csv::fixed(r.tp_rate, 6),
                        csv::fixed(r.fp_rate, 6), csv::fixed(r.h, 6), std::to_string(r.n)});
  return os.str();
}

json EvalReport::to_json() const {
  json arr = json::array();
  auto num = [](double x) { return std::isnan(x) ? json(nullptr) : json(x); };
  for (const auto& r : rows)
    arr.push_back({{"model", r.model},
                   {"binning", r.binning},
                   {"accuracy", num(r.accuracy)},
                   {"auc", num(r.auc)},
                   {"tp_rate", num(r.tp_rate)},
                   {"fp_rate", num(r.fp_rate)},
                   {"h", num(r.h)},
                   {"n", r.n}});
  return {{"metrics", "pooled out-of-fold predictions"}, {"rows", arr}};
}

std::string wrapper_trace_csv(const std::string& pipeline, const std::vector<FoldDetail>& folds) {
  std::ostringstream os;
  csv::write_row(os, {"pipeline", "fold", "step", "feature", "auc"});
  for (const auto& f : folds)
    for (const auto& s : f.trace)
      csv::write_row(os, {pipeline, std::to_string(f.fold), std::to_string(s.step), s.feature, csv::fixed(s.auc, 6)});
  return os.str();
}

}  // namespace promine::eval
