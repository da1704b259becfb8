#include "promine/runner.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "promine/csv.hpp"
#include "promine/dataset.hpp"
#include "promine/error.hpp"
#include "promine/eval.hpp"
#include "promine/log.hpp"
#include "promine/outcomes.hpp"
#include "promine/random.hpp"

namespace promine::runner {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(CohortFilter f) { return f == CohortFilter::all ? "all" : "new_only"; }

namespace {

CohortFilter filter_from_string(const std::string& s) {
  if (s == "all") return CohortFilter::all;
  if (s == "new_only") return CohortFilter::new_only;
  throw ConfigError("cohort_filter: unknown filter '" + s + "' (valid: all, new_only)");
}

std::string_view input_kind_name(InputKind k) {
  switch (k) {
    case InputKind::synthetic: return "synthetic";
    case InputKind::sessions: return "sessions";
    case InputKind::cohort: return "cohort";
  }
  return "synthetic";
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      std::string valid;
      for (auto a : allowed) valid += (valid.empty() ? "" : ", ") + std::string(a);
      throw ConfigError(where + ": unknown key '" + key + "' (valid: " + valid + ")");
    }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

json model_entry_json(const learners::ClassifierSpec& s) {
  const json j = s.to_json();
  return {{"name", j.at("algorithm")}, {"hyperparameters", j.at("hyperparameters")}};
}

learners::ClassifierSpec model_entry_from_json(const json& m) {
  if (m.is_string()) return learners::ClassifierSpec::make(m.get<std::string>());
  check_keys(m, {"name", "hyperparameters"}, "models[]");
  if (!m.contains("name") || !m.at("name").is_string()) throw ConfigError("models[]: entry needs a string 'name'");
  return learners::ClassifierSpec::make(m.at("name").get<std::string>(), m.value("hyperparameters", json::object()));
}

// Files are collected in memory and written in one pass so the manifest can
// hash exactly what lands on disk.
class OutputDir {
 public:
  explicit OutputDir(fs::path root) : root_(std::move(root)) {}

  void add(const fs::path& rel, std::string content) { files_[rel.generic_string()] = std::move(content); }
  void add_json(const fs::path& rel, const json& j) { add(rel, j.dump(2) + "\n"); }

  RunSummary flush(const json& manifest_head) {
    json files = json::object();
    for (const auto& [rel, content] : files_)
      files[rel] = {{"bytes", content.size()}, {"fnv1a", to_hex(fnv1a(content))}};
    json manifest = manifest_head;
    manifest["files"] = files;
    add_json("manifest.json", manifest);

    RunSummary summary;
    for (const auto& [rel, content] : files_) {
      const fs::path path = root_ / rel;
      fs::create_directories(path.parent_path());
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write '" + path.string() + "'");
      out << content;
      if (!out) throw Error("write failed for '" + path.string() + "'");
      summary.files.emplace_back(rel);
    }
    return summary;
  }

 private:
  fs::path root_;
  std::map<std::string, std::string> files_;  // sorted by relative path
};

json manifest_head(const ExperimentConfig& c, const std::string& command) {
  return {{"tool", "promine"}, {"version", kVersion}, {"command", command}, {"config_hash", c.hash()},
          {"seed", c.seed}};
}

void add_cohort_reports(OutputDir& out, const ExperimentConfig& c, const std::vector<cohort::CohortRow>& rows) {
  // Output location and thread count do not affect results; leaving them out
  // keeps reruns into different directories byte-identical.
  json normalized = c.to_json();
  normalized.erase("output");
  normalized.erase("threads");
  out.add_json("config.json", normalized);
  std::ostringstream cohort_csv;
  cohort::write_cohort(cohort_csv, rows);
  out.add("cohort.csv", cohort_csv.str());
  out.add("descriptives.txt", outcomes::descriptives_text(rows));
  out.add("descriptives.csv", outcomes::descriptives_csv(rows));
  const auto table = outcomes::crosstab(rows);
  out.add("outcomes.txt", outcomes::crosstab_text(table) + "\n" + outcomes::reliable_change_text(rows));
  out.add("outcomes.csv", outcomes::crosstab_csv(table));
}

std::string file_stem(const eval::PipelineSpec& p) {
  return std::string(learners::to_string(p.model.algorithm)) + "_" + std::string(preprocess::to_string(p.binning));
}

std::string folds_csv(const std::string& pipeline, const std::vector<eval::FoldDetail>& folds) {
  std::ostringstream os;
  for (const auto& f : folds) {
    std::string sel;
    for (const auto& s : f.selected) sel += (sel.empty() ? "" : ";") + s;
    csv::write_row(os, {pipeline, std::to_string(f.fold), std::to_string(f.train_rows), std::to_string(f.test_rows),
                        f.degenerate ? "1" : "0", sel});
  }
  return os.str();
}

void run_filter(OutputDir& out, const ExperimentConfig& c, std::size_t index,
                const std::vector<cohort::CohortRow>& all_rows) {
  const CohortFilter filter = c.filters[index];
  const fs::path dir = std::string(to_string(filter));
  std::vector<cohort::CohortRow> rows;
  for (const auto& r : all_rows)
    if (filter == CohortFilter::all || r.is_new == 1) rows.push_back(r);
  if (rows.empty()) throw ValidationError("cohort filter '" + std::string(to_string(filter)) + "' selects no rows");

  auto table = cohort::to_feature_table(rows, c.features);
  if (table.dropped_incomplete > 0)
    log::warn("filter " + std::string(to_string(filter)) + ": dropped " + std::to_string(table.dropped_incomplete) +
              " rows with missing feature values");
  const auto target = preprocess::binarize_target(table.outcome);
  if (target.target.degenerate)
    throw ValidationError("filter " + std::string(to_string(filter)) + ": target has a single class");
  Dataset data = std::move(table.data);
  data.target = target.labels;
  log::info("filter " + std::string(to_string(filter)) + ": n=" + std::to_string(data.rows()) +
            ", above-mean=" + std::to_string(data.positives()));

  const std::uint64_t cv_seed = derive_seed(c.seed, index);
  eval::EvalReport report;
  report.folds = c.folds;
  std::string traces, fold_rows;
  {
    std::ostringstream head;
    csv::write_row(head, {"pipeline", "fold", "train_rows", "test_rows", "degenerate", "selected"});
    fold_rows = head.str();
  }
  bool first_trace = true;
  json index_models = json::array();

  for (const auto& model : c.models)
    for (const auto binning : c.binnings) {
      eval::PipelineSpec spec{model, binning, c.selector, c.wrapper};
      log::info("cross-validating " + spec.name());
      const auto cv = eval::cross_validate(spec, data, cv_seed, c.folds, c.threads);
      report.rows.push_back(cv.row);
      std::string t = eval::wrapper_trace_csv(spec.name(), cv.folds);
      if (!first_trace) t.erase(0, t.find('\n') + 1);  // one header per file
      traces += t;
      first_trace = false;
      fold_rows += folds_csv(spec.name(), cv.folds);

      if (c.save_models) {
        const auto fitted = eval::fit_pipeline(spec, data, derive_seed(cv_seed, 0xF17));
        const std::string file = file_stem(spec) + ".json";
        out.add_json(dir / "models" / file, fitted.to_json());
        auto num = [](double x) { return std::isnan(x) ? json(nullptr) : json(x); };
        index_models.push_back({{"name", spec.name()},
                                {"file", file},
                                {"algorithm", std::string(learners::to_string(model.algorithm))},
                                {"binning", std::string(preprocess::to_string(binning))},
                                {"fingerprint", fitted.model->fingerprint()},
                                {"inputs", fitted.input_columns()},
                                {"cv",
                                 {{"accuracy", num(cv.row.accuracy)},
                                  {"auc", num(cv.row.auc)},
                                  {"tp_rate", num(cv.row.tp_rate)},
                                  {"fp_rate", num(cv.row.fp_rate)},
                                  {"h", num(cv.row.h)},
                                  {"n", cv.row.n}}}});
      }
    }

  report.sort_by_auc();
  out.add(dir / "eval_report.txt", report.text());
  out.add(dir / "eval_report.csv", report.csv());
  out.add_json(dir / "eval_report.json", report.to_json());
  out.add(dir / "selection_trace.csv", traces);
  out.add(dir / "folds.csv", fold_rows);

  const auto ors = featsel::odds_ratio_table(data);
  out.add(dir / "odds_ratios.txt", featsel::odds_ratio_text(ors));
  out.add(dir / "odds_ratios.csv", featsel::odds_ratio_csv(ors));

  // Filter-style rankings on the CAIM-discretized table (chi-square needs
  // discrete inputs; Relief-F runs on the same view for comparability).
  const auto discrete = preprocess::fit_preprocessor(data, preprocess::Binning::caim).apply(data);
  std::string rankings = featsel::feature_scores_csv(featsel::chi2_rank(discrete), "chi2");
  std::string relief = featsel::feature_scores_csv(featsel::relief_f(discrete, 10, 0, derive_seed(cv_seed, 0x2E1)),
                                                   "relief_f");
  rankings += relief.substr(relief.find('\n') + 1);
  out.add(dir / "feature_rankings.csv", rankings);

  if (c.save_models)
    out.add_json(dir / "models" / "index.json",
                 {{"schema", "promine.model_index"},
                  {"version", 1},
                  {"cohort_filter", std::string(to_string(filter))},
                  {"n", data.rows()},
                  {"mean_delta", target.target.threshold},
                  {"reliable_change_threshold", outcomes::kReliableChangeThreshold},
                  {"clinical_cutoff", outcomes::kClinicalCutoff},
                  {"models", index_models}});
}

}  // namespace

json ExperimentConfig::to_json() const {
  json in;
  in["type"] = std::string(input_kind_name(input.kind));
  switch (input.kind) {
    case InputKind::synthetic: {
      json spec = cohort::to_json(input.synthetic);
      if (!input.synthetic_seed_set) spec.erase("seed");
      in["spec"] = spec;
      break;
    }
    case InputKind::sessions:
      in["sessions"] = input.sessions.generic_string();
      in["clients"] = input.clients.generic_string();
      break;
    case InputKind::cohort: in["path"] = input.cohort.generic_string(); break;
  }
  json f = json::array();
  for (auto x : filters) f.push_back(std::string(to_string(x)));
  json b = json::array();
  for (auto x : binnings) b.push_back(std::string(preprocess::to_string(x)));
  json m = json::array();
  for (const auto& s : models) m.push_back(model_entry_json(s));
  return {{"input", in},
          {"cohort_filter", f},
          {"binnings", b},
          {"selector", std::string(featsel::to_string(selector))},
          {"wrapper",
           {{"inner_folds", wrapper.inner_folds}, {"epsilon", wrapper.epsilon}, {"max_features", wrapper.max_features}}},
          {"models", m},
          {"features", features},
          {"folds", folds},
          {"seed", seed},
          {"output", output.generic_string()},
          {"save_models", save_models},
          {"threads", threads}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const fs::path& base_dir) {
  check_keys(j, {"input", "cohort_filter", "binnings", "selector", "wrapper", "models", "features", "folds", "seed",
                 "output", "save_models", "threads"},
             "config");
  ExperimentConfig c;
  try {
    if (j.contains("input")) {
      const json& in = j.at("input");
      if (!in.is_object() || !in.contains("type")) throw ConfigError("input: needs a 'type'");
      const auto type = in.at("type").get<std::string>();
      if (type == "synthetic") {
        check_keys(in, {"type", "spec"}, "input");
        c.input.kind = InputKind::synthetic;
        const json spec = in.value("spec", json::object());
        c.input.synthetic = cohort::cohort_spec_from_json(spec);
        c.input.synthetic_seed_set = spec.contains("seed");
      } else if (type == "sessions") {
        check_keys(in, {"type", "sessions", "clients"}, "input");
        c.input.kind = InputKind::sessions;
        if (!in.contains("sessions") || !in.contains("clients"))
          throw ConfigError("input: sessions input needs 'sessions' and 'clients' paths");
        c.input.sessions = resolve(base_dir, in.at("sessions").get<std::string>());
        c.input.clients = resolve(base_dir, in.at("clients").get<std::string>());
      } else if (type == "cohort") {
        check_keys(in, {"type", "path"}, "input");
        c.input.kind = InputKind::cohort;
        if (!in.contains("path")) throw ConfigError("input: cohort input needs a 'path'");
        c.input.cohort = resolve(base_dir, in.at("path").get<std::string>());
      } else {
        throw ConfigError("input: unknown type '" + type + "' (valid: synthetic, sessions, cohort)");
      }
    }
    if (j.contains("cohort_filter")) {
      const json& f = j.at("cohort_filter");
      c.filters.clear();
      if (f.is_string()) {
        c.filters.push_back(filter_from_string(f.get<std::string>()));
      } else {
        for (const auto& x : f) c.filters.push_back(filter_from_string(x.get<std::string>()));
      }
    }
    if (j.contains("binnings")) {
      c.binnings.clear();
      for (const auto& x : j.at("binnings")) c.binnings.push_back(preprocess::binning_from_string(x.get<std::string>()));
    }
    if (j.contains("selector")) c.selector = featsel::selector_from_string(j.at("selector").get<std::string>());
    if (j.contains("wrapper")) {
      const json& w = j.at("wrapper");
      check_keys(w, {"inner_folds", "epsilon", "max_features"}, "wrapper");
      c.wrapper.inner_folds = w.value("inner_folds", c.wrapper.inner_folds);
      c.wrapper.epsilon = w.value("epsilon", c.wrapper.epsilon);
      c.wrapper.max_features = w.value("max_features", c.wrapper.max_features);
    }
    if (j.contains("models")) {
      for (const auto& m : j.at("models")) c.models.push_back(model_entry_from_json(m));
    } else {
      for (const auto& name : learners::algorithm_names()) c.models.push_back(learners::ClassifierSpec::make(name));
    }
    if (j.contains("features")) c.features = j.at("features").get<std::vector<std::string>>();
    c.folds = j.value("folds", c.folds);
    c.seed = j.value("seed", c.seed);
    if (j.contains("output")) c.output = resolve(base_dir, j.at("output").get<std::string>());
    c.save_models = j.value("save_models", c.save_models);
    c.threads = j.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (c.filters.empty()) throw ConfigError("cohort_filter: at least one filter is required");
  if (std::set<CohortFilter>(c.filters.begin(), c.filters.end()).size() != c.filters.size())
    throw ConfigError("cohort_filter: duplicate filter");
  if (c.binnings.empty()) throw ConfigError("binnings: at least one binning is required");
  if (std::set<preprocess::Binning>(c.binnings.begin(), c.binnings.end()).size() != c.binnings.size())
    throw ConfigError("binnings: duplicate binning");
  if (c.models.empty()) throw ConfigError("models: at least one model is required");
  {
    std::set<learners::Algorithm> seen;
    for (const auto& m : c.models)
      if (!seen.insert(m.algorithm).second)
        throw ConfigError("models: '" + std::string(learners::to_string(m.algorithm)) + "' listed twice");
  }
  if (c.features.empty()) throw ConfigError("features: at least one feature is required");
  {
    std::set<std::string> seen;
    const auto& known = cohort::default_features();
    for (const auto& f : c.features) {
      if (f != "is_new" && std::find(known.begin(), known.end(), f) == known.end())
        throw ConfigError("features: unknown feature '" + f + "'");
      if (!seen.insert(f).second) throw ConfigError("features: '" + f + "' listed twice");
    }
  }
  if (c.folds < 2) throw ConfigError("folds: must be at least 2");
  if (c.wrapper.inner_folds < 2) throw ConfigError("wrapper.inner_folds: must be at least 2");
  if (!(c.wrapper.epsilon >= 0.0)) throw ConfigError("wrapper.epsilon: must be non-negative");
  if (c.threads < 1) throw ConfigError("threads: must be at least 1");
  if (c.input.kind == InputKind::synthetic) {
    try {
      c.input.synthetic.validate();
    } catch (const ValidationError& e) {
      throw ConfigError(std::string("input.spec: ") + e.what());
    }
  }
  return c;
}

std::string ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("output");
  j.erase("threads");
  return to_hex(fnv1a(j.dump()));
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return ExperimentConfig::from_json(j, path.parent_path());
}

std::vector<cohort::CohortRow> load_cohort(const ExperimentConfig& c) {
  switch (c.input.kind) {
    case InputKind::synthetic: {
      auto spec = c.input.synthetic;
      if (!c.input.synthetic_seed_set) spec.seed = c.seed;
      return cohort::generate_synthetic(spec);
    }
    case InputKind::sessions: {
      const auto sessions = cohort::read_sessions_file(c.input.sessions);
      const auto profiles = cohort::read_profiles_file(c.input.clients);
      std::vector<cohort::Exclusion> excluded;
      auto rows = cohort::assemble_cohort(sessions, profiles, &excluded);
      log::info("cohort: " + std::to_string(rows.size()) + " clients included, " + std::to_string(excluded.size()) +
                " excluded");
      return rows;
    }
    case InputKind::cohort: return cohort::read_cohort_file(c.input.cohort);
  }
  return {};
}

RunSummary describe(const ExperimentConfig& config) {
  const auto rows = load_cohort(config);
  OutputDir out(config.output);
  add_cohort_reports(out, config, rows);
  auto summary = out.flush(manifest_head(config, "describe"));
  summary.cohort_rows = rows.size();
  return summary;
}

RunSummary run_experiment(const ExperimentConfig& config) {
  const auto rows = load_cohort(config);
  OutputDir out(config.output);
  add_cohort_reports(out, config, rows);
  for (std::size_t i = 0; i < config.filters.size(); ++i) run_filter(out, config, i, rows);
  auto summary = out.flush(manifest_head(config, "run"));
  summary.cohort_rows = rows.size();
  return summary;
}

}  // namespace promine::runner
