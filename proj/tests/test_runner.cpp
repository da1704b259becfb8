#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <map>
#include <set>

#include "promine/error.hpp"
#include "promine/runner.hpp"
#include "support.hpp"

using namespace promine;
using namespace promine::runner;
using nlohmann::json;

namespace {

std::string error_of(const json& j) {
  try {
    ExperimentConfig::from_json(j);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

// Every regular file under dir, keyed by relative path.
std::map<std::string, std::string> tree(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).generic_string()] = support::slurp(e.path());
  return out;
}

}  // namespace

TEST_CASE("config defaults and round-trip") {
  const auto c = ExperimentConfig::from_json(json::object());
  CHECK(c.folds == 10);
  CHECK(c.seed == 42);
  CHECK(c.models.size() == learners::algorithm_names().size());
  CHECK(c.filters == std::vector<CohortFilter>{CohortFilter::all});
  CHECK(c.binnings.size() == 2);

  const json j = {{"input", {{"type", "synthetic"}, {"spec", {{"n", 300}}}}},
                  {"cohort_filter", {"all", "new_only"}},
                  {"binnings", {"CAIM"}},
                  {"models", {"knn", {{"name", "mlp"}, {"hyperparameters", {{"epochs", 20}}}}}},
                  {"folds", 4},
                  {"seed", 7},
                  {"save_models", false}};
  const auto a = ExperimentConfig::from_json(j);
  CHECK(a.input.synthetic.n == 300);
  CHECK(a.models.size() == 2);
  CHECK(std::get<learners::MlpParams>(a.models[1].params).epochs == 20);
  const auto b = ExperimentConfig::from_json(a.to_json());
  CHECK(b.to_json() == a.to_json());
  CHECK(b.hash() == a.hash());

  // Output location and thread count do not change the hash.
  auto moved = a;
  moved.output = "/elsewhere";
  moved.threads = 8;
  CHECK(moved.hash() == a.hash());
  auto reseeded = a;
  reseeded.seed = 8;
  CHECK(reseeded.hash() != a.hash());
}

TEST_CASE("config errors are explicit") {
  CHECK(error_of({{"modles", {"knn"}}}).find("valid") != std::string::npos);
  CHECK(error_of({{"models", {"svm"}}}).find("naive_bayes") != std::string::npos);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"models", {"hnb"}}}), NotImplementedError);
  CHECK(error_of({{"models", {"hnb"}}}).find("not implemented") != std::string::npos);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"selector", "su_subset"}}), NotImplementedError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"folds", 1}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"threads", 0}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"models", {"knn", "knn"}}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"features", {"shoe_size"}}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"binnings", {"equal_width"}}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"cohort_filter", "old_only"}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"input", {{"type", "sql"}}}}), ConfigError);
}

TEST_CASE("config files allow comments and resolve paths relative to themselves") {
  const auto dir = support::scratch_dir("cfg");
  {
    std::ofstream out(dir / "c.json");
    out << "// a comment\n{\n  \"input\": {\"type\": \"cohort\", \"path\": \"data/cohort.csv\"}, // trailing\n"
           "  \"output\": \"out\"\n}\n";
  }
  const auto c = load_config(dir / "c.json");
  CHECK(c.input.kind == InputKind::cohort);
  CHECK(c.input.cohort == dir / "data/cohort.csv");
  CHECK(c.output == dir / "out");
  CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
}

TEST_CASE("two models, both binnings, new clients: four rows sorted by AUC") {
  const auto dir = support::scratch_dir("four_rows");
  auto c = ExperimentConfig::from_json({{"cohort_filter", "new_only"}, {"models", {"naive_bayes", "ensemble"}}});
  c.output = dir;
  const auto summary = run_experiment(c);
  CHECK(summary.cohort_rows == 714);
  const auto report = json::parse(support::slurp(dir / "new_only" / "eval_report.json"));
  const auto& rows = report["rows"];
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(rows[i]["n"] == 253);
    if (i) CHECK(rows[i]["auc"].get<double>() <= rows[i - 1]["auc"].get<double>());
  }
  std::set<std::string> combos;
  for (const auto& r : rows) combos.insert(r["model"].get<std::string>() + ":" + r["binning"].get<std::string>());
  CHECK(combos == std::set<std::string>{"ensemble:BinTarget", "ensemble:CAIM", "naive_bayes:BinTarget",
                                        "naive_bayes:CAIM"});

  // Manifest lists every file with its size and hash.
  const auto manifest = json::parse(support::slurp(dir / "manifest.json"));
  CHECK(manifest["config_hash"] == c.hash());
  for (const auto& [rel, meta] : manifest["files"].items()) {
    const auto bytes = support::slurp(dir / rel);
    CHECK(meta["bytes"] == bytes.size());
    CHECK(meta["fnv1a"] == to_hex(fnv1a(bytes)));
  }
  CHECK(std::filesystem::exists(dir / "new_only" / "models" / "index.json"));
  CHECK(std::filesystem::exists(dir / "new_only" / "models" / "naive_bayes_CAIM.json"));
  CHECK(std::filesystem::exists(dir / "outcomes.txt"));
  CHECK(std::filesystem::exists(dir / "new_only" / "odds_ratios.csv"));
}

TEST_CASE("same seed, same bytes; thread count does not matter") {
  const json j = {{"input", {{"type", "synthetic"}, {"spec", {{"n", 240}}}}},
                  {"models", {"naive_bayes", "c45_tree", "random_forest"}},
                  {"folds", 5}};
  auto a = ExperimentConfig::from_json(j);
  auto b = a;
  a.output = support::scratch_dir("det_a");
  b.output = support::scratch_dir("det_b");
  b.threads = 3;
  run_experiment(a);
  run_experiment(b);
  const auto ta = tree(a.output), tb = tree(b.output);
  CHECK(ta.size() == tb.size());
  CHECK(ta == tb);

  auto c = a;
  c.seed = 43;
  c.output = support::scratch_dir("det_c");
  run_experiment(c);
  CHECK(tree(c.output) != ta);
}

TEST_CASE("describe writes only cohort and outcome reports") {
  auto c = ExperimentConfig::from_json({{"input", {{"type", "synthetic"}, {"spec", {{"n", 200}}}}}});
  c.output = support::scratch_dir("describe");
  const auto s = describe(c);
  CHECK(s.cohort_rows == 200);
  CHECK(std::filesystem::exists(c.output / "descriptives.txt"));
  CHECK(!std::filesystem::exists(c.output / "all"));
}

TEST_CASE("cohort input from a CSV file") {
  const auto dir = support::scratch_dir("cohort_in");
  auto gen = ExperimentConfig::from_json({{"input", {{"type", "synthetic"}, {"spec", {{"n", 150}}}}}});
  gen.output = dir / "gen";
  describe(gen);
  auto c = ExperimentConfig::from_json(
      {{"input", {{"type", "cohort"}, {"path", (dir / "gen" / "cohort.csv").string()}}}});
  const auto rows = load_cohort(c);
  CHECK(rows == load_cohort(gen));
}
