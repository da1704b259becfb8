#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <thread>

#include "httplib.h"
#include "promine/cohort.hpp"
#include "promine/error.hpp"
#include "promine/runner.hpp"
#include "promine/serve.hpp"
#include "support.hpp"

using namespace promine;
using namespace promine::serve;
using nlohmann::json;

namespace {

// One small runner output shared by the suite.
const std::filesystem::path& models_dir() {
  static const std::filesystem::path dir = [] {
    const auto out = support::scratch_dir("serve_models");
    auto c = runner::ExperimentConfig::from_json({{"input", {{"type", "synthetic"}, {"spec", {{"n", 300}}}}},
                                                  {"models", {"naive_bayes", "logistic", "ensemble"}},
                                                  {"folds", 3}});
    c.output = out;
    runner::run_experiment(c);
    return out / "all" / "models";
  }();
  return dir;
}

const ServiceCore& core() {
  static const ServiceCore c = ServiceCore::load(models_dir());
  return c;
}

// Request features for row r of a raw feature table.
json features_of(const Dataset& raw, std::size_t r) {
  json f = json::object();
  for (const auto& c : raw.columns)
    if (c.kind == ColumnKind::numeric) f[c.name] = c.values[r];
    else f[c.name] = c.levels[static_cast<std::size_t>(c.values[r])];
  return f;
}

const cohort::FeatureTable& table() {
  static const auto t = [] {
    auto spec = cohort::CohortSpec::defaults();
    spec.n = 300;
    spec.seed = 7;
    const auto rows = cohort::generate_synthetic(spec);
    return cohort::to_feature_table(rows, cohort::default_features());
  }();
  return t;
}

// Logistic over z-scored bl_ors and third_delta_ors with the bl_ors weight
// zeroed and the third_delta_ors weight forced positive.
LoadedModel monotone_model() {
  Rng rng(3);
  std::vector<double> bl(200), td(200);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    bl[i] = std::round(rng.uniform(5, 35));
    td[i] = std::round(rng.uniform(-10, 15));
    y[i] = rng.bernoulli(1 / (1 + std::exp(-0.2 * td[i]))) ? 1 : 0;
  }
  const auto d = support::make({support::numeric("bl_ors", bl), support::numeric("third_delta_ors", td)}, y);
  eval::PipelineSpec spec;
  spec.model = learners::ClassifierSpec::make("logistic");
  spec.selector = featsel::Selector::none;
  auto p = eval::fit_pipeline(spec, d, 1);
  auto doc = p.to_json();
  auto& w = doc["model"]["fitted"]["weights"];
  w[0] = 0.0;
  w[1] = std::abs(w[1].get<double>());
  p = eval::FittedPipeline::from_json(doc);
  LoadedModel m;
  m.name = "logistic:BinTarget";
  m.algorithm = "logistic";
  m.binning = "BinTarget";
  m.pipeline = p;
  m.cv = {{"auc", 0.5}};
  return m;
}

}  // namespace

TEST_CASE("loaded service lists its models with the index metrics") {
  const auto list = core().list_models();
  REQUIRE(list["models"].size() == 6);
  CHECK(list["default"].get<std::string>().rfind("ensemble:", 0) == 0);
  const auto index = json::parse(support::slurp(models_dir() / "index.json"));
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& entry = index["models"][i];
    const auto& m = list["models"][i];
    CHECK(m["name"] == entry["name"]);
    CHECK(m["cv"] == entry["cv"]);
    CHECK(m["pipeline_fingerprint"] == to_hex(fnv1a(support::slurp(models_dir() / entry["file"].get<std::string>()))));
  }
  CHECK(core().health()["models"] == 6);
  CHECK(ServiceCore().list_models()["models"].empty());
  CHECK(ServiceCore().list_models()["default"].is_null());
}

TEST_CASE("service predictions are bit-identical to the library") {
  const auto& t = table();
  for (const auto& m : core().loaded()) {
    const auto offline = eval::FittedPipeline::from_json(
        json::parse(support::slurp(models_dir() / (m.algorithm + "_" + m.binning + ".json"))));
    const auto expected = offline.predict(t.data);
    for (std::size_t r = 0; r < 100; ++r) {
      const auto res = core().predict({{"features", features_of(t.data, r)}, {"model", m.name}});
      REQUIRE(res.predictions.size() == 1);
      CHECK(res.predictions[0].probability == expected[r][1]);
      CHECK(res.predictions[0].pipeline_fingerprint == m.pipeline_fingerprint);
    }
  }
}

TEST_CASE("model resolution and multi-model requests") {
  const auto f = features_of(table().data, 0);
  const auto bare = core().predict({{"features", f}, {"model", "naive_bayes"}});
  CHECK(bare.predictions[0].algorithm == "naive_bayes");
  const auto two = core().predict({{"features", f}, {"models", {"naive_bayes:CAIM", "logistic:BinTarget"}}});
  REQUIRE(two.predictions.size() == 2);
  CHECK(two.predictions[1].model == "logistic:BinTarget");
  const auto def = core().predict({{"features", f}});
  CHECK(def.predictions[0].algorithm == "ensemble");
  for (const auto& p : two.predictions) {
    CHECK(p.probability >= 0.0);
    CHECK(p.probability <= 1.0);
  }
  // Reliable-change band around the cohort mean delta.
  const auto rc = def.reliable_change;
  CHECK(rc["improve_above"].get<double>() - rc["deteriorate_below"].get<double>() == doctest::Approx(8.0));
  CHECK(rc["projected_final_ors"]["expected"].get<double>() ==
        doctest::Approx(f["bl_ors"].get<double>() + core().mean_delta()));
}

TEST_CASE("what-if overrides replace fields before transformation") {
  auto f = features_of(table().data, 1);
  auto g = f;
  g["third_delta_ors"] = 9.0;
  const auto direct = core().predict({{"features", g}, {"model", "logistic:BinTarget"}});
  const auto over = core().predict({{"features", f}, {"what_if", {{"third_delta_ors", 9.0}}}, {"model", "logistic:BinTarget"}});
  CHECK(direct.predictions[0].probability == over.predictions[0].probability);
}

TEST_CASE("status codes from the dispatcher") {
  const auto f = features_of(table().data, 2);
  auto post = [](const json& body) { return handle(core(), "POST", "/predict", body.dump()); };
  CHECK(post({{"features", f}}).status == 200);

  auto bad = f;
  bad["bl_ors"] = 48;
  auto r = post({{"features", bad}});
  CHECK(r.status == 422);
  CHECK(r.body["field"] == "bl_ors");

  auto missing = f;
  missing.erase("age");
  r = post({{"features", missing}});
  CHECK(r.status == 422);
  CHECK(r.body["field"] == "age");

  auto flag = f;
  flag["q_medical_bin"] = 0.5;
  CHECK(post({{"features", flag}}).body["field"] == "q_medical_bin");
  auto extra = f;
  extra["shoe_size"] = 9;
  CHECK(post({{"features", extra}}).body["field"] == "shoe_size");
  CHECK(post({{"features", f}, {"colour", "red"}}).status == 422);
  CHECK(post({{"features", f}, {"what_if", {{"bl_srs", -1}}}}).status == 422);

  CHECK(post({{"features", f}, {"model", "svm"}}).status == 404);
  CHECK(handle(core(), "POST", "/predict", "{not json").status == 400);
  CHECK(handle(core(), "GET", "/predict", "").status == 405);
  CHECK(handle(core(), "POST", "/health", "").status == 405);
  CHECK(handle(core(), "GET", "/nowhere", "").status == 404);
  const auto err = handle(core(), "GET", "/nowhere", "");
  CHECK(err.body.contains("error"));
  CHECK(err.body.contains("message"));
  CHECK(handle(ServiceCore(), "POST", "/predict", json{{"features", f}}.dump()).status == 404);
}

TEST_CASE("unseen categorical levels are warned about, not rejected") {
  auto f = features_of(table().data, 3);
  f["payor_grp"] = "Barter";
  f["gender"] = "Unlisted";
  const auto res = core().predict({{"features", f}, {"models", {"naive_bayes:CAIM", "logistic:CAIM"}}});
  CHECK(res.predictions.size() == 2);
  for (const auto& w : res.warnings) CHECK(w.find("unseen level") != std::string::npos);
}

TEST_CASE("zero-weight logistic service answers one half") {
  auto m = monotone_model();
  auto doc = m.pipeline.to_json();
  doc["model"]["fitted"]["intercept"] = 0.0;
  for (auto& w : doc["model"]["fitted"]["weights"]) w = 0.0;
  m.pipeline = eval::FittedPipeline::from_json(doc);
  ServiceCore c;
  c.add(m);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto res = c.predict({{"features", {{"bl_ors", rng.uniform(0, 40)}, {"third_delta_ors", rng.uniform(-40, 40)}}}});
    CHECK(res.predictions[0].probability == 0.5);
  }
}

TEST_CASE("what-if sweep is monotone under a positive-sign model") {
  ServiceCore c;
  c.add(monotone_model());
  double prev = -1.0;
  for (double td = -10; td <= 10; td += 0.5) {
    const auto p = c.predict({{"features", {{"bl_ors", 18}, {"third_delta_ors", 0}}},
                              {"what_if", {{"third_delta_ors", td}}}})
                       .predictions[0]
                       .probability;
    CHECK(p >= prev);
    prev = p;
  }
  CHECK(prev > 0.5);
}

TEST_CASE("concurrent identical requests get identical responses") {
  const json req = {{"features", features_of(table().data, 4)}, {"models", {"ensemble", "naive_bayes", "logistic"}}};
  const auto expected = core().predict(req).to_json().dump();
  std::vector<std::thread> pool;
  std::vector<std::string> got(8 * 25);
  for (int t = 0; t < 8; ++t)
    pool.emplace_back([&, t] {
      for (int k = 0; k < 25; ++k) got[std::size_t(t * 25 + k)] = core().predict(req).to_json().dump();
    });
  for (auto& th : pool) th.join();
  for (const auto& g : got) CHECK(g == expected);
}

TEST_CASE("index and pipeline mismatch is refused at load") {
  const auto dir = support::scratch_dir("serve_tampered");
  for (const auto& e : std::filesystem::directory_iterator(models_dir()))
    std::filesystem::copy_file(e.path(), dir / e.path().filename());
  auto index = json::parse(support::slurp(dir / "index.json"));
  index["models"][0]["fingerprint"] = "deadbeefdeadbeef";
  std::ofstream(dir / "index.json") << index.dump();
  CHECK_THROWS_AS(ServiceCore::load(dir), SchemaError);
  CHECK_THROWS_AS(ServiceCore::load(dir / "nope"), SchemaError);
}

TEST_CASE("HTTP server on an ephemeral port") {
  auto shared = std::make_shared<const ServiceCore>(core());
  ServerOptions opts;
  opts.port = 0;
  opts.cors_origin = "http://console.local";
  HttpServer server(shared, opts);
  const int port = server.bind();
  REQUIRE(port > 0);
  std::thread th([&] { server.listen(); });

  httplib::Client cli("127.0.0.1", port);
  auto h = cli.Get("/health");
  REQUIRE(h);
  CHECK(h->status == 200);
  CHECK(h->get_header_value("Access-Control-Allow-Origin") == "http://console.local");
  CHECK(json::parse(h->body)["status"] == "ok");

  const auto f = features_of(table().data, 5);
  auto p = cli.Post("/predict", json{{"features", f}, {"model", "naive_bayes:CAIM"}}.dump(), "application/json");
  REQUIRE(p);
  CHECK(p->status == 200);
  const auto body = json::parse(p->body);
  CHECK(body["predictions"][0]["probability"].get<double>() ==
        core().predict({{"features", f}, {"model", "naive_bayes:CAIM"}}).predictions[0].probability);

  auto bad = f;
  bad["bl_ors"] = 48;
  auto e = cli.Post("/predict", json{{"features", bad}}.dump(), "application/json");
  REQUIRE(e);
  CHECK(e->status == 422);
  CHECK(json::parse(e->body)["field"] == "bl_ors");

  auto o = cli.Options("/predict");
  REQUIRE(o);
  CHECK(o->status == 204);
  CHECK(!o->get_header_value("Access-Control-Allow-Methods").empty());

  auto nf = cli.Get("/missing");
  REQUIRE(nf);
  CHECK(nf->status == 404);
  CHECK(json::parse(nf->body).contains("error"));

  server.stop();
  th.join();
}
