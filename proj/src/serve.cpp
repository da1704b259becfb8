#include "promine/serve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "httplib.h"
#include "promine/cohort.hpp"
#include "promine/dataset.hpp"
#include "promine/log.hpp"
#include "promine/outcomes.hpp"

namespace promine::serve {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct FieldRule {
  bool categorical = false;
  double lo = 0.0, hi = 0.0;
  bool binary = false;
};

// Request fields: the cohort predictor columns plus is_new.
const std::map<std::string, FieldRule, std::less<>>& field_rules() {
  static const auto rules = [] {
    std::map<std::string, FieldRule, std::less<>> r;
    r["bl_ors"] = {false, 0.0, cohort::kScaleMax};
    r["bl_srs"] = {false, 0.0, cohort::kScaleMax};
    r["third_delta_ors"] = {false, -cohort::kScaleMax, cohort::kScaleMax};
    r["third_delta_srs"] = {false, -cohort::kScaleMax, cohort::kScaleMax};
    r["age"] = {false, 0.0, 130.0};
    r["is_new"] = {false, 0.0, 1.0, true};
    for (const char* f : cohort::kServiceFlagColumns) r[f] = {false, 0.0, 1.0, true};
    for (const char* f : {"gender", "diag_cat", "payor_grp", "county", "region_type", "state"}) r[f] = {true};
    return r;
  }();
  return rules;
}

void check_field(const std::string& name, const json& v) {
  const auto& rules = field_rules();
  auto it = rules.find(name);
  if (it == rules.end()) throw RequestError(name, "unknown field '" + name + "'");
  const FieldRule& rule = it->second;
  if (rule.categorical) {
    if (!v.is_string() || v.get<std::string>().empty())
      throw RequestError(name, "field '" + name + "' must be a non-empty string");
    return;
  }
  if (!v.is_number()) throw RequestError(name, "field '" + name + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x) || x < rule.lo || x > rule.hi) {
    std::ostringstream os;
    os << "field '" << name << "' = " << x << " is outside [" << rule.lo << ", " << rule.hi << "]";
    throw RequestError(name, os.str());
  }
  if (rule.binary && x != 0.0 && x != 1.0) throw RequestError(name, "field '" + name + "' must be 0 or 1");
}

std::string file_fingerprint(const std::string& bytes) { return to_hex(fnv1a(bytes)); }

double cv_auc(const LoadedModel& m) {
  const auto it = m.cv.find("auc");
  return (it != m.cv.end() && it->is_number()) ? it->get<double>() : -1.0;
}

json error_body(const std::string& kind, const std::string& message) {
  return {{"error", kind}, {"message", message}};
}

}  // namespace

json PredictionResult::to_json() const {
  json preds = json::array();
  for (const auto& p : predictions)
    preds.push_back({{"model", p.model},
                     {"algorithm", p.algorithm},
                     {"binning", p.binning},
                     {"probability", p.probability},
                     {"fingerprint", p.fingerprint},
                     {"pipeline_fingerprint", p.pipeline_fingerprint}});
  return {{"predictions", preds}, {"reliable_change", reliable_change}, {"warnings", warnings}};
}

ServiceCore ServiceCore::load(const fs::path& dir) {
  ServiceCore core;
  core.source_ = dir.generic_string();
  const fs::path index_path = dir / "index.json";
  std::ifstream in(index_path);
  if (!in) throw SchemaError("cannot open model index '" + index_path.string() + "'");
  json index;
  try {
    index = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("model index: " + std::string(e.what()));
  }
  if (index.value("schema", "") != "promine.model_index" || index.value("version", 0) != 1)
    throw SchemaError("model index: unsupported schema/version");
  try {
    core.set_cohort(index.at("mean_delta").get<double>(), index.at("n").get<std::size_t>());
    for (const auto& entry : index.at("models")) {
      const fs::path path = dir / entry.at("file").get<std::string>();
      std::ifstream f(path, std::ios::binary);
      if (!f) throw SchemaError("cannot open pipeline '" + path.string() + "'");
      std::stringstream buf;
      buf << f.rdbuf();
      const std::string bytes = buf.str();
      LoadedModel m;
      m.pipeline = eval::FittedPipeline::from_json(json::parse(bytes));
      m.name = entry.at("name").get<std::string>();
      m.algorithm = entry.at("algorithm").get<std::string>();
      m.binning = entry.at("binning").get<std::string>();
      m.fingerprint = m.pipeline.model->fingerprint();
      m.pipeline_fingerprint = file_fingerprint(bytes);
      m.cv = entry.value("cv", json::object());
      if (m.pipeline.name != m.name) throw SchemaError("pipeline '" + path.string() + "' is not '" + m.name + "'");
      if (entry.at("fingerprint").get<std::string>() != m.fingerprint)
        throw SchemaError("pipeline '" + m.name + "': fingerprint does not match the index");
      core.add(std::move(m));
    }
  } catch (const json::exception& e) {
    throw SchemaError("model index: " + std::string(e.what()));
  }
  log::info("serve: loaded " + std::to_string(core.models_.size()) + " models from " + core.source_);
  return core;
}

void ServiceCore::add(LoadedModel model) {
  if (model.fingerprint.empty()) model.fingerprint = model.pipeline.model->fingerprint();
  if (model.pipeline_fingerprint.empty()) model.pipeline_fingerprint = file_fingerprint(model.pipeline.to_json().dump(2) + "\n");
  for (const auto& m : models_)
    if (m.name == model.name) throw ConfigError("serve: model '" + model.name + "' loaded twice");
  models_.push_back(std::move(model));
}

void ServiceCore::set_cohort(double mean_delta, std::size_t n) {
  mean_delta_ = mean_delta;
  cohort_n_ = n;
}

const LoadedModel& ServiceCore::resolve(const std::string& name) const {
  for (const auto& m : models_)
    if (m.name == name) return m;
  const LoadedModel* best = nullptr;
  for (const auto& m : models_)
    if (m.algorithm == name && (!best || cv_auc(m) > cv_auc(*best))) best = &m;
  if (best) return *best;
  throw NotFoundError("model '" + name + "' is not loaded");
}

const LoadedModel& ServiceCore::default_model() const {
  if (models_.empty()) throw NotFoundError("no models are loaded");
  for (const auto& m : models_)
    if (m.algorithm == "ensemble") return resolve("ensemble");
  const LoadedModel* best = &models_.front();
  for (const auto& m : models_)
    if (cv_auc(m) > cv_auc(*best)) best = &m;
  return *best;
}

Dataset ServiceCore::request_row(const eval::FittedPipeline& p, const json& features) {
  Dataset raw;
  raw.target = {0};
  for (const auto& t : p.preprocessor.columns) {
    if (!features.contains(t.name)) throw RequestError(t.name, "missing required field '" + t.name + "'");
    const json& v = features.at(t.name);
    Column c;
    c.name = t.name;
    if (t.source_kind == ColumnKind::numeric) {
      if (!v.is_number()) throw RequestError(t.name, "field '" + t.name + "' must be a number");
      c.values = {v.get<double>()};
    } else {
      if (!v.is_string()) throw RequestError(t.name, "field '" + t.name + "' must be a string");
      c.kind = t.source_kind;
      c.levels = {v.get<std::string>()};
      c.values = {0.0};
    }
    raw.columns.push_back(std::move(c));
  }
  return raw;
}

PredictionResult ServiceCore::predict(const json& request) const {
  if (!request.is_object()) throw RequestError("body", "request body must be a JSON object");
  for (const auto& [key, _] : request.items())
    if (key != "features" && key != "what_if" && key != "model" && key != "models")
      throw RequestError(key, "unknown request key '" + key + "'");
  if (!request.contains("features") || !request.at("features").is_object())
    throw RequestError("features", "missing required object 'features'");

  json merged = request.at("features");
  for (const auto& [key, v] : merged.items()) check_field(key, v);
  if (request.contains("what_if")) {
    const json& w = request.at("what_if");
    if (!w.is_object()) throw RequestError("what_if", "'what_if' must be an object");
    for (const auto& [key, v] : w.items()) {
      check_field(key, v);
      merged[key] = v;
    }
  }

  std::vector<const LoadedModel*> chosen;
  if (request.contains("models")) {
    const json& names = request.at("models");
    if (!names.is_array() || names.empty()) throw RequestError("models", "'models' must be a non-empty array");
    for (const auto& n : names) {
      if (!n.is_string()) throw RequestError("models", "model names must be strings");
      chosen.push_back(&resolve(n.get<std::string>()));
    }
  } else if (request.contains("model")) {
    if (!request.at("model").is_string()) throw RequestError("model", "'model' must be a string");
    chosen.push_back(&resolve(request.at("model").get<std::string>()));
  } else {
    chosen.push_back(&default_model());
  }

  PredictionResult out;
  std::vector<std::string> seen_warn;
  for (const LoadedModel* m : chosen) {
    const Dataset raw = request_row(m->pipeline, merged);
    for (const auto& t : m->pipeline.preprocessor.columns) {
      if (t.source_kind == ColumnKind::numeric) continue;
      const auto& sel = m->pipeline.selected;
      if (std::find(sel.begin(), sel.end(), t.name) == sel.end()) continue;  // not read by the model
      const auto v = merged.at(t.name).get<std::string>();
      if (std::find(t.levels.begin(), t.levels.end(), v) != t.levels.end()) continue;
      const std::string w = t.name + ": unseen level '" + v + "' treated as other (prior-only contribution)";
      if (std::find(seen_warn.begin(), seen_warn.end(), w) == seen_warn.end()) {
        seen_warn.push_back(w);
        log::info("serve: " + w);
      }
    }
    const auto dist = m->pipeline.predict(raw);
    out.predictions.push_back(
        {m->name, m->algorithm, m->binning, dist[0][1], m->fingerprint, m->pipeline_fingerprint});
  }
  out.warnings = seen_warn;

  const double t = outcomes::kReliableChangeThreshold;
  json rc = {{"mean_delta", mean_delta_},
             {"threshold", t},
             {"deteriorate_below", mean_delta_ - t},
             {"improve_above", mean_delta_ + t},
             {"clinical_cutoff", outcomes::kClinicalCutoff}};
  if (merged.contains("bl_ors")) {
    const double bl = merged.at("bl_ors").get<double>();
    rc["projected_final_ors"] = {
        {"low", bl + mean_delta_ - t}, {"expected", bl + mean_delta_}, {"high", bl + mean_delta_ + t}};
  }
  out.reliable_change = rc;
  return out;
}

json ServiceCore::list_models() const {
  json arr = json::array();
  for (const auto& m : models_)
    arr.push_back({{"name", m.name},
                   {"algorithm", m.algorithm},
                   {"binning", m.binning},
                   {"fingerprint", m.fingerprint},
                   {"pipeline_fingerprint", m.pipeline_fingerprint},
                   {"inputs", m.pipeline.input_columns()},
                   {"cv", m.cv}});
  json def = nullptr;
  if (!models_.empty()) def = default_model().name;
  return {{"models", arr}, {"default", def}, {"mean_delta", mean_delta_}, {"cohort_n", cohort_n_}};
}

json ServiceCore::health() const {
  return {{"status", "ok"}, {"models", models_.size()}, {"source", source_}};
}

HttpResponse handle(const ServiceCore& core, const std::string& method, const std::string& path,
                    const std::string& body) {
  try {
    if (path == "/health") {
      if (method != "GET") return {405, error_body("method_not_allowed", "use GET")};
      return {200, core.health()};
    }
    if (path == "/models") {
      if (method != "GET") return {405, error_body("method_not_allowed", "use GET")};
      return {200, core.list_models()};
    }
    if (path == "/predict") {
      if (method != "POST") return {405, error_body("method_not_allowed", "use POST")};
      json request;
      try {
        request = json::parse(body);
      } catch (const json::parse_error& e) {
        return {400, error_body("bad_request", std::string("malformed JSON: ") + e.what())};
      }
      return {200, core.predict(request).to_json()};
    }
    return {404, error_body("not_found", "no route for " + method + " " + path)};
  } catch (const RequestError& e) {
    json b = error_body("validation", e.what());
    b["field"] = e.field;
    return {422, b};
  } catch (const NotFoundError& e) {
    return {404, error_body("not_found", e.what())};
  } catch (const std::exception& e) {
    log::error(std::string("serve: ") + e.what());
    return {500, error_body("internal", e.what())};
  }
}

struct HttpServer::Impl {
  std::shared_ptr<const ServiceCore> core;
  ServerOptions options;
  httplib::Server server;
};

HttpServer::HttpServer(std::shared_ptr<const ServiceCore> core, ServerOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->core = std::move(core);
  impl_->options = std::move(options);
  auto& svr = impl_->server;
  svr.set_default_headers({{"Access-Control-Allow-Origin", impl_->options.cors_origin},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Vary", "Origin"}});
  const auto* impl = impl_.get();
  auto route = [impl](const httplib::Request& req, httplib::Response& res) {
    const auto r = handle(*impl->core, req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  svr.Get("/health", route);
  svr.Get("/models", route);
  svr.Post("/predict", route);
  svr.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  svr.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const std::string kind = res.status == 404 ? "not_found" : "error";
    res.set_content(error_body(kind, "no route for " + req.method + " " + req.path).dump(), "application/json");
  });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind() {
  auto& svr = impl_->server;
  const auto& o = impl_->options;
  if (o.port == 0) {
    const int port = svr.bind_to_any_port(o.host);
    if (port < 0) throw Error("serve: cannot bind " + o.host);
    return port;
  }
  if (!svr.bind_to_port(o.host, o.port)) throw Error("serve: cannot bind " + o.host + ":" + std::to_string(o.port));
  return o.port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace promine::serve
