#pragma once

// Prediction service over frozen pipelines written by the runner.
//
// ServiceCore is immutable after construction and safe to share across
// request threads. handle() is the transport-independent dispatcher the HTTP
// server wraps, so routing and status codes are testable without sockets.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "promine/error.hpp"
#include "promine/eval.hpp"

namespace promine::serve {

struct LoadedModel {
  std::string name;  // "<algorithm>:<binning>"
  std::string algorithm;
  std::string binning;
  std::string fingerprint;           // model input schema
  std::string pipeline_fingerprint;  // FNV-1a of the pipeline document
  nlohmann::json cv = nlohmann::json::object();  // metrics from the training index
  eval::FittedPipeline pipeline;
};

struct Prediction {
  std::string model;
  std::string algorithm;
  std::string binning;
  double probability = 0.5;  // P(final delta above the cohort mean)
  std::string fingerprint;
  std::string pipeline_fingerprint;
};

struct PredictionResult {
  std::vector<Prediction> predictions;
  std::vector<std::string> warnings;
  nlohmann::json reliable_change;  // band around the cohort mean delta

  nlohmann::json to_json() const;
};

class ServiceCore {
 public:
  ServiceCore() = default;

  // Reads <dir>/index.json and every pipeline it lists. Throws SchemaError when
  // a pipeline does not match its index entry.
  static ServiceCore load(const std::filesystem::path& models_dir);

  // Registers an in-memory pipeline (tests, embedding).
  void add(LoadedModel model);
  void set_cohort(double mean_delta, std::size_t n);

  const std::vector<LoadedModel>& loaded() const { return models_; }
  double mean_delta() const { return mean_delta_; }

  // Request: {"features": {...}, "what_if": {...}, "model": name | "models": [names]}.
  // Throws RequestError (422) naming the field, NotFoundError (404) for an
  // unknown model.
  PredictionResult predict(const nlohmann::json& request) const;

  // Raw single-row table for one pipeline from already-merged feature values.
  static Dataset request_row(const eval::FittedPipeline& p, const nlohmann::json& features);

  nlohmann::json list_models() const;
  nlohmann::json health() const;

  // Exact name, or a bare algorithm resolved to its best-AUC binning.
  const LoadedModel& resolve(const std::string& name) const;
  // "ensemble" when loaded, otherwise the best cross-validated AUC.
  const LoadedModel& default_model() const;

 private:
  std::vector<LoadedModel> models_;
  double mean_delta_ = 0.0;
  std::size_t cohort_n_ = 0;
  std::string source_;
};

struct HttpResponse {
  int status = 200;
  nlohmann::json body;
};

HttpResponse handle(const ServiceCore& core, const std::string& method, const std::string& path,
                    const std::string& body);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
};

// Request-level validation failure; `field` names the offending input.
class RequestError : public ValidationError {
 public:
  RequestError(std::string field, const std::string& message) : ValidationError(message), field(std::move(field)) {}
  std::string field;
};

// HTTP front end with CORS. One instance serves one ServiceCore.
class HttpServer {
 public:
  HttpServer(std::shared_ptr<const ServiceCore> core, ServerOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds (port 0 picks a free port) and returns the bound port.
  int bind();
  void listen();  // blocks; call after bind()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace promine::serve
