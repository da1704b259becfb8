// promine_serve: HTTP prediction service over a runner models/ directory.
//
//   promine_serve --models out/all/models [--host 127.0.0.1] [--port 8080] [--cors-origin '*']
//
// PROMINE_MODELS, PROMINE_HOST, PROMINE_PORT and PROMINE_CORS_ORIGIN are used
// when the matching flag is absent.

#include <csignal>
#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "promine/log.hpp"
#include "promine/serve.hpp"

namespace {

promine::serve::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"promine_serve: prediction service"};
  std::string models;
  promine::serve::ServerOptions opts;
  bool verbose = false;
  app.add_option("--models", models, "Directory holding index.json and pipeline files")->envname("PROMINE_MODELS");
  app.add_option("--host", opts.host, "Bind address")->envname("PROMINE_HOST");
  app.add_option("--port", opts.port, "Port (0 = any free port)")->envname("PROMINE_PORT");
  app.add_option("--cors-origin", opts.cors_origin, "Access-Control-Allow-Origin value")
      ->envname("PROMINE_CORS_ORIGIN");
  app.add_flag("-v,--verbose", verbose, "Log requests with unseen levels");
  CLI11_PARSE(app, argc, argv);
  promine::log::set_level(verbose ? promine::log::Level::info : promine::log::Level::warn);

  try {
    auto core = std::make_shared<const promine::serve::ServiceCore>(
        models.empty() ? promine::serve::ServiceCore{} : promine::serve::ServiceCore::load(models));
    if (models.empty()) std::cerr << "promine_serve: no --models given; serving an empty inventory\n";
    promine::serve::HttpServer server(core, opts);
    const int port = server.bind();
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "promine_serve listening on http://" << opts.host << ":" << port << " (" << core->loaded().size()
              << " models)" << std::endl;
    server.listen();
    g_server = nullptr;
  } catch (const std::exception& e) {
    std::cerr << "promine_serve: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
