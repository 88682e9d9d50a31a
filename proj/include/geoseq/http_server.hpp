#pragma once

// cpp-httplib binding for GeocodeService.

#include <atomic>
#include <iostream>
#include <string>
#include <thread>

#include <httplib.h>

#include "geoseq/service.hpp"

namespace geoseq::service {

inline void register_routes(httplib::Server& server, const GeocodeService& service) {
  auto reply = [&service](const httplib::Request& req, httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
    if (auto origin = service.cors_origin(req.get_header_value("Origin"))) {
      res.set_header("Access-Control-Allow-Origin", *origin);
      res.set_header("Vary", "Origin");
    }
  };

  server.Get("/v1/health", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(req, res, service.health());
  });
  server.Post("/v1/geocode", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(req, res, service.geocode(req.body));
  });
  server.Get("/v1/partition/leaves", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> bbox;
    if (req.has_param("bbox")) bbox = req.get_param_value("bbox");
    reply(req, res, service.partition_leaves(bbox));
  });
  server.Options(R"(/v1/.*)", [&service](const httplib::Request& req, httplib::Response& res) {
    res.status = 204;
    if (auto origin = service.cors_origin(req.get_header_value("Origin"))) {
      res.set_header("Access-Control-Allow-Origin", *origin);
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.set_header("Vary", "Origin");
    }
  });
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const auto r = error_response(res.status, res.status == 404 ? "not found" : "request failed");
    res.set_content(r.body, "application/json");
  });
}

/// Listens immediately (health answers 503 while loading), loads the
/// partition and model on a background thread, and blocks until stopped.
/// Returns false if the socket could not be bound or loading failed.
inline bool run_server(GeocodeService& service, httplib::Server& server, std::ostream& log = std::cerr) {
  register_routes(server, service);
  const auto& cfg = service.config();
  std::atomic<bool> load_failed{false};
  std::thread loader([&] {
    try {
      service.load();
      log << "geoseq: model loaded, serving on " << cfg.host << ":" << cfg.port << std::endl;
    } catch (const std::exception& e) {
      log << "geoseq: failed to load: " << e.what() << std::endl;
      load_failed = true;
      // stop() is a no-op until the socket is listening.
      server.wait_until_ready();
      server.stop();
    }
  });
  const bool ok = server.listen(cfg.host, cfg.port);
  loader.join();
  return ok && !load_failed;
}

}  // namespace geoseq::service
