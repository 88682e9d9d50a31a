#pragma once

// REST handlers for the geocoding service, independent of the HTTP transport.
//
//   POST /v1/geocode                 {text, top_k?, beam_width?}
//   GET  /v1/partition/leaves?bbox=  GeoJSON FeatureCollection of leaves
//   GET  /v1/health                  {status, partition_checksum, model_id, max_level}
//
// Bodies are JSON. Identical requests produce byte-identical bodies.

#include <cstdlib>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "geoseq/decode.hpp"
#include "geoseq/geojson.hpp"
#include "geoseq/partition.hpp"

namespace geoseq::service {

inline constexpr std::size_t kMaxTextBytes = 2048;

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string partition_path;
  std::string model_path;
  int beam_width = kDefaultBeamWidth;
  int top_k = kDefaultTopK;
  std::vector<std::string> cors_allow;
  geojson::Options geojson;
};

/// Environment variables override flags: GEOSEQ_HOST, GEOSEQ_PORT,
/// GEOSEQ_PARTITION, GEOSEQ_MODEL, GEOSEQ_BEAM_WIDTH, GEOSEQ_TOP_K,
/// GEOSEQ_CORS (comma separated).
inline void apply_env(ServiceConfig& cfg, const std::function<const char*(const char*)>& getenv = std::getenv) {
  auto get = [&](const char* name) -> std::optional<std::string> {
    const char* v = getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  auto to_int = [](const std::string& name, const std::string& v) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      throw ArgumentError(name + " must be an integer, got \"" + v + "\"");
    }
  };
  if (auto v = get("GEOSEQ_HOST")) cfg.host = *v;
  if (auto v = get("GEOSEQ_PORT")) cfg.port = to_int("GEOSEQ_PORT", *v);
  if (auto v = get("GEOSEQ_PARTITION")) cfg.partition_path = *v;
  if (auto v = get("GEOSEQ_MODEL")) cfg.model_path = *v;
  if (auto v = get("GEOSEQ_BEAM_WIDTH")) cfg.beam_width = to_int("GEOSEQ_BEAM_WIDTH", *v);
  if (auto v = get("GEOSEQ_TOP_K")) cfg.top_k = to_int("GEOSEQ_TOP_K", *v);
  if (auto v = get("GEOSEQ_CORS")) {
    cfg.cors_allow.clear();
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) cfg.cors_allow.push_back(item);
    }
  }
}

struct Response {
  int status = 200;
  std::string body;
};

inline Response error_response(int status, std::string_view message) {
  nlohmann::ordered_json j;
  j["error"] = {{"code", status}, {"message", message}};
  return {status, j.dump()};
}

/// Partition and model shared read-only by all requests.
struct Loaded {
  std::shared_ptr<const AdaptivePartition> partition;
  std::string partition_checksum;
  LoadedModel model;
  std::shared_ptr<const LabelTrie> trie;
};

class GeocodeService {
 public:
  explicit GeocodeService(ServiceConfig cfg) : cfg_(std::move(cfg)) {}

  /// Loads partition and model from the configured paths.
  void load() {
    auto partition = std::make_shared<const AdaptivePartition>(load_partition(cfg_.partition_path));
    LoadedModel model = load_model(cfg_.model_path, partition);
    install(std::move(partition), std::move(model));
  }

  void install(std::shared_ptr<const AdaptivePartition> partition, LoadedModel model) {
    auto state = std::make_shared<Loaded>();
    state->partition_checksum = partition_checksum(*partition);
    state->trie = std::make_shared<const LabelTrie>(*partition);
    state->partition = std::move(partition);
    state->model = std::move(model);
    std::lock_guard lock(mu_);
    state_ = std::move(state);
  }

  bool ready() const { return snapshot() != nullptr; }
  const ServiceConfig& config() const noexcept { return cfg_; }

  Response health() const {
    const auto s = snapshot();
    nlohmann::ordered_json j;
    if (!s) {
      j["status"] = "loading";
      j["partition_checksum"] = nullptr;
      j["model_id"] = nullptr;
      j["max_level"] = nullptr;
      return {503, j.dump()};
    }
    j["status"] = "ok";
    j["partition_checksum"] = s->partition_checksum;
    j["model_id"] = s->model.model_id;
    j["max_level"] = s->partition->params().max_level;
    return {200, j.dump()};
  }

  Response geocode(std::string_view body) const {
    const auto s = snapshot();
    if (!s) return error_response(503, "model not loaded");
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
      return error_response(400, "request body is not valid JSON");
    }
    if (!req.is_object() || !req.contains("text") || !req["text"].is_string()) {
      return error_response(400, "field \"text\" must be a string");
    }
    const std::string text = req["text"].get<std::string>();
    if (text.empty()) return error_response(400, "text is empty");
    if (text.size() > kMaxTextBytes) {
      return error_response(400, "text exceeds " + std::to_string(kMaxTextBytes) + " bytes");
    }
    BeamOptions opts{cfg_.beam_width, cfg_.top_k};
    for (auto [key, target] : {std::pair{"top_k", &opts.top_k}, std::pair{"beam_width", &opts.beam_width}}) {
      if (!req.contains(key)) continue;
      if (!req[key].is_number_integer()) return error_response(422, std::string(key) + " must be an integer");
      *target = req[key].get<int>();
    }
    if (opts.beam_width < 1) return error_response(422, "beam_width must be >= 1");
    if (opts.top_k < 1) return error_response(422, "top_k must be >= 1");
    if (opts.top_k > opts.beam_width) return error_response(422, "top_k must not exceed beam_width");

    const auto hyps = beam_decode(*s->model.scorer, text, *s->trie, opts);
    nlohmann::ordered_json out;
    out["predictions"] = nlohmann::ordered_json::array();
    for (const auto& h : hyps) {
      const CellId cell = labelcodec::decode(h.label, kMaxSupportedLevel);
      const LatLon center = cell_center(cell);
      nlohmann::ordered_json p;
      p["label"] = h.label;
      p["probability"] = h.probability;
      p["center"] = {{"lat", center.lat()}, {"lon", center.lon()}};
      p["polygon"] = geojson::cell_geometry(cell, cfg_.geojson);
      p["ancestors"] = nlohmann::ordered_json::array();
      for (const auto& a : labelcodec::ancestors(h.label)) {
        p["ancestors"].push_back(
            {{"label", a}, {"polygon", geojson::cell_geometry(labelcodec::decode(a, kMaxSupportedLevel), cfg_.geojson)}});
      }
      out["predictions"].push_back(std::move(p));
    }
    return {200, out.dump()};
  }

  /// `bbox` is the raw query value; absent means the whole globe.
  Response partition_leaves(const std::optional<std::string>& bbox) const {
    const auto s = snapshot();
    if (!s) return error_response(503, "partition not loaded");
    geojson::BBox box{-180, -90, 180, 90};
    if (bbox) {
      try {
        box = geojson::parse_bbox(*bbox);
      } catch (const ArgumentError& e) {
        return error_response(400, e.what());
      }
    }
    nlohmann::ordered_json fc;
    fc["type"] = "FeatureCollection";
    fc["features"] = nlohmann::ordered_json::array();
    for (const Leaf& leaf : s->partition->leaves()) {
      if (!geojson::intersects(geojson::cell_bounds(leaf.cell), box)) continue;
      nlohmann::ordered_json f;
      f["type"] = "Feature";
      f["geometry"] = geojson::cell_geometry(leaf.cell, cfg_.geojson);
      f["properties"] = {{"label", labelcodec::encode(leaf.cell)}, {"count", leaf.count}, {"level", leaf.cell.level()}};
      fc["features"].push_back(std::move(f));
    }
    return {200, fc.dump()};
  }

  /// Value for Access-Control-Allow-Origin, if the origin is allowed.
  std::optional<std::string> cors_origin(std::string_view origin) const {
    for (const auto& allowed : cfg_.cors_allow) {
      if (allowed == "*") return std::string("*");
      if (!origin.empty() && allowed == origin) return std::string(origin);
    }
    return std::nullopt;
  }

 private:
  std::shared_ptr<const Loaded> snapshot() const {
    std::lock_guard lock(mu_);
    return state_;
  }

  ServiceConfig cfg_;
  mutable std::mutex mu_;
  std::shared_ptr<const Loaded> state_;
};

}  // namespace geoseq::service
