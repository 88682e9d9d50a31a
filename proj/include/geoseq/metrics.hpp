#pragma once

// Evaluation of label predictions.
//
// Hierarchical precision / recall / F compare the ancestor closures of the
// predicted and true labels (every prefix, face digit included, no virtual
// root) and are micro-averaged: numerators and denominators are summed over
// the whole evaluation set before dividing.

#include <cstdint>
#include <iomanip>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "geoseq/cellgeo.hpp"
#include "geoseq/labelcodec.hpp"

namespace geoseq::metrics {

struct EvalPair {
  std::string predicted;
  std::string gold;
  std::optional<LatLon> gold_loc;
};

struct HierarchicalScores {
  double hP = 0.0;
  double hR = 0.0;
  double hF = 0.0;
};

/// Partial sums for hP / hR; shards can be merged with +=.
struct HierarchicalCounts {
  std::uint64_t intersection = 0;
  std::uint64_t predicted = 0;
  std::uint64_t gold = 0;

  HierarchicalCounts& operator+=(const HierarchicalCounts& o) noexcept {
    intersection += o.intersection;
    predicted += o.predicted;
    gold += o.gold;
    return *this;
  }

  HierarchicalScores scores() const noexcept {
    HierarchicalScores s;
    s.hP = predicted ? static_cast<double>(intersection) / static_cast<double>(predicted) : 0.0;
    s.hR = gold ? static_cast<double>(intersection) / static_cast<double>(gold) : 0.0;
    s.hF = s.hP + s.hR > 0.0 ? 2.0 * s.hP * s.hR / (s.hP + s.hR) : 0.0;
    return s;
  }
};

struct EvalReport {
  double flat_accuracy = 0.0;
  double hP = 0.0;
  double hR = 0.0;
  double hF = 0.0;
  std::optional<double> mean_distance_km;
  std::uint64_t n = 0;
};

/// The label and all of its proper prefixes.
inline std::set<std::string> ancestor_set(std::string_view s) {
  labelcodec::decode(s, kMaxSupportedLevel);
  std::set<std::string> out;
  for (std::size_t n = 1; n <= s.size(); ++n) out.emplace(s.substr(0, n));
  return out;
}

inline HierarchicalCounts pair_counts(const EvalPair& p) {
  const auto predicted = ancestor_set(p.predicted);
  const auto gold = ancestor_set(p.gold);
  HierarchicalCounts c;
  c.predicted = predicted.size();
  c.gold = gold.size();
  for (const auto& s : predicted) c.intersection += gold.count(s);
  return c;
}

inline HierarchicalScores hierarchical_scores(std::span<const EvalPair> pairs) {
  if (pairs.empty()) throw ArgumentError("hierarchical_scores needs at least one pair");
  HierarchicalCounts total;
  for (const auto& p : pairs) total += pair_counts(p);
  return total.scores();
}

inline double flat_accuracy(std::span<const EvalPair> pairs) {
  if (pairs.empty()) throw ArgumentError("flat_accuracy needs at least one pair");
  std::uint64_t hits = 0;
  for (const auto& p : pairs) hits += p.predicted == p.gold ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

/// Mean great-circle distance from each predicted cell's center to the true location.
inline double mean_distance_error(std::span<const EvalPair> pairs) {
  if (pairs.empty()) throw ArgumentError("mean_distance_error needs at least one pair");
  double sum = 0.0;
  for (const auto& p : pairs) {
    if (!p.gold_loc) throw ArgumentError("pair for \"" + p.gold + "\" has no gold location");
    sum += great_circle_km(cell_center(labelcodec::decode(p.predicted, kMaxSupportedLevel)), *p.gold_loc);
  }
  return sum / static_cast<double>(pairs.size());
}

inline EvalReport evaluate(std::span<const EvalPair> pairs) {
  EvalReport r;
  const auto h = hierarchical_scores(pairs);
  r.flat_accuracy = flat_accuracy(pairs);
  r.hP = h.hP;
  r.hR = h.hR;
  r.hF = h.hF;
  r.n = pairs.size();
  bool all_located = true;
  for (const auto& p : pairs) all_located = all_located && p.gold_loc.has_value();
  if (all_located) r.mean_distance_km = mean_distance_error(pairs);
  return r;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["flat_accuracy"] = r.flat_accuracy;
  j["hP"] = r.hP;
  j["hR"] = r.hR;
  j["hF"] = r.hF;
  j["mean_distance_km"] = r.mean_distance_km ? nlohmann::ordered_json(*r.mean_distance_km) : nlohmann::ordered_json(nullptr);
  j["n"] = r.n;
  return j;
}

inline std::string to_table(const EvalReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(5);
  out << "metric                       value\n";
  out << "---------------------------  ----------\n";
  out << "flat accuracy                " << r.flat_accuracy << '\n';
  out << "hP                           " << r.hP << '\n';
  out << "hR                           " << r.hR << '\n';
  out << "hF (hierarchy accuracy)      " << r.hF << '\n';
  if (r.mean_distance_km) {
    out << std::setprecision(1) << "mean distance error (km)     " << *r.mean_distance_km << '\n';
  } else {
    out << "mean distance error (km)     n/a\n";
  }
  out << "n                            " << r.n << '\n';
  return out.str();
}

}  // namespace geoseq::metrics
