#pragma once

// Trie-constrained beam search over label digits.
//
// Each step expands every live hypothesis with the scorer's distribution,
// restricted to symbols that keep the label a valid prefix of some leaf (EOS
// only where the prefix is itself a leaf) and renormalized over those symbols.
// The best `beam_width` candidates survive; EOS candidates are complete. A
// hypothesis' probability is the product of its step probabilities.
//
// Probabilities within a relative kTieTolerance of each other count as tied
// and are ordered by label; the returned list reports one probability per
// tied run. Equal posteriors reached along different paths differ in the last
// bits of their products, and ranking on that noise would make the order of
// tied cells arbitrary.

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "geoseq/cellgeo.hpp"
#include "geoseq/labelcodec.hpp"
#include "geoseq/scorer.hpp"

namespace geoseq {

inline constexpr int kDefaultBeamWidth = 10;
inline constexpr int kDefaultTopK = 5;
inline constexpr double kTieTolerance = 1e-12;

struct Prediction {
  std::string label;
  double probability = 0.0;
  LatLon center{0.0, 0.0};
  std::array<LatLon, 4> polygon{LatLon{0, 0}, LatLon{0, 0}, LatLon{0, 0}, LatLon{0, 0}};
  std::vector<std::string> ancestors;
};

inline Prediction make_prediction(std::string label, double probability) {
  const CellId cell = labelcodec::decode(label, kMaxSupportedLevel);
  Prediction p;
  p.center = cell_center(cell);
  p.polygon = cell_vertices(cell);
  p.ancestors = labelcodec::ancestors(label);
  p.label = std::move(label);
  p.probability = probability;
  return p;
}

struct BeamOptions {
  int beam_width = kDefaultBeamWidth;
  int top_k = kDefaultTopK;

  void validate() const {
    if (beam_width < 1) throw ArgumentError("beam_width must be >= 1");
    if (top_k < 1) throw ArgumentError("top_k must be >= 1");
    if (top_k > beam_width) throw ArgumentError("top_k must not exceed beam_width");
  }
};

struct Hypothesis {
  std::string label;
  double probability = 1.0;
};

namespace detail {

struct Candidate {
  std::string label;
  double probability;
  bool complete;
};

// Descending probability; runs of near-equal neighbours are ordered by label.
// With `equalize`, every member of a run reports the run's largest
// probability so the final list is non-increasing.
inline void rank(std::vector<Candidate>& c, bool equalize = false) {
  std::sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.label < b.label;
  });
  auto by_label = [](const Candidate& a, const Candidate& b) { return a.label < b.label; };
  for (std::size_t i = 0; i < c.size();) {
    std::size_t j = i + 1;
    while (j < c.size() && c[j - 1].probability - c[j].probability <= kTieTolerance * c[j - 1].probability) ++j;
    if (j - i > 1) {
      if (equalize) {
        for (std::size_t k = i + 1; k < j; ++k) c[k].probability = c[i].probability;
      }
      std::sort(c.begin() + static_cast<std::ptrdiff_t>(i), c.begin() + static_cast<std::ptrdiff_t>(j), by_label);
    }
    i = j;
  }
}

}  // namespace detail

/// Completed hypotheses (labels of trie leaves), best first.
inline std::vector<Hypothesis> beam_decode(const SequenceScorer& scorer, std::string_view text, const LabelTrie& trie,
                                           const BeamOptions& options) {
  options.validate();
  if (!trie.contains("")) throw ArgumentError("label trie is empty");

  std::vector<detail::Candidate> live{{"", 1.0, false}};
  std::vector<detail::Candidate> done;
  while (!live.empty()) {
    std::vector<detail::Candidate> candidates;
    for (const auto& hyp : live) {
      const DigitDistribution dist = scorer.score_next(text, hyp.label);
      const auto allowed = trie.allowed(hyp.label);
      double mass = 0.0;
      int n_allowed = 0;
      for (int s = 0; s < kSymbolCount; ++s) {
        if (!allowed[static_cast<std::size_t>(s)]) continue;
        mass += dist[s];
        ++n_allowed;
      }
      for (int s = 0; s < kSymbolCount; ++s) {
        if (!allowed[static_cast<std::size_t>(s)]) continue;
        const double step = mass > 0.0 ? dist[s] / mass : 1.0 / n_allowed;
        if (s == kEos) {
          candidates.push_back({hyp.label, hyp.probability * step, true});
        } else {
          candidates.push_back({hyp.label + char('0' + s), hyp.probability * step, false});
        }
      }
    }
    const auto keep = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(options.beam_width));
    detail::rank(candidates);
    live.clear();
    for (std::size_t k = 0; k < keep; ++k) {
      (candidates[k].complete ? done : live).push_back(std::move(candidates[k]));
    }
  }
  detail::rank(done, true);
  if (done.size() > static_cast<std::size_t>(options.top_k)) done.resize(static_cast<std::size_t>(options.top_k));

  std::vector<Hypothesis> out;
  out.reserve(done.size());
  for (auto& c : done) out.push_back({std::move(c.label), c.probability});
  return out;
}

inline std::vector<Prediction> beam_search(const SequenceScorer& scorer, std::string_view text, const LabelTrie& trie,
                                           const BeamOptions& options = {}) {
  std::vector<Prediction> out;
  for (auto& h : beam_decode(scorer, text, trie, options)) out.push_back(make_prediction(std::move(h.label), h.probability));
  return out;
}

// ---------------------------------------------------------------------------
// Predictions file: one JSON object per line,
//   {"id", "text", "gold_label"?, "predictions": [{"label", "prob"}]}

struct PredictionRecord {
  std::string id;
  std::string text;
  std::optional<std::string> gold_label;
  std::vector<Hypothesis> predictions;
};

inline std::string format_prediction_record(const PredictionRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["text"] = r.text;
  if (r.gold_label) j["gold_label"] = *r.gold_label;
  j["predictions"] = nlohmann::ordered_json::array();
  for (const auto& h : r.predictions) j["predictions"].push_back({{"label", h.label}, {"prob", h.probability}});
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

inline PredictionRecord parse_prediction_record(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    PredictionRecord r;
    r.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    r.text = j.value("text", std::string{});
    if (j.contains("gold_label") && j["gold_label"].is_string()) r.gold_label = j["gold_label"].get<std::string>();
    for (const auto& p : j.at("predictions")) {
      r.predictions.push_back({p.at("label").get<std::string>(), p.at("prob").get<double>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed prediction record: ") + e.what());
  }
}

}  // namespace geoseq
