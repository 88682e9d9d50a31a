#pragma once

// Replays next-symbol distributions computed elsewhere (for example by a
// fine-tuned sequence-to-sequence model).
//
// File: one JSON object per line,
//   {"text_hash": "<16 hex>", "prefix": "43", "probs": {"0": 0.1, ..., "EOS": 0.2}}
// "text" may be given instead of "text_hash", and "logits" instead of "probs"
// (softmax is applied over the listed symbols). Lookups that were not stored
// fall back to a uniform distribution over the position's symbols and are counted.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <map>
#include <string>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

#include "geoseq/error.hpp"
#include "geoseq/hash.hpp"
#include "geoseq/io.hpp"
#include "geoseq/scorer.hpp"

namespace geoseq {

inline constexpr double kReplaySumTolerance = 1e-6;

inline std::string text_key(std::string_view text) { return to_hex(fnv1a64(text)); }

class ReplayScorer final : public SequenceScorer {
 public:
  explicit ReplayScorer(std::string id = "replay") : id_(std::move(id)) {}

  void insert(std::string text_hash, std::string prefix, DigitDistribution dist) {
    dist.validate(prefix.size(), kReplaySumTolerance);
    table_[{std::move(text_hash), std::move(prefix)}] = dist;
  }

  DigitDistribution score_next(std::string_view text, std::string_view prefix) const override {
    auto it = table_.find({text_key(text), std::string(prefix)});
    if (it != table_.end()) return it->second;
    misses_.fetch_add(1, std::memory_order_relaxed);
    return DigitDistribution::uniform(prefix.size());
  }

  std::string id() const override { return id_; }
  std::size_t size() const noexcept { return table_.size(); }
  /// Lookups answered with the uniform fallback.
  std::uint64_t misses() const noexcept { return misses_.load(std::memory_order_relaxed); }

 private:
  std::map<std::pair<std::string, std::string>, DigitDistribution> table_;
  std::string id_;
  mutable std::atomic<std::uint64_t> misses_{0};
};

namespace detail {

inline DigitDistribution distribution_from_json(const nlohmann::json& row, std::size_t position) {
  DigitDistribution d;
  if (row.contains("probs")) {
    for (const auto& [name, value] : row.at("probs").items()) {
      if (!value.is_number()) throw ParseError("probs." + name + ": expected a number");
      d.probs[static_cast<std::size_t>(symbol_from_name(name))] = value.get<double>();
    }
    return d;
  }
  if (row.contains("logits")) {
    double top = -std::numeric_limits<double>::infinity();
    std::map<int, double> logits;
    for (const auto& [name, value] : row.at("logits").items()) {
      if (!value.is_number()) throw ParseError("logits." + name + ": expected a number");
      const int s = symbol_from_name(name);
      if (!symbol_allowed_at(s, position)) continue;
      logits[s] = value.get<double>();
      top = std::max(top, logits[s]);
    }
    if (logits.empty()) throw ParseError("logits: no symbol allowed at position " + std::to_string(position));
    double sum = 0.0;
    for (auto& [s, v] : logits) sum += (v = std::exp(v - top));
    for (auto& [s, v] : logits) d.probs[static_cast<std::size_t>(s)] = v / sum;
    return d;
  }
  throw ParseError("missing \"probs\" or \"logits\"");
}

}  // namespace detail

inline std::shared_ptr<ReplayScorer> parse_external_scores(std::istream& in, std::string id = "replay") {
  auto scorer = std::make_shared<ReplayScorer>(std::move(id));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto row = nlohmann::json::parse(line);
      std::string key;
      if (row.contains("text_hash")) {
        key = row.at("text_hash").get<std::string>();
      } else if (row.contains("text")) {
        key = text_key(row.at("text").get<std::string>());
      } else {
        throw ParseError("missing \"text_hash\"");
      }
      const auto prefix = row.value("prefix", std::string{});
      if (!prefix.empty()) labelcodec::decode(prefix, kMaxSupportedLevel);
      scorer->insert(std::move(key), prefix, detail::distribution_from_json(row, prefix.size()));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed external-scores record: ") + e.what(), line_no);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    } catch (const ArgumentError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return scorer;
}

inline std::shared_ptr<ReplayScorer> import_external_scores(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  std::istringstream in(text);
  return parse_external_scores(in, "replay:" + to_hex(fnv1a64(text)));
}

}  // namespace geoseq
