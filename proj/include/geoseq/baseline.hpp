#pragma once

// Multinomial naive Bayes over partition leaves, exposed as a next-digit
// scorer by marginalizing the leaf posterior over label prefixes.
//
//   prior(leaf)        = records(leaf) / records
//   P(token | leaf)    = (count(token, leaf) + alpha) / (tokens(leaf) + alpha * |V|)
//   P(d | prefix)      = mass(prefix + d) / mass(prefix)
//   P(EOS | prefix)    = mass(leaf == prefix) / mass(prefix)
//
// Query tokens outside the training vocabulary are ignored.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "geoseq/dataset.hpp"
#include "geoseq/hash.hpp"
#include "geoseq/io.hpp"
#include "geoseq/partition.hpp"
#include "geoseq/scorer.hpp"
#include "geoseq/tokenize.hpp"

namespace geoseq {

inline constexpr double kDefaultAlpha = 1.0;
inline constexpr std::string_view kBaselineFormat = "geoseq-baseline";
inline constexpr int kBaselineFormatVersion = 1;

class BaselineModel {
 public:
  struct Posting {
    std::uint32_t leaf;
    std::uint32_t count;
    friend bool operator==(const Posting&, const Posting&) = default;
  };

  BaselineModel(std::shared_ptr<const AdaptivePartition> partition, double alpha)
      : partition_(std::move(partition)),
        alpha_(alpha),
        leaf_records_(partition_->size(), 0),
        leaf_tokens_(partition_->size(), 0) {
    if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) throw ArgumentError("alpha must be > 0");
  }

  void add(std::string_view label, std::string_view text) {
    const auto leaf = partition_->find(labelcodec::decode(label, partition_->params().max_level));
    if (!leaf) throw ArgumentError("label " + std::string(label) + " is not a leaf of the partition");
    ++leaf_records_[*leaf];
    ++total_records_;
    for (auto& token : tokenize(text)) {
      ++leaf_tokens_[*leaf];
      auto& postings = postings_[std::move(token)];
      auto it = std::lower_bound(postings.begin(), postings.end(), *leaf,
                                 [](const Posting& p, std::size_t l) { return p.leaf < l; });
      if (it != postings.end() && it->leaf == *leaf) {
        ++it->count;
      } else {
        postings.insert(it, Posting{static_cast<std::uint32_t>(*leaf), 1});
      }
    }
  }

  const AdaptivePartition& partition() const noexcept { return *partition_; }
  std::shared_ptr<const AdaptivePartition> partition_ptr() const noexcept { return partition_; }
  double alpha() const noexcept { return alpha_; }
  std::uint64_t total_records() const noexcept { return total_records_; }
  std::size_t vocabulary_size() const noexcept { return postings_.size(); }
  std::uint64_t leaf_records(std::size_t leaf) const { return leaf_records_.at(leaf); }
  std::uint64_t leaf_tokens(std::size_t leaf) const { return leaf_tokens_.at(leaf); }

  double prior(std::size_t leaf) const {
    return static_cast<double>(leaf_records_.at(leaf)) / static_cast<double>(total_records_);
  }

  std::uint32_t token_count(std::string_view token, std::size_t leaf) const {
    auto it = postings_.find(std::string(token));
    if (it == postings_.end()) return 0;
    for (const auto& p : it->second) {
      if (p.leaf == leaf) return p.count;
    }
    return 0;
  }

  /// Unnormalized log posterior per leaf; -inf for leaves without training records.
  std::vector<double> log_joint(std::string_view text) const {
    std::vector<const std::vector<Posting>*> hits;
    for (const auto& token : tokenize(text)) {
      auto it = postings_.find(token);
      if (it != postings_.end()) hits.push_back(&it->second);
    }
    const double n = static_cast<double>(hits.size());
    const double vocab = static_cast<double>(postings_.size());
    const double log_alpha = std::log(alpha_);
    std::vector<double> out(leaf_records_.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t l = 0; l < out.size(); ++l) {
      if (leaf_records_[l] == 0) continue;
      out[l] = std::log(prior(l)) + n * (log_alpha - std::log(static_cast<double>(leaf_tokens_[l]) + alpha_ * vocab));
    }
    for (const auto* postings : hits) {
      for (const auto& p : *postings) out[p.leaf] += std::log(p.count + alpha_) - log_alpha;
    }
    return out;
  }

  /// Normalized posterior over leaves, in partition leaf order.
  std::vector<double> posterior(std::string_view text) const {
    auto lj = log_joint(text);
    const double top = *std::max_element(lj.begin(), lj.end());
    double sum = 0.0;
    for (double& v : lj) {
      v = std::isfinite(v) ? std::exp(v - top) : 0.0;
      sum += v;
    }
    for (double& v : lj) v /= sum;
    return lj;
  }

  const std::unordered_map<std::string, std::vector<Posting>>& postings() const noexcept { return postings_; }

  /// Used by the model-file reader.
  void restore(std::vector<std::uint64_t> records, std::vector<std::uint64_t> tokens,
               std::unordered_map<std::string, std::vector<Posting>> postings) {
    leaf_records_ = std::move(records);
    leaf_tokens_ = std::move(tokens);
    postings_ = std::move(postings);
    total_records_ = std::accumulate(leaf_records_.begin(), leaf_records_.end(), std::uint64_t{0});
  }

 private:
  std::shared_ptr<const AdaptivePartition> partition_;
  double alpha_;
  std::vector<std::uint64_t> leaf_records_;
  std::vector<std::uint64_t> leaf_tokens_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::uint64_t total_records_ = 0;
};

template <typename Range>
BaselineModel train_baseline(const Range& train, std::shared_ptr<const AdaptivePartition> partition,
                             double alpha = kDefaultAlpha) {
  BaselineModel model(std::move(partition), alpha);
  for (const dataset::LabeledRecord& r : train) model.add(r.label, r.record.text);
  if (model.total_records() == 0) throw ArgumentError("training set is empty");
  return model;
}

/// Stateless scorer over a trained baseline model.
class BaselineScorer final : public SequenceScorer {
 public:
  explicit BaselineScorer(std::shared_ptr<const BaselineModel> model, std::string id = "baseline")
      : model_(std::move(model)), id_(std::move(id)) {}

  DigitDistribution score_next(std::string_view text, std::string_view prefix) const override {
    return marginalize(model_->posterior(text), prefix);
  }

  /// Next-symbol marginals of a given leaf posterior.
  DigitDistribution marginalize(const std::vector<double>& posterior, std::string_view prefix) const {
    const auto& partition = model_->partition();
    auto mass = [&](const CellId& c) {
      const auto [first, last] = partition.range_under(c);
      double m = 0.0;
      for (auto k = first; k < last; ++k) m += posterior[k];
      return m;
    };

    DigitDistribution d;
    std::array<bool, kSymbolCount> valid{};
    if (prefix.empty()) {
      for (int f = 0; f < kFaceCount; ++f) {
        valid[static_cast<std::size_t>(f)] = true;
        d.probs[static_cast<std::size_t>(f)] = mass(CellId::from_face(f));
      }
    } else {
      const CellId cell = labelcodec::decode(prefix, partition.params().max_level);
      const auto [first, last] = partition.range_under(cell);
      if (first == last) throw ArgumentError("prefix \"" + std::string(prefix) + "\" is not in the label trie");
      if (partition.is_leaf(cell)) {
        valid[kEos] = true;
        d.probs[kEos] = posterior[first];
      } else {
        for (int c = 0; c < 4; ++c) {
          const CellId child = cell.child(c);
          const auto [cf, cl] = partition.range_under(child);
          valid[static_cast<std::size_t>(c)] = cf != cl;
          for (auto k = cf; k < cl; ++k) d.probs[static_cast<std::size_t>(c)] += posterior[k];
        }
      }
    }
    double total = 0.0;
    for (double p : d.probs) total += p;
    if (total > 0.0) {
      for (double& p : d.probs) p /= total;
    } else {
      // Prefix carries no posterior mass: spread evenly over trie-valid symbols.
      const double n = static_cast<double>(std::count(valid.begin(), valid.end(), true));
      for (std::size_t s = 0; s < d.probs.size(); ++s) d.probs[s] = valid[s] ? 1.0 / n : 0.0;
    }
    return d;
  }

  std::string id() const override { return id_; }
  const BaselineModel& model() const noexcept { return *model_; }

 private:
  std::shared_ptr<const BaselineModel> model_;
  std::string id_;
};

// ---------------------------------------------------------------------------
// Model file: one JSON document.
//   {format, version, tokenizer, alpha, partition_checksum,
//    leaves: [{label, records, tokens}], vocabulary: [token...],
//    counts: [[token_index, leaf_index, count]...]}

inline std::string serialize_baseline(const BaselineModel& model) {
  nlohmann::ordered_json doc;
  doc["format"] = kBaselineFormat;
  doc["version"] = kBaselineFormatVersion;
  doc["tokenizer"] = kTokenizerId;
  doc["alpha"] = model.alpha();
  doc["partition_checksum"] = partition_checksum(model.partition());
  auto& leaves = doc["leaves"] = nlohmann::ordered_json::array();
  const auto& partition = model.partition();
  for (std::size_t l = 0; l < partition.size(); ++l) {
    leaves.push_back({{"label", labelcodec::encode(partition.leaves()[l].cell)},
                      {"records", model.leaf_records(l)},
                      {"tokens", model.leaf_tokens(l)}});
  }
  std::vector<std::string> vocab;
  vocab.reserve(model.postings().size());
  for (const auto& [token, _] : model.postings()) vocab.push_back(token);
  std::sort(vocab.begin(), vocab.end());
  doc["vocabulary"] = vocab;
  auto& counts = doc["counts"] = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < vocab.size(); ++t) {
    for (const auto& p : model.postings().at(vocab[t])) counts.push_back({t, p.leaf, p.count});
  }
  return doc.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

inline void save_baseline(const BaselineModel& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_baseline(model));
}

inline bool looks_like_baseline(std::string_view text) {
  const auto start = text.find_first_not_of(" \t\r\n");
  if (start == std::string_view::npos || text[start] != '{') return false;
  return text.substr(start, 256).find(kBaselineFormat) != std::string_view::npos;
}

inline BaselineModel parse_baseline(std::string_view text, std::shared_ptr<const AdaptivePartition> partition) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed model JSON: ") + e.what(), detail::line_of_offset(text, e.byte));
  }
  try {
    if (doc.at("format").get<std::string>() != kBaselineFormat) throw ParseError("model.format: not a baseline model");
    if (doc.at("version").get<int>() != kBaselineFormatVersion) throw ParseError("model.version: unsupported");
    if (doc.at("tokenizer").get<std::string>() != kTokenizerId) {
      throw ParseError("model.tokenizer: unsupported tokenizer " + doc.at("tokenizer").get<std::string>());
    }
    const auto expected = partition_checksum(*partition);
    const auto stored = doc.at("partition_checksum").get<std::string>();
    if (stored != expected) {
      throw ChecksumMismatch("model was trained against partition " + stored + " but the supplied partition is " +
                             expected);
    }
    BaselineModel model(partition, doc.at("alpha").get<double>());
    const auto& leaves = doc.at("leaves");
    if (leaves.size() != partition->size()) throw ParseError("model.leaves: leaf count differs from partition");
    std::vector<std::uint64_t> records(leaves.size()), tokens(leaves.size());
    for (std::size_t l = 0; l < leaves.size(); ++l) {
      if (leaves[l].at("label").get<std::string>() != labelcodec::encode(partition->leaves()[l].cell)) {
        throw ParseError("model.leaves[" + std::to_string(l) + "].label: does not match partition");
      }
      records[l] = leaves[l].at("records").get<std::uint64_t>();
      tokens[l] = leaves[l].at("tokens").get<std::uint64_t>();
    }
    const auto vocab = doc.at("vocabulary").get<std::vector<std::string>>();
    std::unordered_map<std::string, std::vector<BaselineModel::Posting>> postings;
    for (const auto& row : doc.at("counts")) {
      const auto t = row.at(0).get<std::size_t>();
      const auto l = row.at(1).get<std::uint32_t>();
      const auto c = row.at(2).get<std::uint32_t>();
      if (t >= vocab.size() || l >= leaves.size()) throw ParseError("model.counts: index out of range");
      postings[vocab[t]].push_back({l, c});
    }
    for (auto& [_, list] : postings) {
      std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.leaf < b.leaf; });
    }
    model.restore(std::move(records), std::move(tokens), std::move(postings));
    if (model.total_records() == 0) throw ParseError("model has no training records");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model: ") + e.what());
  }
}

inline BaselineModel load_baseline(const std::filesystem::path& path,
                                   std::shared_ptr<const AdaptivePartition> partition) {
  return parse_baseline(io::read_file(path), std::move(partition));
}

}  // namespace geoseq
