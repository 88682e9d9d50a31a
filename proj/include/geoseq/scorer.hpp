#pragma once

// Next-symbol scoring interface for label decoding, and the label trie that
// constrains decoding to the leaves of a partition.
//
// Symbols: the digits '0'..'5' and an end-of-sequence marker. At position 0
// only the face digits '0'..'5' may carry mass; afterwards only '0'..'3' and EOS.

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>

#include "geoseq/labelcodec.hpp"
#include "geoseq/partition.hpp"

namespace geoseq {

inline constexpr int kSymbolCount = 7;
inline constexpr int kEos = 6;

inline std::string symbol_name(int s) { return s == kEos ? std::string("EOS") : std::string(1, char('0' + s)); }

inline int symbol_from_name(std::string_view name) {
  if (name == "EOS" || name == "eos") return kEos;
  if (name.size() == 1 && name[0] >= '0' && name[0] <= '5') return name[0] - '0';
  throw ArgumentError("unknown symbol \"" + std::string(name) + "\"");
}

/// Whether symbol s may carry mass after a prefix of the given length.
inline constexpr bool symbol_allowed_at(int s, std::size_t position) noexcept {
  return position == 0 ? (s >= 0 && s <= 5) : (s >= 0 && s <= 3) || s == kEos;
}

struct DigitDistribution {
  std::array<double, kSymbolCount> probs{};

  double operator[](int s) const { return probs.at(static_cast<std::size_t>(s)); }

  /// Throws unless probabilities are non-negative, sum to 1 within `tolerance`
  /// and only position-allowed symbols carry mass.
  void validate(std::size_t position, double tolerance = 1e-9) const {
    double sum = 0.0;
    for (int s = 0; s < kSymbolCount; ++s) {
      const double p = probs[static_cast<std::size_t>(s)];
      if (!(p >= 0.0) || !std::isfinite(p)) throw ArgumentError("probability of " + symbol_name(s) + " is not a finite non-negative value");
      if (p > 0.0 && !symbol_allowed_at(s, position)) {
        throw ArgumentError("symbol " + symbol_name(s) + " carries mass at position " + std::to_string(position));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > tolerance) {
      throw ArgumentError("probabilities sum to " + std::to_string(sum) + ", expected 1");
    }
  }

  static DigitDistribution uniform(std::size_t position) {
    DigitDistribution d;
    const int n = position == 0 ? 6 : 5;
    for (int s = 0; s < kSymbolCount; ++s) {
      if (symbol_allowed_at(s, position)) d.probs[static_cast<std::size_t>(s)] = 1.0 / n;
    }
    return d;
  }
};

/// Produces the next-symbol distribution given the query text and the label
/// digits decoded so far. Implementations must be deterministic for a fixed
/// (text, prefix) and safe to call concurrently unless stateful() says otherwise.
class SequenceScorer {
 public:
  virtual ~SequenceScorer() = default;
  virtual DigitDistribution score_next(std::string_view text, std::string_view prefix) const = 0;
  virtual bool stateful() const noexcept { return false; }
  virtual std::string id() const = 0;
};

/// Prefix trie over the leaf labels of a partition.
class LabelTrie {
 public:
  struct Node {
    std::uint8_t child_mask = 0;  // bit d set: prefix + d is a valid prefix
    bool leaf = false;
  };

  explicit LabelTrie(const AdaptivePartition& partition) {
    for (const Leaf& leaf : partition.leaves()) {
      const std::string label = labelcodec::encode(leaf.cell);
      for (std::size_t n = 0; n < label.size(); ++n) {
        nodes_[label.substr(0, n)].child_mask |= static_cast<std::uint8_t>(1U << (label[n] - '0'));
      }
      nodes_[label].leaf = true;
    }
  }

  const Node* find(std::string_view prefix) const {
    auto it = nodes_.find(std::string(prefix));
    return it == nodes_.end() ? nullptr : &it->second;
  }

  bool contains(std::string_view prefix) const { return find(prefix) != nullptr; }
  bool is_leaf(std::string_view label) const {
    const Node* n = find(label);
    return n && n->leaf;
  }

  /// Symbols that extend `prefix` to a valid prefix or complete it at a leaf.
  std::array<bool, kSymbolCount> allowed(std::string_view prefix) const {
    std::array<bool, kSymbolCount> out{};
    if (const Node* n = find(prefix)) {
      for (int d = 0; d < 6; ++d) out[static_cast<std::size_t>(d)] = (n->child_mask >> d) & 1U;
      out[kEos] = n->leaf;
    }
    return out;
  }

  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  std::unordered_map<std::string, Node> nodes_;
};

}  // namespace geoseq
