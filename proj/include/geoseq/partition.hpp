#pragma once

// Density-adaptive partition of the sphere into leaf cells.
//
// Starting at the six faces, a cell is split into its four children while it
// holds more than `max_cell_samples` points and is shallower than `max_level`.
// Leaves are a disjoint cover of the sphere; empty siblings of a split stay
// leaves. The result depends only on the multiset of point locations.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "geoseq/cellgeo.hpp"
#include "geoseq/hash.hpp"
#include "geoseq/io.hpp"
#include "geoseq/labelcodec.hpp"

namespace geoseq {

inline constexpr std::uint64_t kDefaultMaxCellSamples = 10000;
inline constexpr int kPartitionFormatVersion = 1;

struct PointRecord {
  std::string id;
  LatLon loc;
  std::string text;
};

struct PartitionParams {
  std::uint64_t max_cell_samples = kDefaultMaxCellSamples;
  int max_level = kDefaultMaxLevel;

  void validate() const {
    if (max_cell_samples < 1) throw ArgumentError("max_cell_samples must be >= 1");
    if (max_level < 0 || max_level > kMaxSupportedLevel) {
      throw ArgumentError("max_level must be in [0, " + std::to_string(kMaxSupportedLevel) + "]");
    }
  }

  friend bool operator==(const PartitionParams&, const PartitionParams&) = default;
};

struct Leaf {
  CellId cell;
  std::uint64_t count = 0;

  friend bool operator==(const Leaf&, const Leaf&) = default;
};

class AdaptivePartition {
 public:
  /// Validates disjointness, cover and capacity; leaves may come in any order.
  static AdaptivePartition from_leaves(PartitionParams params, std::vector<Leaf> leaves) {
    params.validate();
    std::sort(leaves.begin(), leaves.end(), [](const Leaf& a, const Leaf& b) { return a.cell < b.cell; });

    AdaptivePartition p;
    p.params_ = params;
    // Covered area in units of max_level cells (at most 6 * 4^30, fits in 64
    // bits once leaves are disjoint); a disjoint set covers the
    // sphere exactly when this reaches 6 * 4^max_level.
    std::uint64_t covered = 0;
    for (std::size_t k = 0; k < leaves.size(); ++k) {
      const Leaf& leaf = leaves[k];
      const std::string label = labelcodec::encode(leaf.cell);
      if (leaf.cell.level() > params.max_level) {
        throw ParseError("leaf " + label + " is deeper than max_level " + std::to_string(params.max_level));
      }
      if (k + 1 < leaves.size() && leaf.cell.contains(leaves[k + 1].cell)) {
        throw ParseError("leaf " + label + " overlaps leaf " + labelcodec::encode(leaves[k + 1].cell));
      }
      if (leaf.cell.level() < params.max_level && leaf.count > params.max_cell_samples) {
        throw ParseError("leaf " + label + " holds " + std::to_string(leaf.count) +
                         " points, above max_cell_samples " + std::to_string(params.max_cell_samples));
      }
      covered += std::uint64_t{1} << (2 * (params.max_level - leaf.cell.level()));
      p.total_points_ += leaf.count;
    }
    const std::uint64_t sphere = std::uint64_t{6} << (2 * params.max_level);
    if (covered != sphere) throw ParseError("leaves do not cover the sphere");

    p.leaves_ = std::move(leaves);
    p.index_.reserve(p.leaves_.size());
    for (std::size_t k = 0; k < p.leaves_.size(); ++k) p.index_.emplace(p.leaves_[k].cell, k);
    return p;
  }

  const PartitionParams& params() const noexcept { return params_; }
  /// Sorted in lexicographic label order.
  std::span<const Leaf> leaves() const noexcept { return leaves_; }
  std::size_t size() const noexcept { return leaves_.size(); }
  std::uint64_t total_points() const noexcept { return total_points_; }

  std::optional<std::size_t> find(const CellId& c) const {
    auto it = index_.find(c);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool is_leaf(const CellId& c) const { return index_.contains(c); }

  std::size_t leaf_index_for(const LatLon& p) const {
    const CellId deepest = latlon_to_cell(p, params_.max_level);
    for (int level = 0; level <= deepest.level(); ++level) {
      if (auto k = find(deepest.ancestor(level))) return *k;
    }
    throw std::logic_error("partition does not cover point");  // unreachable for validated partitions
  }

  CellId leaf_for(const LatLon& p) const { return leaves_[leaf_index_for(p)].cell; }

  /// Half-open index range of the leaves equal to or inside `prefix`.
  std::pair<std::size_t, std::size_t> range_under(const CellId& prefix) const {
    auto first = std::partition_point(leaves_.begin(), leaves_.end(), [&](const Leaf& l) { return l.cell < prefix; });
    auto last = std::partition_point(first, leaves_.end(), [&](const Leaf& l) { return prefix.contains(l.cell); });
    return {static_cast<std::size_t>(first - leaves_.begin()), static_cast<std::size_t>(last - leaves_.begin())};
  }

  friend bool operator==(const AdaptivePartition& a, const AdaptivePartition& b) {
    return a.params_ == b.params_ && a.leaves_ == b.leaves_ && a.total_points_ == b.total_points_;
  }

 private:
  AdaptivePartition() = default;

  PartitionParams params_;
  std::vector<Leaf> leaves_;
  std::unordered_map<CellId, std::size_t, CellIdHash> index_;
  std::uint64_t total_points_ = 0;
};

/// Counts points at max_level resolution, then splits top-down.
class PartitionBuilder {
 public:
  explicit PartitionBuilder(PartitionParams params) : params_(params) { params_.validate(); }

  void add(const LatLon& p) { ++counts_[latlon_to_cell(p, params_.max_level)]; }

  AdaptivePartition build() const {
    std::vector<Leaf> fine;
    fine.reserve(counts_.size());
    for (const auto& [cell, n] : counts_) fine.push_back({cell, n});
    std::sort(fine.begin(), fine.end(), [](const Leaf& a, const Leaf& b) { return a.cell < b.cell; });

    std::vector<Leaf> leaves;
    auto begin = fine.cbegin();
    for (int f = 0; f < kFaceCount; ++f) {
      const CellId face = CellId::from_face(f);
      auto end = std::partition_point(begin, fine.cend(), [&](const Leaf& l) { return face.contains(l.cell); });
      split(face, begin, end, leaves);
      begin = end;
    }
    return AdaptivePartition::from_leaves(params_, std::move(leaves));
  }

 private:
  using Iter = std::vector<Leaf>::const_iterator;

  void split(const CellId& cell, Iter begin, Iter end, std::vector<Leaf>& out) const {
    std::uint64_t total = 0;
    for (auto it = begin; it != end; ++it) total += it->count;
    if (total <= params_.max_cell_samples || cell.level() >= params_.max_level) {
      out.push_back({cell, total});
      return;
    }
    for (int d = 0; d < 4; ++d) {
      const CellId child = cell.child(d);
      auto child_end = std::partition_point(begin, end, [&](const Leaf& l) { return child.contains(l.cell); });
      split(child, begin, child_end, out);
      begin = child_end;
    }
  }

  PartitionParams params_;
  std::unordered_map<CellId, std::uint64_t, CellIdHash> counts_;
};

template <typename Range>
AdaptivePartition build_partition(const Range& locations, PartitionParams params) {
  PartitionBuilder builder(params);
  for (const auto& item : locations) {
    if constexpr (std::is_same_v<std::decay_t<decltype(item)>, PointRecord>) {
      builder.add(item.loc);
    } else {
      builder.add(item);
    }
  }
  return builder.build();
}

// ---------------------------------------------------------------------------
// Partition file: single JSON document, leaves in label order, one per line.

inline std::string serialize_partition(const AdaptivePartition& p) {
  std::string out;
  out.reserve(64 + p.size() * 32);
  out += "{\n  \"version\": " + std::to_string(kPartitionFormatVersion) + ",\n";
  out += "  \"params\": {\"max_cell_samples\": " + std::to_string(p.params().max_cell_samples) +
         ", \"max_level\": " + std::to_string(p.params().max_level) + "},\n";
  out += "  \"leaves\": [";
  bool first = true;
  for (const Leaf& leaf : p.leaves()) {
    out += first ? "\n" : ",\n";
    first = false;
    out += "    {\"label\": \"" + labelcodec::encode(leaf.cell) + "\", \"count\": " + std::to_string(leaf.count) + "}";
  }
  out += "\n  ]\n}\n";
  return out;
}

/// FNV-1a of the canonical serialization, as 16 hex digits. Equals the hash of
/// any partition file written by save_partition.
inline std::string partition_checksum(const AdaptivePartition& p) { return to_hex(fnv1a64(serialize_partition(p))); }

namespace detail {

inline std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

template <typename T>
T require_field(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(where + ": missing field \"" + key + "\"");
  const auto& v = obj.at(key);
  if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ParseError(where + "." + key + ": expected a string");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
      throw ParseError(where + "." + key + ": expected a non-negative integer");
    }
  }
  return v.get<T>();
}

}  // namespace detail

inline AdaptivePartition parse_partition(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed partition JSON: ") + e.what(), detail::line_of_offset(text, e.byte));
  }
  const auto version = detail::require_field<int>(doc, "version", "partition");
  if (version != kPartitionFormatVersion) {
    throw ParseError("partition.version: unsupported version " + std::to_string(version));
  }
  if (!doc.contains("params")) throw ParseError("partition: missing field \"params\"");
  PartitionParams params;
  params.max_cell_samples = detail::require_field<std::uint64_t>(doc["params"], "max_cell_samples", "params");
  params.max_level = detail::require_field<int>(doc["params"], "max_level", "params");
  try {
    params.validate();
  } catch (const ArgumentError& e) {
    throw ParseError(std::string("params: ") + e.what());
  }
  if (!doc.contains("leaves") || !doc["leaves"].is_array()) throw ParseError("partition: missing array \"leaves\"");
  std::vector<Leaf> leaves;
  leaves.reserve(doc["leaves"].size());
  std::size_t k = 0;
  for (const auto& item : doc["leaves"]) {
    const std::string where = "leaves[" + std::to_string(k++) + "]";
    const auto label = detail::require_field<std::string>(item, "label", where);
    Leaf leaf;
    try {
      leaf.cell = labelcodec::decode(label, params.max_level);
    } catch (const labelcodec::LabelError& e) {
      throw ParseError(where + ".label: " + e.what());
    }
    leaf.count = detail::require_field<std::uint64_t>(item, "count", where);
    leaves.push_back(leaf);
  }
  return AdaptivePartition::from_leaves(params, std::move(leaves));
}

inline void save_partition(const AdaptivePartition& p, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_partition(p));
}

inline AdaptivePartition load_partition(const std::filesystem::path& path) {
  return parse_partition(io::read_file(path));
}

}  // namespace geoseq
