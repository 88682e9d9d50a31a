#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "geoseq/baseline.hpp"
#include "geoseq/beam.hpp"
#include "geoseq/replay.hpp"
#include "geoseq/scorer.hpp"

namespace geoseq {

struct LoadedModel {
  std::shared_ptr<const SequenceScorer> scorer;
  std::string model_id;
  std::string kind;  // "baseline" or "replay"
};

/// Loads either a baseline model file (checked against `partition`) or an
/// external-scores file, telling them apart by content.
inline LoadedModel load_model(const std::filesystem::path& path, std::shared_ptr<const AdaptivePartition> partition) {
  const std::string text = io::read_file(path);
  const std::string digest = to_hex(fnv1a64(text));
  if (looks_like_baseline(text)) {
    auto model = std::make_shared<const BaselineModel>(parse_baseline(text, std::move(partition)));
    const std::string id = "baseline:" + digest;
    return {std::make_shared<BaselineScorer>(model, id), id, "baseline"};
  }
  std::istringstream in(text);
  const std::string id = "replay:" + digest;
  return {parse_external_scores(in, id), id, "replay"};
}

}  // namespace geoseq
