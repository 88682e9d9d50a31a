#pragma once

// Geo-tagged text records: parsing (TSV / JSONL), labeling against a
// partition, and a seeded hash split into train and test.
//
// TSV dialect: tab separated, no quoting, UTF-8, columns
//   id  latitude  longitude  text  [label]
// An optional header row is recognized by non-numeric coordinate columns in
// the first row. JSONL: one object per line with "id", "latitude",
// "longitude", "text" and optionally "label".

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "geoseq/hash.hpp"
#include "geoseq/io.hpp"
#include "geoseq/labelcodec.hpp"
#include "geoseq/partition.hpp"

namespace geoseq::dataset {

struct RawRecord {
  std::string id;
  double latitude = 0.0;
  double longitude = 0.0;
  std::string text;

  LatLon loc() const { return {latitude, longitude}; }
  friend bool operator==(const RawRecord&, const RawRecord&) = default;
};

struct LabeledRecord {
  RawRecord record;
  std::string label;

  friend bool operator==(const LabeledRecord&, const LabeledRecord&) = default;
};

enum class RecordFormat { kTsv, kJsonl };

inline RecordFormat parse_format(std::string_view name) {
  if (name == "tsv") return RecordFormat::kTsv;
  if (name == "jsonl") return RecordFormat::kJsonl;
  throw ArgumentError("unknown record format: " + std::string(name) + " (expected tsv or jsonl)");
}

/// Guess from the extension: .jsonl / .json / .ndjson are JSONL, everything else TSV.
inline RecordFormat format_for_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return RecordFormat::kJsonl;
  return RecordFormat::kTsv;
}

struct Rejection {
  std::size_t line;
  std::string reason;
};

struct RejectionReport {
  std::uint64_t accepted = 0;
  std::uint64_t rejected = 0;
  std::map<std::string, std::uint64_t> by_reason;
  /// First rejections, for diagnostics.
  std::vector<Rejection> samples;
  static constexpr std::size_t kMaxSamples = 100;

  void reject(std::size_t line, std::string reason) {
    ++rejected;
    ++by_reason[reason];
    if (samples.size() < kMaxSamples) samples.push_back({line, std::move(reason)});
  }
};

namespace detail {

inline bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\v\f") == std::string_view::npos;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

// Empty optional = accepted; otherwise the rejection reason.
inline std::optional<std::string> check_record(const RawRecord& r) {
  if (r.id.empty()) return "empty id";
  if (!(r.latitude >= -90.0 && r.latitude <= 90.0)) return "latitude out of range";
  if (!(r.longitude >= -180.0 && r.longitude <= 180.0)) return "longitude out of range";
  if (blank(r.text)) return "empty text";
  return std::nullopt;
}

struct ParsedLine {
  std::optional<RawRecord> record;
  std::optional<std::string> label;
  std::string reason;  // set when record is empty
  bool header = false;
};

inline ParsedLine parse_tsv_line(std::string_view line, bool first_row) {
  ParsedLine out;
  const auto fields = split_tabs(line);
  if (fields.size() != 4 && fields.size() != 5) {
    out.reason = "wrong field count";
    return out;
  }
  RawRecord r;
  r.id = std::string(fields[0]);
  const bool lat_ok = io::parse_double(fields[1], r.latitude);
  const bool lon_ok = io::parse_double(fields[2], r.longitude);
  if (first_row && !lat_ok && !lon_ok) {
    out.header = true;
    return out;
  }
  if (!lat_ok) {
    out.reason = "latitude not a number";
    return out;
  }
  if (!lon_ok) {
    out.reason = "longitude not a number";
    return out;
  }
  r.text = std::string(fields[3]);
  if (auto bad = check_record(r)) {
    out.reason = *bad;
    return out;
  }
  if (fields.size() == 5) out.label = std::string(fields[4]);
  out.record = std::move(r);
  return out;
}

inline bool json_number(const nlohmann::json& obj, const char* a, const char* b, double& out) {
  for (const char* key : {a, b}) {
    if (obj.contains(key)) {
      const auto& v = obj[key];
      if (v.is_number()) {
        out = v.get<double>();
        return true;
      }
      if (v.is_string()) return io::parse_double(v.get<std::string>(), out);
      return false;
    }
  }
  return false;
}

inline ParsedLine parse_jsonl_line(std::string_view line) {
  ParsedLine out;
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    out.reason = "malformed json";
    return out;
  }
  if (!obj.is_object()) {
    out.reason = "malformed json";
    return out;
  }
  RawRecord r;
  if (obj.contains("id")) {
    if (obj["id"].is_string()) {
      r.id = obj["id"].get<std::string>();
    } else if (obj["id"].is_number_integer()) {
      r.id = obj["id"].dump();
    }
  }
  if (!json_number(obj, "latitude", "lat", r.latitude)) {
    out.reason = "latitude not a number";
    return out;
  }
  if (!json_number(obj, "longitude", "lon", r.longitude)) {
    out.reason = "longitude not a number";
    return out;
  }
  if (obj.contains("text") && obj["text"].is_string()) r.text = obj["text"].get<std::string>();
  if (auto bad = check_record(r)) {
    out.reason = *bad;
    return out;
  }
  if (obj.contains("label") && obj["label"].is_string()) out.label = obj["label"].get<std::string>();
  out.record = std::move(r);
  return out;
}

// Calls on_row(record, label, line_no) for every valid row; a returned
// reason rejects the row.
template <typename Fn>
RejectionReport read_rows(std::istream& in, RecordFormat format, Fn&& on_row) {
  RejectionReport report;
  std::string line;
  std::size_t line_no = 0;
  bool first_row = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    ParsedLine parsed = format == RecordFormat::kTsv ? parse_tsv_line(line, first_row) : parse_jsonl_line(line);
    first_row = false;
    if (parsed.header) continue;
    if (!parsed.record) {
      report.reject(line_no, parsed.reason);
      continue;
    }
    if (auto reason = on_row(std::move(*parsed.record), std::move(parsed.label), line_no)) {
      report.reject(line_no, std::move(*reason));
      continue;
    }
    ++report.accepted;
  }
  return report;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

}  // namespace detail

/// Streams valid records in file order; invalid rows are counted with reasons.
template <typename Fn>
RejectionReport parse_records(std::istream& in, RecordFormat format, Fn&& on_record) {
  return detail::read_rows(in, format,
                           [&](RawRecord r, std::optional<std::string>, std::size_t) -> std::optional<std::string> {
                             on_record(std::move(r));
                             return std::nullopt;
                           });
}

template <typename Fn>
RejectionReport parse_records(const std::filesystem::path& path, RecordFormat format, Fn&& on_record) {
  auto in = detail::open_input(path);
  return parse_records(in, format, std::forward<Fn>(on_record));
}

/// Like parse_records, for files that carry a label column; rows with a
/// missing or invalid label are rejected.
template <typename Fn>
RejectionReport parse_labeled_records(std::istream& in, RecordFormat format, Fn&& on_record,
                                      int max_level = kMaxSupportedLevel) {
  return detail::read_rows(
      in, format, [&](RawRecord r, std::optional<std::string> label, std::size_t) -> std::optional<std::string> {
        if (!label || label->empty()) return std::string("missing label");
        try {
          labelcodec::decode(*label, max_level);
        } catch (const labelcodec::LabelError& e) {
          return std::string("invalid label: ") + labelcodec::to_string(e.kind());
        }
        on_record(LabeledRecord{std::move(r), std::move(*label)});
        return std::nullopt;
      });
}

template <typename Fn>
RejectionReport parse_labeled_records(const std::filesystem::path& path, RecordFormat format, Fn&& on_record,
                                      int max_level = kMaxSupportedLevel) {
  auto in = detail::open_input(path);
  return parse_labeled_records(in, format, std::forward<Fn>(on_record), max_level);
}

/// Streams records whether or not they carry a label column; the label is
/// empty when absent and validated when present.
template <typename Fn>
RejectionReport parse_rows(std::istream& in, RecordFormat format, Fn&& on_record) {
  return detail::read_rows(
      in, format, [&](RawRecord r, std::optional<std::string> label, std::size_t) -> std::optional<std::string> {
        if (label && !label->empty()) {
          try {
            labelcodec::decode(*label, kMaxSupportedLevel);
          } catch (const labelcodec::LabelError& e) {
            return std::string("invalid label: ") + labelcodec::to_string(e.kind());
          }
        }
        on_record(LabeledRecord{std::move(r), label.value_or(std::string{})});
        return std::nullopt;
      });
}

template <typename Fn>
RejectionReport parse_rows(const std::filesystem::path& path, RecordFormat format, Fn&& on_record) {
  auto in = detail::open_input(path);
  return parse_rows(in, format, std::forward<Fn>(on_record));
}

inline LabeledRecord label_record(RawRecord r, const AdaptivePartition& partition) {
  std::string label = labelcodec::encode(partition.leaf_for(r.loc()));
  return {std::move(r), std::move(label)};
}

template <typename Range>
std::vector<LabeledRecord> label_records(const Range& records, const AdaptivePartition& partition) {
  std::vector<LabeledRecord> out;
  for (const auto& r : records) out.push_back(label_record(r, partition));
  return out;
}

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ArgumentError("train_fraction must be in (0, 1)");
  }
};

/// Uniform value in [0, 1) derived from (id, seed) only.
inline double split_key(std::string_view id, std::uint64_t seed) noexcept {
  const std::uint64_t h = mix64(fnv1a64(id) ^ mix64(seed));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline bool in_train(std::string_view id, const SplitSpec& spec) noexcept {
  return split_key(id, spec.seed) < spec.train_fraction;
}

template <typename Record>
std::pair<std::vector<Record>, std::vector<Record>> split(const std::vector<Record>& records, const SplitSpec& spec) {
  spec.validate();
  std::pair<std::vector<Record>, std::vector<Record>> out;
  for (const auto& r : records) {
    const std::string& id = [&]() -> const std::string& {
      if constexpr (std::is_same_v<Record, LabeledRecord>) {
        return r.record.id;
      } else {
        return r.id;
      }
    }();
    (in_train(id, spec) ? out.first : out.second).push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Writers

namespace detail {

// TSV has no quoting; tabs and line breaks inside text become spaces.
inline std::string tsv_safe(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

}  // namespace detail

/// An empty label is omitted.
inline void write_record(std::ostream& out, const LabeledRecord& r, RecordFormat format) {
  if (format == RecordFormat::kTsv) {
    out << detail::tsv_safe(r.record.id) << '\t' << io::format_double(r.record.latitude) << '\t'
        << io::format_double(r.record.longitude) << '\t' << detail::tsv_safe(r.record.text);
    if (!r.label.empty()) out << '\t' << r.label;
    out << '\n';
    return;
  }
  nlohmann::ordered_json obj;
  obj["id"] = r.record.id;
  obj["latitude"] = r.record.latitude;
  obj["longitude"] = r.record.longitude;
  obj["text"] = r.record.text;
  if (!r.label.empty()) obj["label"] = r.label;
  out << obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
}

inline nlohmann::ordered_json report_to_json(const RejectionReport& report) {
  nlohmann::ordered_json j;
  j["accepted"] = report.accepted;
  j["rejected"] = report.rejected;
  j["by_reason"] = nlohmann::ordered_json::object();
  for (const auto& [reason, n] : report.by_reason) j["by_reason"][reason] = n;
  return j;
}

}  // namespace geoseq::dataset
