// geoseq: command-line entry point for the partition / label / split /
// train / predict / evaluate pipeline and the REST service.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 internal error.
// Machine-readable output goes to stdout; the parameter record of every run
// and all diagnostics go to stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "geoseq/dataset.hpp"
#include "geoseq/decode.hpp"
#include "geoseq/http_server.hpp"
#include "geoseq/metrics.hpp"
#include "geoseq/partition.hpp"
#include "geoseq/service.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a run finished but the data had problems worth a nonzero exit.
struct DataProblem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void print_params(const std::string& command, const json& params) {
  json rec;
  rec["command"] = command;
  rec["params"] = params;
  std::cerr << rec.dump() << '\n';
}

void print_report(const std::string& what, const geoseq::dataset::RejectionReport& report) {
  json rec;
  rec[what] = geoseq::dataset::report_to_json(report);
  std::cerr << rec.dump() << '\n';
  for (const auto& r : report.samples) std::cerr << "  rejected line " << r.line << ": " << r.reason << '\n';
}

geoseq::dataset::RecordFormat resolve_format(const std::string& flag, const fs::path& path) {
  if (flag.empty() || flag == "auto") return geoseq::dataset::format_for_path(path);
  try {
    return geoseq::dataset::parse_format(flag);
  } catch (const geoseq::ArgumentError& e) {
    throw UsageError(e.what());
  }
}

const char* format_name(geoseq::dataset::RecordFormat f) {
  return f == geoseq::dataset::RecordFormat::kTsv ? "tsv" : "jsonl";
}

template <typename Fn>
auto validated(Fn&& fn) {
  try {
    return fn();
  } catch (const geoseq::ArgumentError& e) {
    throw UsageError(e.what());
  }
}

void require_input(const fs::path& path) {
  if (!fs::exists(path)) throw geoseq::ParseError("cannot open " + path.string() + ": no such file");
}

std::shared_ptr<const geoseq::AdaptivePartition> load_partition_ptr(const fs::path& path) {
  require_input(path);
  return std::make_shared<const geoseq::AdaptivePartition>(geoseq::load_partition(path));
}

// ---------------------------------------------------------------------------

struct PartitionArgs {
  std::string input, format, output;
  std::uint64_t max_cell_samples = geoseq::kDefaultMaxCellSamples;
  int max_level = geoseq::kDefaultMaxLevel;
};

int run_partition(const PartitionArgs& a) {
  const geoseq::PartitionParams params{a.max_cell_samples, a.max_level};
  validated([&] { params.validate(); return 0; });
  const auto format = resolve_format(a.format, a.input);
  print_params("partition", {{"input", a.input},
                             {"format", format_name(format)},
                             {"max_cell_samples", a.max_cell_samples},
                             {"max_level", a.max_level},
                             {"output", a.output}});
  require_input(a.input);
  geoseq::PartitionBuilder builder(params);
  const auto report =
      geoseq::dataset::parse_records(fs::path(a.input), format, [&](const geoseq::dataset::RawRecord& r) {
        builder.add(r.loc());
      });
  print_report("records", report);
  const auto partition = builder.build();
  geoseq::save_partition(partition, a.output);
  json summary{{"leaves", partition.size()},
               {"total_points", partition.total_points()},
               {"checksum", geoseq::partition_checksum(partition)}};
  std::cout << summary.dump() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct LabelArgs {
  std::string input, format, partition, output, output_format;
};

int run_label(const LabelArgs& a) {
  const auto in_format = resolve_format(a.format, a.input);
  const auto out_format = resolve_format(a.output_format, a.output);
  print_params("label", {{"input", a.input},
                         {"format", format_name(in_format)},
                         {"partition", a.partition},
                         {"output", a.output},
                         {"output_format", format_name(out_format)}});
  const auto partition = load_partition_ptr(a.partition);
  require_input(a.input);
  geoseq::dataset::RejectionReport report;
  geoseq::io::write_stream_atomic(a.output, [&](std::ofstream& out) {
    report = geoseq::dataset::parse_records(fs::path(a.input), in_format, [&](geoseq::dataset::RawRecord r) {
      geoseq::dataset::write_record(out, geoseq::dataset::label_record(std::move(r), *partition), out_format);
    });
  });
  print_report("records", report);
  return kOk;
}

// ---------------------------------------------------------------------------

struct SplitArgs {
  std::string input, format, train_output, test_output;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

int run_split(const SplitArgs& a) {
  const geoseq::dataset::SplitSpec spec{a.train_fraction, a.seed};
  validated([&] { spec.validate(); return 0; });
  const auto format = resolve_format(a.format, a.input);
  print_params("split", {{"input", a.input},
                         {"format", format_name(format)},
                         {"train_fraction", a.train_fraction},
                         {"seed", a.seed},
                         {"train_output", a.train_output},
                         {"test_output", a.test_output}});
  require_input(a.input);
  std::uint64_t n_train = 0, n_test = 0;
  geoseq::dataset::RejectionReport report;
  geoseq::io::write_stream_atomic(a.train_output, [&](std::ofstream& train) {
    geoseq::io::write_stream_atomic(a.test_output, [&](std::ofstream& test) {
      report = geoseq::dataset::parse_rows(fs::path(a.input), format, [&](const geoseq::dataset::LabeledRecord& r) {
        const bool is_train = geoseq::dataset::in_train(r.record.id, spec);
        geoseq::dataset::write_record(is_train ? train : test, r, format);
        ++(is_train ? n_train : n_test);
      });
    });
  });
  print_report("records", report);
  std::cout << json{{"train", n_train}, {"test", n_test}}.dump() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string train, format, partition, output;
  double alpha = geoseq::kDefaultAlpha;
};

int run_train(const TrainArgs& a) {
  if (!(a.alpha > 0.0)) throw UsageError("--alpha must be > 0");
  const auto format = resolve_format(a.format, a.train);
  print_params("train-baseline", {{"train", a.train},
                                  {"format", format_name(format)},
                                  {"partition", a.partition},
                                  {"alpha", a.alpha},
                                  {"tokenizer", geoseq::kTokenizerId},
                                  {"output", a.output}});
  auto partition = load_partition_ptr(a.partition);
  require_input(a.train);
  geoseq::BaselineModel model(partition, a.alpha);
  const auto report = geoseq::dataset::parse_labeled_records(
      fs::path(a.train), format,
      [&](const geoseq::dataset::LabeledRecord& r) {
        try {
          model.add(r.label, r.record.text);
        } catch (const geoseq::ArgumentError& e) {
          throw geoseq::ParseError(std::string("record ") + r.record.id + ": " + e.what());
        }
      },
      partition->params().max_level);
  print_report("records", report);
  if (model.total_records() == 0) throw geoseq::ParseError("training set is empty");
  geoseq::save_baseline(model, a.output);
  std::cout << json{{"records", model.total_records()}, {"vocabulary", model.vocabulary_size()}}.dump() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model, partition, text, input, format, output;
  int beam = geoseq::kDefaultBeamWidth;
  int top_k = geoseq::kDefaultTopK;
};

int run_predict(const PredictArgs& a) {
  const geoseq::BeamOptions opts{a.beam, a.top_k};
  validated([&] { opts.validate(); return 0; });
  if (a.text.empty() == a.input.empty()) throw UsageError("give exactly one of --text or --input");
  json params{{"model", a.model}, {"partition", a.partition}, {"beam", a.beam}, {"top_k", a.top_k}};
  std::optional<geoseq::dataset::RecordFormat> format;
  if (!a.input.empty()) {
    format = resolve_format(a.format, a.input);
    params["input"] = a.input;
    params["format"] = format_name(*format);
  } else {
    params["text"] = a.text;
  }
  if (!a.output.empty()) params["output"] = a.output;
  print_params("predict", params);

  auto partition = load_partition_ptr(a.partition);
  require_input(a.model);
  const auto loaded = geoseq::load_model(a.model, partition);
  const geoseq::LabelTrie trie(*partition);

  auto emit_all = [&](std::ostream& out) {
    auto predict_one = [&](geoseq::PredictionRecord rec) {
      rec.predictions = geoseq::beam_decode(*loaded.scorer, rec.text, trie, opts);
      out << geoseq::format_prediction_record(rec) << '\n';
    };
    if (!a.text.empty()) {
      predict_one({"query", a.text, std::nullopt, {}});
      return;
    }
    require_input(a.input);
    const auto report =
        geoseq::dataset::parse_rows(fs::path(a.input), *format, [&](geoseq::dataset::LabeledRecord r) {
          std::optional<std::string> gold;
          if (!r.label.empty()) gold = r.label;
          predict_one({std::move(r.record.id), std::move(r.record.text), std::move(gold), {}});
        });
    print_report("records", report);
  };
  if (a.output.empty()) {
    emit_all(std::cout);
  } else {
    geoseq::io::write_stream_atomic(a.output, [&](std::ofstream& out) { emit_all(out); });
  }
  if (const auto* replay = dynamic_cast<const geoseq::ReplayScorer*>(loaded.scorer.get());
      replay != nullptr && replay->misses() > 0) {
    std::cerr << "warning: " << replay->misses() << " (text, prefix) lookups not in the scores file; used uniform\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string pred, gold, format, report;
};

int run_evaluate(const EvaluateArgs& a) {
  const auto format = resolve_format(a.format, a.gold);
  print_params("evaluate", {{"pred", a.pred}, {"gold", a.gold}, {"format", format_name(format)}, {"report", a.report}});
  require_input(a.gold);
  require_input(a.pred);

  struct Gold {
    std::string label;
    geoseq::LatLon loc;
  };
  std::map<std::string, Gold> gold;
  const auto gold_report = geoseq::dataset::parse_labeled_records(
      fs::path(a.gold), format, [&](const geoseq::dataset::LabeledRecord& r) {
        gold.insert_or_assign(r.record.id, Gold{r.label, r.record.loc()});
      });
  print_report("gold", gold_report);

  std::vector<geoseq::metrics::EvalPair> pairs;
  std::vector<std::string> missing;
  std::ifstream in(a.pred, std::ios::binary);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    geoseq::PredictionRecord rec;
    try {
      rec = geoseq::parse_prediction_record(line);
    } catch (const geoseq::ParseError& e) {
      throw geoseq::ParseError(e.what(), line_no);
    }
    if (rec.predictions.empty()) throw geoseq::ParseError("record " + rec.id + " has no predictions", line_no);
    auto it = gold.find(rec.id);
    if (it == gold.end()) {
      missing.push_back(rec.id);
      continue;
    }
    pairs.push_back({rec.predictions.front().label, it->second.label, it->second.loc});
  }
  if (!missing.empty()) {
    std::cerr << missing.size() << " prediction id(s) missing from gold:\n";
    for (const auto& id : missing) std::cerr << "  " << id << '\n';
  }
  if (pairs.empty()) throw geoseq::ParseError("no prediction ids match the gold file");

  const auto report = geoseq::metrics::evaluate(pairs);
  geoseq::io::write_file_atomic(a.report, geoseq::metrics::to_json(report).dump(2) + "\n");
  std::cout << geoseq::metrics::to_table(report);
  if (!missing.empty()) throw DataProblem(std::to_string(missing.size()) + " prediction id(s) missing from gold");
  return kOk;
}

// ---------------------------------------------------------------------------

int run_serve(geoseq::service::ServiceConfig cfg) {
  validated([&] {
    geoseq::service::apply_env(cfg);
    geoseq::BeamOptions{cfg.beam_width, cfg.top_k}.validate();
    return 0;
  });
  if (cfg.partition_path.empty() || cfg.model_path.empty()) throw UsageError("--partition and --model are required");
  if (cfg.port < 0 || cfg.port > 65535) throw UsageError("--port must be in [0, 65535]");
  print_params("serve", {{"host", cfg.host},
                         {"port", cfg.port},
                         {"partition", cfg.partition_path},
                         {"model", cfg.model_path},
                         {"beam_width", cfg.beam_width},
                         {"top_k", cfg.top_k},
                         {"cors_allow", cfg.cors_allow},
                         {"densify_points", cfg.geojson.densify_points},
                         {"densify_max_level", cfg.geojson.densify_max_level}});
  geoseq::service::GeocodeService service(cfg);
  httplib::Server server;
  if (!geoseq::service::run_server(service, server)) {
    throw geoseq::ParseError("service stopped: could not bind or load");
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct InspectArgs {
  std::string partition, cell;
  int levels = -1;
};

json cell_info(const std::string& label) {
  const auto cell = geoseq::labelcodec::decode(label, geoseq::kMaxSupportedLevel);
  const auto center = geoseq::cell_center(cell);
  json vertices = json::array();
  for (const auto& v : geoseq::cell_vertices(cell)) vertices.push_back({{"lat", v.lat()}, {"lon", v.lon()}});
  return {{"label", label},
          {"face", cell.face()},
          {"level", cell.level()},
          {"center", {{"lat", center.lat()}, {"lon", center.lon()}}},
          {"vertices", vertices},
          {"area_km2", geoseq::cell_area_km2(cell)},
          {"ancestors", geoseq::labelcodec::ancestors(label)}};
}

int run_inspect(const InspectArgs& a) {
  if (a.partition.empty() && a.cell.empty() && a.levels < 0) {
    throw UsageError("give at least one of --levels, --partition, --cell");
  }
  if (a.levels > geoseq::kMaxSupportedLevel) {
    throw UsageError("--levels must be <= " + std::to_string(geoseq::kMaxSupportedLevel));
  }
  print_params("inspect", {{"levels", a.levels}, {"partition", a.partition}, {"cell", a.cell}});
  if (a.levels >= 0) {
    for (int l = 0; l <= a.levels; ++l) {
      const auto s = geoseq::level_stats(l);
      std::cout << json{{"level", s.level}, {"cell_count", s.cell_count}, {"avg_area_km2", s.avg_area_km2}}.dump()
                << '\n';
    }
  }
  if (!a.partition.empty()) {
    const auto p = load_partition_ptr(a.partition);
    std::map<int, std::size_t> by_level;
    for (const auto& leaf : p->leaves()) ++by_level[leaf.cell.level()];
    json hist = json::object();
    for (const auto& [level, n] : by_level) hist[std::to_string(level)] = n;
    std::cout << json{{"leaves", p->size()},
                      {"total_points", p->total_points()},
                      {"max_cell_samples", p->params().max_cell_samples},
                      {"max_level", p->params().max_level},
                      {"leaves_by_level", hist},
                      {"checksum", geoseq::partition_checksum(*p)}}
                     .dump()
              << '\n';
  }
  if (!a.cell.empty()) std::cout << cell_info(a.cell).dump() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geoseq: text geocoding over adaptive cube-sphere cells"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  PartitionArgs pa;
  auto* partition = app.add_subcommand("partition", "Build an adaptive partition from point records");
  partition->add_option("--input", pa.input, "Records (tsv or jsonl)")->required();
  partition->add_option("--format", pa.format, "tsv, jsonl or auto (by extension)");
  partition->add_option("--max-cell-samples", pa.max_cell_samples, "Split cells holding more points than this")
      ->capture_default_str();
  partition->add_option("--max-level", pa.max_level, "Deepest level")->capture_default_str();
  partition->add_option("--output", pa.output, "Partition file")->required();

  LabelArgs la;
  auto* label = app.add_subcommand("label", "Attach leaf labels to records");
  label->add_option("--input", la.input)->required();
  label->add_option("--format", la.format);
  label->add_option("--partition", la.partition)->required();
  label->add_option("--output", la.output)->required();
  label->add_option("--output-format", la.output_format);

  SplitArgs sa;
  auto* split = app.add_subcommand("split", "Deterministic train/test split by hashed record id");
  split->add_option("--input", sa.input)->required();
  split->add_option("--format", sa.format);
  split->add_option("--train-fraction", sa.train_fraction)->capture_default_str();
  split->add_option("--seed", sa.seed)->capture_default_str();
  split->add_option("--train-output", sa.train_output)->required();
  split->add_option("--test-output", sa.test_output)->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train-baseline", "Train the naive Bayes baseline scorer");
  train->add_option("--train", ta.train, "Labeled training records")->required();
  train->add_option("--format", ta.format);
  train->add_option("--partition", ta.partition)->required();
  train->add_option("--alpha", ta.alpha, "Additive smoothing")->capture_default_str();
  train->add_option("--output", ta.output)->required();

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Decode texts into ranked cell labels (JSON lines)");
  predict->add_option("--model", pr.model, "Baseline model or external-scores file")->required();
  predict->add_option("--partition", pr.partition)->required();
  predict->add_option("--text", pr.text, "Single query");
  predict->add_option("--input", pr.input, "Records to predict (labels, if present, become gold_label)");
  predict->add_option("--format", pr.format);
  predict->add_option("--output", pr.output, "Write to a file instead of stdout");
  predict->add_option("--beam", pr.beam)->capture_default_str();
  predict->add_option("--top-k", pr.top_k)->capture_default_str();

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold labels");
  evaluate->add_option("--pred", ea.pred, "Predictions (JSON lines)")->required();
  evaluate->add_option("--gold", ea.gold, "Labeled records")->required();
  evaluate->add_option("--format", ea.format, "Gold file format");
  evaluate->add_option("--report", ea.report, "Report JSON output")->required();

  geoseq::service::ServiceConfig sc;
  auto* serve = app.add_subcommand("serve", "Run the REST service (environment overrides flags)");
  serve->add_option("--host", sc.host)->capture_default_str();
  serve->add_option("--port", sc.port)->capture_default_str();
  serve->add_option("--partition", sc.partition_path);
  serve->add_option("--model", sc.model_path);
  serve->add_option("--beam-width", sc.beam_width)->capture_default_str();
  serve->add_option("--top-k", sc.top_k)->capture_default_str();
  serve->add_option("--cors-allow", sc.cors_allow, "Allowed origin (repeatable, * for any)");
  serve->add_option("--densify-points", sc.geojson.densify_points)->capture_default_str();
  serve->add_option("--densify-max-level", sc.geojson.densify_max_level)->capture_default_str();

  InspectArgs ia;
  auto* inspect = app.add_subcommand("inspect", "Level statistics, partition summary or cell geometry");
  inspect->add_option("--levels", ia.levels, "Print level stats for levels 0..N");
  inspect->add_option("--partition", ia.partition);
  inspect->add_option("--cell", ia.cell, "Label of a cell to describe");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*partition) return run_partition(pa);
    if (*label) return run_label(la);
    if (*split) return run_split(sa);
    if (*train) return run_train(ta);
    if (*predict) return run_predict(pr);
    if (*evaluate) return run_evaluate(ea);
    if (*serve) return run_serve(sc);
    if (*inspect) return run_inspect(ia);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataProblem& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const geoseq::ChecksumMismatch& e) {
    std::cerr << "checksum mismatch: " << e.what() << "\n";
    return kData;
  } catch (const geoseq::ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const geoseq::ArgumentError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
