#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "support/cli.hpp"

using json = nlohmann::json;

namespace {

const std::string kCli = GEOSEQ_CLI_PATH;
const std::string kFixtures = GEOSEQ_FIXTURE_DIR;
const std::string kData = GEOSEQ_DATA_DIR;

cli::Run geoseq(const std::vector<std::string>& args, const cli::TempDir& dir) { return cli::run(kCli, args, dir); }

void write(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) {
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

// Partition, label and train on the bundled synthetic corpus.
struct Pipeline {
  cli::TempDir dir{"cli_pipeline"};
  std::string partition = dir / "partition.json", labeled = dir / "labeled.tsv", model = dir / "model.json";

  Pipeline() {
    for (const auto& args : std::vector<std::vector<std::string>>{
             {"partition", "--input", kData + "/synthetic.tsv", "--max-cell-samples", "40", "--output", partition},
             {"label", "--input", kData + "/synthetic.tsv", "--partition", partition, "--output", labeled},
             {"train-baseline", "--train", labeled, "--partition", partition, "--alpha", "0.1", "--output", model}}) {
      const auto r = geoseq(args, dir);
      if (r.code != 0) throw std::runtime_error(args[0] + " failed: " + r.err);
    }
  }
};

}  // namespace

TEST(Usage, ExitCodes) {
  cli::TempDir dir("cli_usage");
  EXPECT_EQ(geoseq({}, dir).code, 1);
  EXPECT_EQ(geoseq({"frobnicate"}, dir).code, 1);
  EXPECT_EQ(geoseq({"partition", "--input", "x.tsv", "--output", "y.json", "--bogus"}, dir).code, 1);
  EXPECT_EQ(geoseq({"partition", "--input", "x.tsv"}, dir).code, 1);  // --output is required
  const auto help = geoseq({"--help"}, dir);
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("train-baseline"), std::string::npos);
}

TEST(Partition, EmptyInputGivesSixFacesAndIsReproducible) {
  cli::TempDir dir("cli_partition");
  write(dir / "empty.tsv", "");
  const std::vector<std::string> args{"partition", "--input", dir / "empty.tsv", "--max-cell-samples", "10",
                                      "--output", dir / "a.json"};
  const auto r = geoseq(args, dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["leaves"], 6);
  // The parameter record goes to stderr.
  EXPECT_EQ(json::parse(lines(r.err).at(0))["command"], "partition");
  auto again = args;
  again.back() = dir / "b.json";
  ASSERT_EQ(geoseq(again, dir).code, 0);
  EXPECT_EQ(cli::slurp(dir / "a.json"), cli::slurp(dir / "b.json"));
}

TEST(Partition, DataErrors) {
  cli::TempDir dir("cli_partition_err");
  EXPECT_EQ(geoseq({"partition", "--input", dir / "missing.tsv", "--output", dir / "p.json"}, dir).code, 2);
  write(dir / "bad.tsv", "a\t1\t2\tok\nb\t91\t0\tlatitude out of range\n");
  // Bad rows are reported and skipped.
  const auto r = geoseq({"partition", "--input", dir / "bad.tsv", "--output", dir / "p.json"}, dir);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("latitude out of range"), std::string::npos);
  EXPECT_EQ(json::parse(r.out)["total_points"], 1);
  EXPECT_EQ(geoseq({"partition", "--input", dir / "bad.tsv", "--max-cell-samples", "0", "--output", dir / "p.json"},
                   dir)
                .code,
            1);
}

TEST(Partition, SampleRowsJsonlMatchesTsv) {
  cli::TempDir dir("cli_jsonl");
  ASSERT_EQ(geoseq({"partition", "--input", kData + "/sample.tsv", "--max-cell-samples", "1", "--max-level", "4",
                    "--output", dir / "tsv.json"},
                   dir)
                .code,
            0);
  ASSERT_EQ(geoseq({"label", "--input", kData + "/sample.tsv", "--partition", dir / "tsv.json", "--output",
                    dir / "labeled.jsonl"},
                   dir)
                .code,
            0);
  ASSERT_EQ(geoseq({"partition", "--input", dir / "labeled.jsonl", "--max-cell-samples", "1", "--max-level", "4",
                    "--output", dir / "jsonl.json"},
                   dir)
                .code,
            0);
  EXPECT_EQ(cli::slurp(dir / "tsv.json"), cli::slurp(dir / "jsonl.json"));
  const auto rows = lines(cli::slurp(dir / "labeled.jsonl"));
  ASSERT_EQ(rows.size(), 6u);
  // York is alone in its level-3 cell.
  EXPECT_EQ(json::parse(rows[0])["label"], "2200");
}

TEST(Split, DeterministicAndComplete) {
  const Pipeline p;
  const auto& dir = p.dir;
  const std::vector<std::string> args{"split", "--input", p.labeled, "--seed", "3", "--train-output",
                                      dir / "train.tsv", "--test-output", dir / "test.tsv"};
  const auto r = geoseq(args, dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto counts = json::parse(r.out);
  const auto train = lines(cli::slurp(dir / "train.tsv")), test = lines(cli::slurp(dir / "test.tsv"));
  EXPECT_EQ(counts["train"], train.size());
  EXPECT_EQ(counts["test"], test.size());
  std::multiset<std::string> joined(train.begin(), train.end());
  joined.insert(test.begin(), test.end());
  const auto all = lines(cli::slurp(p.labeled));
  EXPECT_EQ(joined, std::multiset<std::string>(all.begin(), all.end()));
  EXPECT_NEAR(static_cast<double>(train.size()) / static_cast<double>(all.size()), 0.8, 0.05);
  const std::string before = cli::slurp(dir / "train.tsv");
  ASSERT_EQ(geoseq(args, dir).code, 0);
  EXPECT_EQ(cli::slurp(dir / "train.tsv"), before);
  EXPECT_EQ(geoseq({"split", "--input", p.labeled, "--train-fraction", "1.5", "--train-output", dir / "a",
                    "--test-output", dir / "b"},
                   dir)
                .code,
            1);
}

TEST(Predict, OptionValidation) {
  const Pipeline p;
  const std::vector<std::string> base{"predict", "--model", p.model, "--partition", p.partition};
  auto with = [&](std::vector<std::string> extra) {
    auto a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return geoseq(a, p.dir).code;
  };
  EXPECT_EQ(with({"--text", "x", "--beam", "0"}), 1);
  EXPECT_EQ(with({"--text", "x", "--beam", "3", "--top-k", "4"}), 1);
  EXPECT_EQ(with({}), 1);
  EXPECT_EQ(with({"--text", "x", "--input", p.labeled}), 1);
  EXPECT_EQ(with({"--text", "x"}), 0);
}

TEST(Predict, MemorizesUniqueTokens) {
  const Pipeline p;
  const auto r = geoseq({"predict", "--model", p.model, "--partition", p.partition, "--text", "place12 near12",
                         "--top-k", "3"},
                        p.dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rec = json::parse(r.out);
  ASSERT_EQ(rec["predictions"].size(), 3u);
  // Record r12 carries these tokens; the labeled file has no header.
  const auto row = lines(cli::slurp(p.labeled)).at(12);
  EXPECT_EQ(rec["predictions"][0]["label"], row.substr(row.rfind('\t') + 1));
}

TEST(Predict, ChecksumMismatchIsADataError) {
  const Pipeline p;
  ASSERT_EQ(geoseq({"partition", "--input", kData + "/synthetic.tsv", "--max-cell-samples", "80", "--output",
                    p.dir / "other.json"},
                   p.dir)
                .code,
            0);
  const auto r = geoseq({"predict", "--model", p.model, "--partition", p.dir / "other.json", "--text", "x"}, p.dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("checksum"), std::string::npos);
}

TEST(Predict, ExternalScoresReplay) {
  cli::TempDir dir("cli_replay");
  const auto queries = lines(cli::slurp(kFixtures + "/replay_queries.txt"));
  const auto stored = lines(cli::slurp(kFixtures + "/replay_predictions.jsonl"));
  ASSERT_EQ(queries.size(), stored.size());
  for (std::size_t k = 0; k < queries.size(); ++k) {
    const auto r = geoseq({"predict", "--model", kFixtures + "/replay_scores.jsonl", "--partition",
                           kFixtures + "/replay_partition.json", "--text", queries[k]},
                          dir);
    ASSERT_EQ(r.code, 0) << r.err;
    auto want = json::parse(stored[k]);
    want["id"] = "query";
    EXPECT_EQ(json::parse(r.out), want) << queries[k];
    EXPECT_EQ(r.err.find("warning"), std::string::npos);
  }
}

TEST(Evaluate, IdenticalPredictionsScoreOne) {
  const Pipeline p;
  ASSERT_EQ(geoseq({"predict", "--model", p.model, "--partition", p.partition, "--input", p.labeled, "--top-k", "1",
                    "--output", p.dir / "pred.jsonl"},
                   p.dir)
                .code,
            0);
  // Rewrite every prediction to its gold label.
  std::ostringstream perfect;
  for (const auto& l : lines(cli::slurp(p.dir / "pred.jsonl"))) {
    auto j = json::parse(l);
    j["predictions"][0]["label"] = j["gold_label"];
    perfect << j.dump() << '\n';
  }
  write(p.dir / "perfect.jsonl", perfect.str());
  const auto r = geoseq({"evaluate", "--pred", p.dir / "perfect.jsonl", "--gold", p.labeled, "--report",
                         p.dir / "report.json"},
                        p.dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = json::parse(cli::slurp(p.dir / "report.json"));
  EXPECT_EQ(rep["flat_accuracy"], 1.0);
  EXPECT_EQ(rep["hF"], 1.0);
  EXPECT_EQ(rep["n"], 2000);
}

TEST(Evaluate, InferenceExamplesFixture) {
  cli::TempDir dir("cli_eval");
  const auto r = geoseq({"evaluate", "--pred", kFixtures + "/inference_examples_pred.jsonl", "--gold",
                         kFixtures + "/inference_examples_gold.tsv", "--report", dir / "report.json"},
                        dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = json::parse(cli::slurp(dir / "report.json"));
  EXPECT_DOUBLE_EQ(rep["flat_accuracy"].get<double>(), 0.5);
  EXPECT_NEAR(rep["hP"].get<double>(), 41.0 / 48.0, 1e-12);
  EXPECT_NEAR(rep["hR"].get<double>(), 41.0 / 47.0, 1e-12);
  EXPECT_NEAR(rep["hF"].get<double>(), 82.0 / 95.0, 1e-12);
  EXPECT_NE(r.out.find("flat accuracy"), std::string::npos);
}

TEST(Evaluate, MissingIdsAreReported) {
  cli::TempDir dir("cli_eval_missing");
  std::string preds = cli::slurp(kFixtures + "/inference_examples_pred.jsonl");
  preds += R"({"id":"nope","text":"t","predictions":[{"label":"0","prob":1.0}]})" "\n";
  write(dir / "pred.jsonl", preds);
  const auto r = geoseq({"evaluate", "--pred", dir / "pred.jsonl", "--gold", kFixtures + "/inference_examples_gold.tsv",
                         "--report", dir / "report.json"},
                        dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope"), std::string::npos);
  EXPECT_EQ(json::parse(cli::slurp(dir / "report.json"))["n"], 6);

  write(dir / "bad.jsonl", "{\"id\": 1}\n");
  EXPECT_EQ(geoseq({"evaluate", "--pred", dir / "bad.jsonl", "--gold", kFixtures + "/inference_examples_gold.tsv",
                    "--report", dir / "r2.json"},
                   dir)
                .code,
            2);
}

TEST(Inspect, CellAndLevels) {
  cli::TempDir dir("cli_inspect");
  const auto r = geoseq({"inspect", "--cell", "431", "--levels", "2"}, dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = lines(r.out);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(json::parse(out[2])["cell_count"], 96);
  const auto cell = json::parse(out[3]);
  EXPECT_NEAR(cell["center"]["lat"].get<double>(), -34.739159491141486, 1e-9);
  EXPECT_NEAR(cell["center"]["lon"].get<double>(), -78.231711067979361, 1e-9);
  EXPECT_EQ(cell["ancestors"], json::array({"4", "43"}));
  EXPECT_EQ(geoseq({"inspect", "--cell", "461"}, dir).code, 2);
  EXPECT_EQ(geoseq({"inspect"}, dir).code, 1);
}

TEST(Serve, ConfigurationErrors) {
  cli::TempDir dir("cli_serve");
  EXPECT_EQ(geoseq({"serve"}, dir).code, 1);
  const std::string part = kFixtures + "/service/partition.json";
  const auto r = geoseq({"serve", "--port", "0", "--partition", part, "--model", dir / "missing.json"}, dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("failed to load"), std::string::npos);
  ::setenv("GEOSEQ_TOP_K", "many", 1);
  const auto env = geoseq({"serve", "--partition", part, "--model", kFixtures + "/service/model.json"}, dir);
  ::unsetenv("GEOSEQ_TOP_K");
  EXPECT_EQ(env.code, 1);
  EXPECT_NE(env.err.find("GEOSEQ_TOP_K"), std::string::npos);
}
