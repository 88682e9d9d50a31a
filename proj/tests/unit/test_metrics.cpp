#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "geoseq/metrics.hpp"
#include "oracle/reference.hpp"

using namespace geoseq;
using namespace geoseq::metrics;

namespace {

// Six inference examples (predicted, true).
const std::vector<EvalPair> kExamples{{"21002321", "21002321", {}}, {"20302303", "20302303", {}},
                                      {"20331122", "20331122", {}}, {"210033112", "210033113", {}},
                                      {"1333313", "133302", {}},     {"20331203", "20331022", {}}};

// Ancestor closures of two labels share exactly their common prefixes.
std::size_t common_prefix(const std::string& a, const std::string& b) {
  std::size_t n = 0;
  while (n < a.size() && n < b.size() && a[n] == b[n]) ++n;
  return n;
}

std::string random_label(std::mt19937_64& rng, std::size_t len) {
  std::string s(1, static_cast<char>('0' + rng() % 6));
  while (s.size() < len) s.push_back(static_cast<char>('0' + rng() % 4));
  return s;
}

}  // namespace

TEST(Hierarchical, SiblingCells) {
  const std::vector<EvalPair> one{{"431", "432", {}}};
  const auto s = hierarchical_scores(one);
  EXPECT_NEAR(s.hP, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.hR, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.hF, 2.0 / 3.0, 1e-12);
  const std::vector<EvalPair> same{{"431", "431", {}}};
  const auto t = hierarchical_scores(same);
  EXPECT_EQ(t.hP, 1.0);
  EXPECT_EQ(t.hR, 1.0);
  EXPECT_EQ(t.hF, 1.0);
}

TEST(Hierarchical, PerRowCounts) {
  const std::vector<std::uint64_t> inter{8, 8, 8, 8, 4, 5}, pred{8, 8, 8, 9, 7, 8}, gold{8, 8, 8, 9, 6, 8};
  for (std::size_t k = 0; k < kExamples.size(); ++k) {
    const auto c = pair_counts(kExamples[k]);
    EXPECT_EQ(c.intersection, inter[k]) << k;
    EXPECT_EQ(c.predicted, pred[k]) << k;
    EXPECT_EQ(c.gold, gold[k]) << k;
  }
  const std::vector<EvalPair> school{kExamples[3]};
  EXPECT_NEAR(hierarchical_scores(school).hP, 8.0 / 9.0, 1e-12);
  EXPECT_NEAR(hierarchical_scores(school).hR, 8.0 / 9.0, 1e-12);
}

TEST(Hierarchical, InferenceExamplesMicroAveraged) {
  // sum |P n T| = 41, sum |P| = 48, sum |T| = 47.
  const auto s = hierarchical_scores(kExamples);
  EXPECT_NEAR(s.hP, 41.0 / 48.0, 1e-12);
  EXPECT_NEAR(s.hR, 41.0 / 47.0, 1e-12);
  EXPECT_NEAR(s.hF, 82.0 / 95.0, 1e-12);
  EXPECT_NEAR(flat_accuracy(kExamples), 0.5, 1e-12);
}

TEST(Hierarchical, MatchesCommonPrefixOracle) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<EvalPair> pairs;
    double inter = 0, p = 0, t = 0;
    const int n = 1 + static_cast<int>(rng() % 20);
    for (int k = 0; k < n; ++k) {
      std::string a = random_label(rng, 1 + rng() % 10);
      std::string b = rng() % 3 == 0 ? a.substr(0, 1 + rng() % a.size()) : random_label(rng, 1 + rng() % 10);
      if (rng() % 4 == 0) b = a;
      inter += static_cast<double>(common_prefix(a, b));
      p += static_cast<double>(a.size());
      t += static_cast<double>(b.size());
      pairs.push_back({a, b, {}});
    }
    const auto s = hierarchical_scores(pairs);
    EXPECT_NEAR(s.hP, inter / p, 1e-12);
    EXPECT_NEAR(s.hR, inter / t, 1e-12);
    const double f = inter == 0 ? 0.0 : 2 * (inter / p) * (inter / t) / (inter / p + inter / t);
    EXPECT_NEAR(s.hF, f, 1e-12);
  }
}

TEST(Hierarchical, EqualLengthsGiveEqualPrecisionAndRecall) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<EvalPair> pairs;
    for (int k = 0; k < 10; ++k) {
      const std::size_t len = 1 + rng() % 10;
      pairs.push_back({random_label(rng, len), random_label(rng, len), {}});
    }
    EXPECT_EQ(hierarchical_scores(pairs).hP, hierarchical_scores(pairs).hR);
  }
}

TEST(Hierarchical, AtLeastFlatWhenAllLabelsShareALength) {
  // Each exact match then adds the full length L to numerators over n * L.
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t len = 1 + rng() % 9;
    std::vector<EvalPair> pairs;
    for (int k = 0; k < 10; ++k) {
      const std::string a = random_label(rng, len);
      pairs.push_back({a, rng() % 3 == 0 ? a : random_label(rng, len), {}});
    }
    EXPECT_GE(hierarchical_scores(pairs).hF + 1e-12, flat_accuracy(pairs));
  }
}

TEST(Hierarchical, CanFallBelowFlatWithMixedLengths) {
  // Micro-averaging weights pairs by label length, so a short exact match
  // counts for less than long misses: flat 0.1, hF = 1/91.
  std::vector<EvalPair> pairs{{"3", "3", {}}};
  for (int k = 0; k < 9; ++k) pairs.push_back({"0000000000", "1000000000", {}});
  EXPECT_NEAR(flat_accuracy(pairs), 0.1, 1e-12);
  EXPECT_NEAR(hierarchical_scores(pairs).hF, 1.0 / 91.0, 1e-12);
}

TEST(Hierarchical, PerfectIffFlatPerfect) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<EvalPair> pairs;
    for (int k = 0; k < 5; ++k) {
      const std::string a = random_label(rng, 1 + rng() % 6);
      pairs.push_back({a, trial % 2 ? a : a.substr(0, 1 + rng() % a.size()), {}});
    }
    EXPECT_EQ(flat_accuracy(pairs) == 1.0, hierarchical_scores(pairs).hF == 1.0);
  }
}

TEST(Hierarchical, OrderInvariantAndBounded) {
  std::mt19937_64 rng(10);
  std::vector<EvalPair> pairs;
  for (int k = 0; k < 50; ++k) pairs.push_back({random_label(rng, 1 + rng() % 9), random_label(rng, 1 + rng() % 9), {}});
  const auto a = hierarchical_scores(pairs);
  std::shuffle(pairs.begin(), pairs.end(), rng);
  const auto b = hierarchical_scores(pairs);
  EXPECT_EQ(a.hP, b.hP);
  EXPECT_EQ(a.hR, b.hR);
  for (double v : {a.hP, a.hR, a.hF}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Hierarchical, DifferentFacesScoreZero) {
  const std::vector<EvalPair> pairs{{"0123", "5", {}}};
  const auto s = hierarchical_scores(pairs);
  EXPECT_EQ(s.hP, 0.0);
  EXPECT_EQ(s.hR, 0.0);
  EXPECT_EQ(s.hF, 0.0);
}

TEST(Metrics, Errors) {
  EXPECT_THROW(hierarchical_scores({}), ArgumentError);
  EXPECT_THROW(flat_accuracy({}), ArgumentError);
  const std::vector<EvalPair> bad{{"47", "4", {}}};
  EXPECT_THROW(hierarchical_scores(bad), ArgumentError);
  const std::vector<EvalPair> no_loc{{"4", "4", {}}};
  EXPECT_THROW(mean_distance_error(no_loc), ArgumentError);
}

TEST(Distance, QuarterCircleAndAntipode) {
  EXPECT_NEAR(great_circle_km({0, 0}, {0, 90}), 10007.543, 0.01);
  EXPECT_NEAR(great_circle_km({0, 0}, {90, 0}), 10007.543, 0.01);
  EXPECT_NEAR(great_circle_km({0, 0}, {0, 180}), 20015.087, 0.01);
  EXPECT_NEAR(great_circle_km({90, 0}, {-90, 0}), 20015.087, 0.01);
  EXPECT_NEAR(great_circle_km({53.96, -1.08}, {53.96, -1.08}), 0.0, 1e-9);
}

TEST(Distance, MeanErrorUsesPredictedCellCentre) {
  double lat = 0, lon = 0;
  oracle::center("431", lat, lon);
  const std::vector<EvalPair> pairs{{"431", "431", LatLon{lat, lon}}, {"431", "2", LatLon{90, 0}}};
  const double expected = (0.0 + oracle::haversine_km(lat, lon, 90, 0)) / 2;
  EXPECT_NEAR(mean_distance_error(pairs), expected, 1e-6);
  const auto report = evaluate(pairs);
  ASSERT_TRUE(report.mean_distance_km);
  EXPECT_NEAR(*report.mean_distance_km, expected, 1e-6);
  EXPECT_EQ(report.n, 2u);
}

TEST(Report, JsonAndTable) {
  const auto r = evaluate(kExamples);
  EXPECT_FALSE(r.mean_distance_km);
  const auto j = to_json(r);
  EXPECT_EQ(j["flat_accuracy"].get<double>(), 0.5);
  EXPECT_TRUE(j["mean_distance_km"].is_null());
  EXPECT_EQ(j["n"].get<int>(), 6);
  EXPECT_EQ(j.begin().key(), "flat_accuracy");
  const auto t = to_table(r);
  EXPECT_NE(t.find("flat accuracy                0.50000"), std::string::npos);
  EXPECT_NE(t.find("n/a"), std::string::npos);
}
