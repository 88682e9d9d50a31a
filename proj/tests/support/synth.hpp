#pragma once

// Deterministic synthetic data for tests. Uses only mt19937_64's raw output,
// which the standard pins down, so generated corpora are identical on every
// platform.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "geoseq/cellgeo.hpp"
#include "geoseq/dataset.hpp"

namespace synth {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  std::uint64_t below(std::uint64_t n) { return eng_() % n; }
  std::uint64_t raw() { return eng_(); }

  /// Uniform on the sphere.
  geoseq::LatLon sphere_point() {
    const double z = uniform(-1.0, 1.0);
    double lon = uniform(-180.0, 180.0);
    return {std::asin(z) * 180.0 / std::numbers::pi, lon};
  }

  /// Point within roughly `radius_deg` of a centre (clamped to valid ranges).
  geoseq::LatLon near(const geoseq::LatLon& c, double radius_deg) {
    double lat = c.lat() + uniform(-radius_deg, radius_deg);
    double lon = c.lon() + uniform(-radius_deg, radius_deg);
    lat = std::clamp(lat, -90.0, 90.0);
    if (lon > 180.0) lon -= 360.0;
    if (lon < -180.0) lon += 360.0;
    return {lat, lon};
  }

 private:
  std::mt19937_64 eng_;
};

/// Mixture of uniform background points and tight clusters.
inline std::vector<geoseq::LatLon> clustered_points(Rng& rng, std::size_t n, int clusters, double background_share) {
  std::vector<geoseq::LatLon> centres;
  for (int c = 0; c < clusters; ++c) centres.push_back(rng.sphere_point());
  std::vector<geoseq::LatLon> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (centres.empty() || rng.unit() < background_share) {
      out.push_back(rng.sphere_point());
    } else {
      const auto& c = centres[rng.below(centres.size())];
      out.push_back(rng.near(c, rng.unit() < 0.5 ? 0.5 : 3.0));
    }
  }
  return out;
}

/// Records whose text carries location-correlated tokens: a token unique to
/// the record's place, a token shared by its region and some filler.
inline std::vector<geoseq::dataset::RawRecord> place_corpus(std::uint64_t seed, std::size_t n, int regions) {
  Rng rng(seed);
  static const char* kFiller[] = {"town", "village", "river", "hill", "station", "school", "church", "park"};
  std::vector<geoseq::LatLon> centres;
  for (int r = 0; r < regions; ++r) centres.push_back(rng.sphere_point());
  std::vector<geoseq::dataset::RawRecord> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t region = rng.below(centres.size());
    const geoseq::LatLon p = rng.near(centres[region], 2.0);
    std::string text = "place" + std::to_string(k) + " near" + std::to_string(k) + " region" +
                       std::to_string(region) + " " + kFiller[rng.below(8)];
    out.push_back({"r" + std::to_string(k), p.lat(), p.lon(), std::move(text)});
  }
  return out;
}

}  // namespace synth
