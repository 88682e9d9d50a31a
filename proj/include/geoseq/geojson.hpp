#pragma once

// GeoJSON geometry for cells.
//
// Cell edges are great-circle arcs, so coarse cells are densified along their
// edges before being written as [lon, lat] rings. Rings are closed and
// counter-clockwise. A cell crossing the antimeridian becomes a MultiPolygon
// of two parts; a cell containing a pole is closed along the pole latitude.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "geoseq/cellgeo.hpp"
#include "geoseq/io.hpp"

namespace geoseq::geojson {

struct Options {
  /// Points per edge for densified cells.
  int densify_points = 8;
  /// Cells at this level or coarser are densified.
  int densify_max_level = 3;
};

struct Point {
  double lon;
  double lat;
};
using Ring = std::vector<Point>;

namespace detail {

inline constexpr double kPoleEps = 1e-12;

inline double wrap180(double d) {
  while (d > 180.0) d -= 360.0;
  while (d <= -180.0) d += 360.0;
  return d;
}

inline double signed_area(const Ring& ring) {
  double a = 0.0;
  for (std::size_t k = 0; k + 1 < ring.size(); ++k) a += ring[k].lon * ring[k + 1].lat - ring[k + 1].lon * ring[k].lat;
  return 0.5 * a;
}

// Boundary sample points, counter-clockwise, not closed.
inline std::vector<UnitVec> boundary(const CellId& c, int per_edge) {
  std::vector<UnitVec> out;
  out.reserve(static_cast<std::size_t>(4 * per_edge));
  const std::array<std::pair<double, double>, 5> corners{{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}}};
  for (int e = 0; e < 4; ++e) {
    const auto [a0, b0] = corners[static_cast<std::size_t>(e)];
    const auto [a1, b1] = corners[static_cast<std::size_t>(e + 1)];
    for (int k = 0; k < per_edge; ++k) {
      const double f = static_cast<double>(k) / per_edge;
      out.push_back(cell_point(c, a0 + f * (a1 - a0), b0 + f * (b1 - b0)));
    }
  }
  return out;
}

// Lon/lat sequence with pole vertices expanded to two points along the pole
// latitude and longitudes unwrapped to be continuous.
inline Ring unwrapped_ring(const std::vector<UnitVec>& pts) {
  std::vector<std::optional<Point>> raw;
  raw.reserve(pts.size());
  for (const auto& p : pts) {
    const double horiz = std::sqrt(p.x * p.x + p.y * p.y);
    if (horiz < kPoleEps) {
      raw.push_back(std::nullopt);
    } else {
      const LatLon ll = to_latlon(p);
      raw.push_back(Point{ll.lon(), ll.lat()});
    }
  }
  const std::size_t n = raw.size();
  Ring ring;
  for (std::size_t k = 0; k < n; ++k) {
    if (raw[k]) {
      ring.push_back(*raw[k]);
      continue;
    }
    const double pole_lat = pts[k].z > 0 ? 90.0 : -90.0;
    ring.push_back({raw[(k + n - 1) % n]->lon, pole_lat});
    ring.push_back({raw[(k + 1) % n]->lon, pole_lat});
  }
  for (std::size_t k = 1; k < ring.size(); ++k) ring[k].lon = ring[k - 1].lon + wrap180(ring[k].lon - ring[k - 1].lon);
  return ring;
}

// Sutherland-Hodgman clip of a closed ring against lon <= x (keep_low) or lon >= x.
inline Ring clip_lon(const Ring& ring, double x, bool keep_low) {
  auto inside = [&](const Point& p) { return keep_low ? p.lon <= x : p.lon >= x; };
  Ring out;
  for (std::size_t k = 0; k + 1 < ring.size(); ++k) {
    const Point& a = ring[k];
    const Point& b = ring[k + 1];
    const bool ia = inside(a), ib = inside(b);
    if (ia) out.push_back(a);
    if (ia != ib) {
      const double t = (x - a.lon) / (b.lon - a.lon);
      out.push_back({x, a.lat + t * (b.lat - a.lat)});
    }
  }
  if (!out.empty()) out.push_back(out.front());
  return out;
}

}  // namespace detail

/// Rings in [-180, 180] longitude: one, or two for antimeridian-crossing cells.
inline std::vector<Ring> cell_rings(const CellId& c, const Options& opt = {}) {
  const int per_edge = c.level() <= opt.densify_max_level ? std::max(1, opt.densify_points) : 1;
  Ring ring = detail::unwrapped_ring(detail::boundary(c, per_edge));
  const Point first = ring.front();
  const double winding = ring.back().lon - first.lon + detail::wrap180(first.lon - ring.back().lon);

  if (std::abs(winding) > 180.0) {
    // Contains a pole. Longitude is monotonic along the boundary, so it
    // crosses the antimeridian exactly once; start the ring there and close it
    // along the pole latitude.
    const bool north = winding > 0;
    const std::size_t n = ring.size();
    auto at = [&](std::size_t j) {
      Point p = ring[j % n];
      if (j >= n) p.lon += winding;
      return p;
    };
    for (std::size_t k = 0; k < n; ++k) {
      const Point a = at(k), b = at(k + 1);
      double x;
      if (north) {
        x = 180.0 + 360.0 * std::floor((b.lon - 180.0) / 360.0);
        if (!(a.lon < x && x <= b.lon)) continue;
      } else {
        x = 180.0 + 360.0 * std::ceil((b.lon - 180.0) / 360.0);
        if (!(b.lon <= x && x < a.lon)) continue;
      }
      const double lat_c = a.lat + (x - a.lon) / (b.lon - a.lon) * (b.lat - a.lat);
      const double shift = north ? -(x + 180.0) : 180.0 - x;
      const double start_lon = north ? -180.0 : 180.0;
      const double pole_lat = north ? 90.0 : -90.0;
      Ring out{{start_lon, lat_c}};
      for (std::size_t j = k + 1; j <= k + n; ++j) {
        Point p = at(j);
        p.lon = std::clamp(p.lon + shift, -180.0, 180.0);
        out.push_back(p);
      }
      out.push_back({-start_lon, lat_c});
      out.push_back({-start_lon, pole_lat});
      out.push_back({start_lon, pole_lat});
      out.push_back(out.front());
      return {out};
    }
    throw std::logic_error("pole cell boundary does not cross the antimeridian");
  }

  ring.push_back(ring.front());
  double lo = ring.front().lon, hi = lo;
  for (const auto& p : ring) {
    lo = std::min(lo, p.lon);
    hi = std::max(hi, p.lon);
  }
  const double shift = -360.0 * std::floor((lo + 180.0) / 360.0);
  for (auto& p : ring) p.lon += shift;
  hi += shift;
  if (hi <= 180.0) return {ring};
  Ring west = detail::clip_lon(ring, 180.0, true);
  Ring east = detail::clip_lon(ring, 180.0, false);
  for (auto& p : east) p.lon -= 360.0;
  // A cell with an edge on the antimeridian leaves a zero-width sliver on one side.
  std::vector<Ring> parts;
  for (auto* part : {&west, &east}) {
    if (part->size() >= 4 && detail::signed_area(*part) > 1e-12) parts.push_back(std::move(*part));
  }
  return parts;
}

inline nlohmann::ordered_json ring_json(const Ring& ring) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : ring) arr.push_back({p.lon, p.lat});
  return arr;
}

inline nlohmann::ordered_json cell_geometry(const CellId& c, const Options& opt = {}) {
  const auto rings = cell_rings(c, opt);
  nlohmann::ordered_json g;
  if (rings.size() == 1) {
    g["type"] = "Polygon";
    g["coordinates"] = nlohmann::ordered_json::array({ring_json(rings[0])});
  } else {
    g["type"] = "MultiPolygon";
    auto polys = nlohmann::ordered_json::array();
    for (const auto& r : rings) polys.push_back(nlohmann::ordered_json::array({ring_json(r)}));
    g["coordinates"] = std::move(polys);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Bounding boxes

struct BBox {
  double min_lon, min_lat, max_lon, max_lat;
};

/// "minLon,minLat,maxLon,maxLat"; minLon > maxLon means the box wraps the antimeridian.
inline BBox parse_bbox(std::string_view text) {
  std::array<double, 4> v{};
  std::size_t field = 0;
  while (true) {
    const auto comma = text.find(',');
    const auto part = text.substr(0, comma);
    if (field >= 4 || !io::parse_double(part, v[field])) throw ArgumentError("malformed bbox");
    ++field;
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (field != 4) throw ArgumentError("bbox needs four comma-separated numbers");
  const BBox b{v[0], v[1], v[2], v[3]};
  for (double lon : {b.min_lon, b.max_lon}) {
    if (!(lon >= -180.0 && lon <= 180.0)) throw ArgumentError("bbox longitude out of range");
  }
  for (double lat : {b.min_lat, b.max_lat}) {
    if (!(lat >= -90.0 && lat <= 90.0)) throw ArgumentError("bbox latitude out of range");
  }
  if (b.min_lat > b.max_lat) throw ArgumentError("bbox minLat exceeds maxLat");
  return b;
}

struct CellBounds {
  double lat_lo = 90.0;
  double lat_hi = -90.0;
  std::vector<std::pair<double, double>> lon_ranges;
};

/// Exact lat/lon bounds of a cell.
inline CellBounds cell_bounds(const CellId& c) {
  CellBounds b;
  for (const auto& ring : cell_rings(c, Options{1, -1})) {
    double lo = 180.0, hi = -180.0;
    for (const auto& p : ring) {
      lo = std::min(lo, p.lon);
      hi = std::max(hi, p.lon);
      b.lat_lo = std::min(b.lat_lo, p.lat);
      b.lat_hi = std::max(b.lat_hi, p.lat);
    }
    b.lon_ranges.emplace_back(lo, hi);
  }
  // Great-circle edges can bulge poleward between their end points.
  const auto v = cell_vertex_vectors(c);
  for (int e = 0; e < 4; ++e) {
    const UnitVec& a = v[static_cast<std::size_t>(e)];
    const UnitVec& bb = v[static_cast<std::size_t>((e + 1) % 4)];
    const UnitVec n = cross(a, bb);
    const double nn = std::sqrt(n.dot(n));
    if (nn < 1e-15) continue;
    const UnitVec nh{n.x / nn, n.y / nn, n.z / nn};
    // Highest point of the great circle: the z axis projected into its plane.
    UnitVec top{-nh.z * nh.x, -nh.z * nh.y, 1.0 - nh.z * nh.z};
    const double tn = std::sqrt(top.dot(top));
    if (tn < 1e-15) continue;
    top = {top.x / tn, top.y / tn, top.z / tn};
    for (const UnitVec& p : {top, UnitVec{-top.x, -top.y, -top.z}}) {
      if (cross(a, p).dot(n) > 0 && cross(p, bb).dot(n) > 0) {
        const double lat = std::asin(std::clamp(p.z, -1.0, 1.0)) * 180.0 / std::numbers::pi;
        b.lat_lo = std::min(b.lat_lo, lat);
        b.lat_hi = std::max(b.lat_hi, lat);
      }
    }
  }
  return b;
}

inline bool intersects(const CellBounds& c, const BBox& box) {
  if (c.lat_hi < box.min_lat || c.lat_lo > box.max_lat) return false;
  std::vector<std::pair<double, double>> box_lons;
  if (box.min_lon <= box.max_lon) {
    box_lons.emplace_back(box.min_lon, box.max_lon);
  } else {
    box_lons.emplace_back(box.min_lon, 180.0);
    box_lons.emplace_back(-180.0, box.max_lon);
  }
  for (const auto& [lo, hi] : c.lon_ranges) {
    for (const auto& [blo, bhi] : box_lons) {
      if (lo <= bhi && blo <= hi) return true;
    }
  }
  return false;
}

}  // namespace geoseq::geojson
