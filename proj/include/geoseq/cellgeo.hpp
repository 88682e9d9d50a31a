#pragma once

// Hierarchical cube-sphere cells.
//
// The sphere is covered by the six faces of an enclosing cube, numbered
// 0..5 = +x, +y, +z, -x, -y, -z. Each face is the root of a quad-tree; a cell
// at level L is a face plus L child digits. A child digit is
// 2 * (v-half) + (u-half), so digit 0 is the low-u/low-v quadrant.
//
// NOTE: this is a plain quadrant ordering, not Google S2's Hilbert-curve
// ordering. Cell ids here are not bit-compatible with S2 cell ids.
//
// Face coordinates (u, v) in [-1, 1] are mapped to tree coordinates (s, t) in
// [0, 1] with the quadratic area-equalizing transform. Cells are half-open
// intervals [lo, hi) in s and t, except that the upper edge of a face is closed.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string>
#include <utility>

#include "geoseq/error.hpp"

namespace geoseq {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr int kFaceCount = 6;
/// Deepest level a CellId can represent.
inline constexpr int kMaxSupportedLevel = 30;
/// Label-space depth used when nothing else is configured.
inline constexpr int kDefaultMaxLevel = 9;

class LatLon {
 public:
  LatLon(double lat_deg, double lon_deg) : lat_(lat_deg), lon_(lon_deg) {
    if (!(lat_ >= -90.0 && lat_ <= 90.0)) {
      throw ArgumentError("latitude out of range: " + std::to_string(lat_deg));
    }
    if (!(lon_ >= -180.0 && lon_ <= 180.0)) {
      throw ArgumentError("longitude out of range: " + std::to_string(lon_deg));
    }
  }

  double lat() const noexcept { return lat_; }
  double lon() const noexcept { return lon_; }

  friend bool operator==(const LatLon&, const LatLon&) = default;

 private:
  double lat_;
  double lon_;
};

struct UnitVec {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;

  static UnitVec normalized(double x, double y, double z) {
    const double n = std::sqrt(x * x + y * y + z * z);
    if (!(n > 0.0)) throw ArgumentError("cannot normalize a zero vector");
    return {x / n, y / n, z / n};
  }

  double dot(const UnitVec& o) const noexcept { return x * o.x + y * o.y + z * o.z; }
};

// Unnormalized cross product; callers only need its direction or sign tests.
inline UnitVec cross(const UnitVec& a, const UnitVec& b) noexcept {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline UnitVec to_unit(const LatLon& p) noexcept {
  const double lat = p.lat() * std::numbers::pi / 180.0;
  const double lon = p.lon() * std::numbers::pi / 180.0;
  return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

inline LatLon to_latlon(const UnitVec& v) {
  const double lat = std::atan2(v.z, std::sqrt(v.x * v.x + v.y * v.y)) * 180.0 / std::numbers::pi;
  const double lon = std::atan2(v.y, v.x) * 180.0 / std::numbers::pi;
  return {std::clamp(lat, -90.0, 90.0), std::clamp(lon, -180.0, 180.0)};
}

/// Face of the largest-magnitude coordinate; ties go to the lowest face index.
inline int face_of(const UnitVec& v) noexcept {
  const std::array<double, kFaceCount> along{v.x, v.y, v.z, -v.x, -v.y, -v.z};
  int best = 0;
  for (int f = 1; f < kFaceCount; ++f) {
    if (along[f] > along[best]) best = f;
  }
  return best;
}

struct FaceUV {
  int face;
  double u;
  double v;
};

inline FaceUV to_face_uv(const UnitVec& p) noexcept {
  const int face = face_of(p);
  switch (face) {
    case 0: return {0, p.y / p.x, p.z / p.x};
    case 1: return {1, -p.x / p.y, p.z / p.y};
    case 2: return {2, -p.x / p.z, -p.y / p.z};
    case 3: return {3, p.z / p.x, p.y / p.x};
    case 4: return {4, p.z / p.y, -p.x / p.y};
    default: return {5, -p.y / p.z, -p.x / p.z};
  }
}

inline UnitVec from_face_uv(int face, double u, double v) {
  switch (face) {
    case 0: return UnitVec::normalized(1, u, v);
    case 1: return UnitVec::normalized(-u, 1, v);
    case 2: return UnitVec::normalized(-u, -v, 1);
    case 3: return UnitVec::normalized(-1, -v, -u);
    case 4: return UnitVec::normalized(v, -1, -u);
    case 5: return UnitVec::normalized(v, u, -1);
    default: throw ArgumentError("face out of range: " + std::to_string(face));
  }
}

inline double st_to_uv(double s) noexcept {
  if (s >= 0.5) return (4.0 * s * s - 1.0) / 3.0;
  const double r = 1.0 - s;
  return (1.0 - 4.0 * r * r) / 3.0;
}

inline double uv_to_st(double u) noexcept {
  if (u >= 0.0) return 0.5 * std::sqrt(1.0 + 3.0 * u);
  return 1.0 - 0.5 * std::sqrt(1.0 - 3.0 * u);
}

/// A node of one of the six face quad-trees.
class CellId {
 public:
  CellId() = default;

  CellId(int face, std::initializer_list<int> path) : face_(check_face(face)) {
    for (int d : path) append(d);
  }

  static CellId from_face(int face) {
    CellId c;
    c.face_ = check_face(face);
    return c;
  }

  /// Build from leaf-level tree coordinates i, j in [0, 2^level).
  static CellId from_face_ij(int face, int level, std::uint64_t i, std::uint64_t j) {
    CellId c = from_face(face);
    check_level(level);
    for (int k = level - 1; k >= 0; --k) {
      c.append(static_cast<int>(2 * ((j >> k) & 1U) + ((i >> k) & 1U)));
    }
    return c;
  }

  int face() const noexcept { return face_; }
  int level() const noexcept { return level_; }
  /// Raw path digits, base 4, most significant digit first.
  std::uint64_t path_bits() const noexcept { return path_; }

  /// Digit at depth k (0-based, root to leaf).
  int digit(int k) const {
    if (k < 0 || k >= level_) throw ArgumentError("digit index out of range");
    return static_cast<int>((path_ >> (2 * (level_ - 1 - k))) & 3U);
  }

  CellId child(int d) const {
    CellId c = *this;
    c.append(d);
    return c;
  }

  std::pair<std::uint64_t, std::uint64_t> ij() const noexcept {
    std::uint64_t i = 0, j = 0;
    for (int k = 0; k < level_; ++k) {
      const auto d = (path_ >> (2 * (level_ - 1 - k))) & 3U;
      i = (i << 1) | (d & 1U);
      j = (j << 1) | (d >> 1);
    }
    return {i, j};
  }

  /// Ancestor at a shallower (or equal) level.
  CellId ancestor(int level) const {
    if (level < 0 || level > level_) throw ArgumentError("ancestor level out of range");
    CellId c = *this;
    c.path_ >>= 2 * (level_ - level);
    c.level_ = static_cast<std::uint8_t>(level);
    return c;
  }

  /// True when `other` equals this cell or lies inside it.
  bool contains(const CellId& other) const noexcept {
    return other.face_ == face_ && other.level_ >= level_ &&
           (other.path_ >> (2 * (other.level_ - level_))) == path_;
  }

  friend bool operator==(const CellId&, const CellId&) = default;

  /// Lexicographic order of the digit strings (face first, prefixes before extensions).
  friend std::strong_ordering operator<=>(const CellId& a, const CellId& b) noexcept {
    if (auto c = a.face_ <=> b.face_; c != 0) return c;
    const int common = std::min(a.level_, b.level_);
    const auto ap = a.path_ >> (2 * (a.level_ - common));
    const auto bp = b.path_ >> (2 * (b.level_ - common));
    if (auto c = ap <=> bp; c != 0) return c;
    return a.level_ <=> b.level_;
  }

 private:
  static std::uint8_t check_face(int face) {
    if (face < 0 || face >= kFaceCount) throw ArgumentError("face out of range: " + std::to_string(face));
    return static_cast<std::uint8_t>(face);
  }
  static void check_level(int level) {
    if (level < 0 || level > kMaxSupportedLevel) {
      throw ArgumentError("level out of range: " + std::to_string(level));
    }
  }
  void append(int d) {
    if (d < 0 || d > 3) throw ArgumentError("child digit out of range: " + std::to_string(d));
    if (level_ >= kMaxSupportedLevel) throw ArgumentError("cell is at the deepest supported level");
    path_ = (path_ << 2) | static_cast<std::uint64_t>(d);
    ++level_;
  }

  std::uint64_t path_ = 0;
  std::uint8_t face_ = 0;
  std::uint8_t level_ = 0;
};

struct CellIdHash {
  std::size_t operator()(const CellId& c) const noexcept {
    std::uint64_t h = c.path_bits() * 0x9E3779B97F4A7C15ULL;
    h ^= (static_cast<std::uint64_t>(c.face()) << 8 | static_cast<std::uint64_t>(c.level())) + 0x7F4A7C15ULL +
         (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

struct LevelStats {
  int level;
  double avg_area_km2;
  std::uint64_t cell_count;
};

inline double sphere_area_km2() noexcept { return 4.0 * std::numbers::pi * kEarthRadiusKm * kEarthRadiusKm; }

inline LevelStats level_stats(int level) {
  if (level < 0 || level > kMaxSupportedLevel) {
    throw ArgumentError("level out of range: " + std::to_string(level));
  }
  const std::uint64_t count = 6ULL << (2 * level);
  return {level, sphere_area_km2() / static_cast<double>(count), count};
}

namespace detail {

// Tree coordinate in [0, 1] to the leaf index at the deepest supported level.
inline std::uint64_t st_to_leaf_index(double s) noexcept {
  constexpr std::uint64_t n = 1ULL << kMaxSupportedLevel;
  const double scaled = std::floor(std::clamp(s, 0.0, 1.0) * static_cast<double>(n));
  return std::min(static_cast<std::uint64_t>(scaled), n - 1);
}

struct StRect {
  double s0, s1, t0, t1;
};

inline StRect st_rect(const CellId& c) noexcept {
  const auto [i, j] = c.ij();
  const double size = std::ldexp(1.0, -c.level());
  return {static_cast<double>(i) * size, static_cast<double>(i + 1) * size, static_cast<double>(j) * size,
          static_cast<double>(j + 1) * size};
}

// Solid angle of the gnomonic rectangle [0,u] x [0,v] on a face.
inline double corner_solid_angle(double u, double v) noexcept {
  return std::atan(u * v / std::sqrt(1.0 + u * u + v * v));
}

}  // namespace detail

/// Cell at `level` containing p.
inline CellId latlon_to_cell(const LatLon& p, int level) {
  if (level < 0 || level > kMaxSupportedLevel) {
    throw ArgumentError("level out of range: " + std::to_string(level));
  }
  const FaceUV fuv = to_face_uv(to_unit(p));
  const int shift = kMaxSupportedLevel - level;
  return CellId::from_face_ij(fuv.face, level, detail::st_to_leaf_index(uv_to_st(fuv.u)) >> shift,
                              detail::st_to_leaf_index(uv_to_st(fuv.v)) >> shift);
}

inline bool cell_contains(const CellId& c, const LatLon& p) { return c.contains(latlon_to_cell(p, c.level())); }

inline CellId cell_parent(const CellId& c) {
  if (c.level() == 0) throw ArgumentError("face cell " + std::to_string(c.face()) + " has no parent");
  return c.ancestor(c.level() - 1);
}

inline std::array<CellId, 4> cell_children(const CellId& c, int max_level = kDefaultMaxLevel) {
  if (c.level() >= max_level || c.level() >= kMaxSupportedLevel) {
    throw ArgumentError("cell at level " + std::to_string(c.level()) + " cannot be subdivided (max level " +
                        std::to_string(max_level) + ")");
  }
  return {c.child(0), c.child(1), c.child(2), c.child(3)};
}

/// Point at fractional position (a, b) in [0,1]^2 of the cell's (s, t) rectangle.
inline UnitVec cell_point(const CellId& c, double a, double b) {
  const auto r = detail::st_rect(c);
  return from_face_uv(c.face(), st_to_uv(r.s0 + a * (r.s1 - r.s0)), st_to_uv(r.t0 + b * (r.t1 - r.t0)));
}

/// Inverse projection of the midpoint of the cell's (u, v) rectangle.
inline LatLon cell_center(const CellId& c) {
  const auto r = detail::st_rect(c);
  const double u = 0.5 * (st_to_uv(r.s0) + st_to_uv(r.s1));
  const double v = 0.5 * (st_to_uv(r.t0) + st_to_uv(r.t1));
  return to_latlon(from_face_uv(c.face(), u, v));
}

/// Corners counter-clockwise as seen from outside the sphere.
inline std::array<UnitVec, 4> cell_vertex_vectors(const CellId& c) {
  return {cell_point(c, 0, 0), cell_point(c, 1, 0), cell_point(c, 1, 1), cell_point(c, 0, 1)};
}

inline std::array<LatLon, 4> cell_vertices(const CellId& c) {
  const auto v = cell_vertex_vectors(c);
  return {to_latlon(v[0]), to_latlon(v[1]), to_latlon(v[2]), to_latlon(v[3])};
}

/// Exact spherical area. Cell edges are great-circle arcs (constant u or v on a
/// face), so the area follows from the gnomonic rectangle solid angle.
inline double cell_area_km2(const CellId& c) {
  const auto r = detail::st_rect(c);
  const double u0 = st_to_uv(r.s0), u1 = st_to_uv(r.s1);
  const double v0 = st_to_uv(r.t0), v1 = st_to_uv(r.t1);
  using detail::corner_solid_angle;
  const double omega =
      corner_solid_angle(u1, v1) - corner_solid_angle(u0, v1) - corner_solid_angle(u1, v0) + corner_solid_angle(u0, v0);
  return omega * kEarthRadiusKm * kEarthRadiusKm;
}

/// Haversine distance on the R = 6371 km sphere (atan2 form, accurate up to
/// antipodal points).
inline double great_circle_km(const LatLon& a, const LatLon& b) noexcept {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b.lat() - a.lat()) * rad;
  const double dlon = (b.lon() - a.lon()) * rad;
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat() * rad) * std::cos(b.lat() * rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  const double hc = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::atan2(std::sqrt(hc), std::sqrt(1.0 - hc));
}

}  // namespace geoseq
