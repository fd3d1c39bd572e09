#pragma once

// Spherical-earth geodesy and the spatial lookups built on it: haversine
// distance, radius queries, point-in-polygon and nearest-segment search.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "streetrisk/error.hpp"

namespace streetrisk::geo {

inline constexpr double earth_radius_m = 6'371'000.0;

struct GeoPoint {
  double lat = 0.0;  // degrees, [-90, 90]
  double lon = 0.0;  // degrees, [-180, 180]

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline bool is_valid(const GeoPoint& p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
         p.lon >= -180.0 && p.lon <= 180.0;
}

inline GeoPoint make_point(double lat, double lon) {
  GeoPoint p{lat, lon};
  if (!is_valid(p)) {
    throw input_error("invalid coordinate (" + std::to_string(lat) + ", " + std::to_string(lon) +
                      ")");
  }
  return p;
}

inline double to_radians(double deg) { return deg * std::numbers::pi / 180.0; }
inline double to_degrees(double rad) { return rad * 180.0 / std::numbers::pi; }

// Longitude difference b - a wrapped into [-180, 180].
inline double lon_delta(double a, double b) {
  double d = b - a;
  if (d > 180.0) d -= 360.0;
  if (d < -180.0) d += 360.0;
  return d;
}

inline double haversine_distance(const GeoPoint& a, const GeoPoint& b) {
  if (!std::isfinite(a.lat) || !std::isfinite(a.lon) || !std::isfinite(b.lat) ||
      !std::isfinite(b.lon)) {
    throw input_error("haversine_distance: non-finite coordinate");
  }
  const double sin_dlat = std::sin(to_radians(b.lat - a.lat) / 2.0);
  const double sin_dlon = std::sin(to_radians(b.lon - a.lon) / 2.0);
  const double h = sin_dlat * sin_dlat +
                   std::cos(to_radians(a.lat)) * std::cos(to_radians(b.lat)) * sin_dlon * sin_dlon;
  return 2.0 * earth_radius_m * std::asin(std::min(1.0, std::sqrt(h)));
}

// Meters spanned by one degree of latitude.
inline double meters_per_degree() { return earth_radius_m * std::numbers::pi / 180.0; }

namespace detail {

struct CellKey {
  std::int64_t row;
  std::int64_t col;
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    return std::hash<std::int64_t>{}(k.row * 1'000'003 + k.col);
  }
};

}  // namespace detail

// Immutable lat/lon bucket grid over (id, point) entries. Candidate cells are
// chosen from a conservative spherical bounding box, and every candidate is
// filtered with haversine_distance, so results equal a linear scan.
template <typename Id>
class SpatialIndex {
 public:
  using Entry = std::pair<Id, GeoPoint>;

  explicit SpatialIndex(std::vector<Entry> entries, double cell_size_m = 100.0)
      : entries_(std::move(entries)) {
    if (!(cell_size_m > 0.0)) throw input_error("SpatialIndex: cell size must be positive");
    cell_deg_ = cell_size_m / meters_per_degree();
    lon_cells_ = static_cast<std::int64_t>(std::ceil(360.0 / cell_deg_));
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const GeoPoint& p = entries_[i].second;
      if (!is_valid(p)) throw input_error("SpatialIndex: invalid coordinate");
      cells_[{row_of(p.lat), col_of(p.lon)}].push_back(i);
    }
  }

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  // Entry indices within `radius_m` (inclusive), ascending.
  std::vector<std::size_t> radius_query_indices(const GeoPoint& center, double radius_m) const {
    if (!(radius_m > 0.0)) throw input_error("radius_query: radius must be positive");
    if (!is_valid(center)) throw input_error("radius_query: invalid center");
    std::vector<std::size_t> out;
    auto consider = [&](std::size_t i) {
      if (haversine_distance(center, entries_[i].second) <= radius_m) out.push_back(i);
    };

    const double theta = radius_m / earth_radius_m;
    const double dlat = to_degrees(theta) + 1e-9;
    bool full_ring = theta >= std::numbers::pi / 2.0 || center.lat + dlat >= 90.0 ||
                     center.lat - dlat <= -90.0;
    double dlon = 180.0;
    if (!full_ring) {
      const double ratio = std::sin(theta) / std::cos(to_radians(center.lat));
      if (ratio >= 1.0) {
        full_ring = true;
      } else {
        dlon = to_degrees(std::asin(ratio)) + 1e-9;
      }
    }
    const std::int64_t row_lo = row_of(std::max(-90.0, center.lat - dlat));
    const std::int64_t row_hi = row_of(std::min(90.0, center.lat + dlat));
    std::int64_t col_lo = 0;
    std::int64_t col_span = lon_cells_;
    if (!full_ring) {
      col_lo = static_cast<std::int64_t>(std::floor((center.lon - dlon + 180.0) / cell_deg_));
      const auto col_hi =
          static_cast<std::int64_t>(std::floor((center.lon + dlon + 180.0) / cell_deg_));
      col_span = std::min(lon_cells_, col_hi - col_lo + 1);
    }

    const auto visits = static_cast<double>(row_hi - row_lo + 1) * static_cast<double>(col_span);
    if (visits >= static_cast<double>(entries_.size())) {
      for (std::size_t i = 0; i < entries_.size(); ++i) consider(i);
      return out;
    }
    for (std::int64_t r = row_lo; r <= row_hi; ++r) {
      for (std::int64_t k = 0; k < col_span; ++k) {
        const std::int64_t c = ((col_lo + k) % lon_cells_ + lon_cells_) % lon_cells_;
        auto it = cells_.find({r, c});
        if (it == cells_.end()) continue;
        for (std::size_t i : it->second) consider(i);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  // Ids within `radius_m` (inclusive), in insertion order.
  std::vector<Id> radius_query(const GeoPoint& center, double radius_m) const {
    std::vector<Id> ids;
    for (std::size_t i : radius_query_indices(center, radius_m)) ids.push_back(entries_[i].first);
    return ids;
  }

 private:
  std::int64_t row_of(double lat) const {
    return static_cast<std::int64_t>(std::floor((lat + 90.0) / cell_deg_));
  }
  std::int64_t col_of(double lon) const {
    const auto c = static_cast<std::int64_t>(std::floor((lon + 180.0) / cell_deg_));
    return ((c % lon_cells_) + lon_cells_) % lon_cells_;
  }

  std::vector<Entry> entries_;
  double cell_deg_ = 0.0;
  std::int64_t lon_cells_ = 1;
  std::unordered_map<detail::CellKey, std::vector<std::size_t>, detail::CellKeyHash> cells_;
};

// Ring of vertices in lon/lat plane coordinates. A repeated closing vertex is
// dropped. Self-intersecting rings are accepted and resolved by the even-odd
// rule.
class Polygon {
 public:
  explicit Polygon(std::vector<GeoPoint> ring) : ring_(std::move(ring)) {
    if (ring_.size() > 1 && ring_.front() == ring_.back()) ring_.pop_back();
    std::vector<GeoPoint> distinct = ring_;
    std::sort(distinct.begin(), distinct.end(), [](const GeoPoint& a, const GeoPoint& b) {
      return std::pair(a.lat, a.lon) < std::pair(b.lat, b.lon);
    });
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 3) throw input_error("polygon needs at least 3 distinct vertices");
    for (const auto& p : ring_) {
      if (!is_valid(p)) throw input_error("polygon vertex has invalid coordinate");
    }
  }

  const std::vector<GeoPoint>& ring() const { return ring_; }

 private:
  std::vector<GeoPoint> ring_;
};

// Even-odd ray casting in the lon/lat plane. Points on an edge or vertex are
// inside.
inline bool point_in_polygon(const GeoPoint& p, const Polygon& poly) {
  const auto& ring = poly.ring();
  const std::size_t n = ring.size();
  constexpr double eps = 1e-12;
  for (std::size_t i = 0; i < n; ++i) {
    const GeoPoint& a = ring[i];
    const GeoPoint& b = ring[(i + 1) % n];
    const double cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
    const double len = std::hypot(b.lon - a.lon, b.lat - a.lat);
    if (std::abs(cross) <= eps * std::max(1.0, len) &&
        p.lon >= std::min(a.lon, b.lon) - eps && p.lon <= std::max(a.lon, b.lon) + eps &&
        p.lat >= std::min(a.lat, b.lat) - eps && p.lat <= std::max(a.lat, b.lat) + eps) {
      return true;
    }
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const GeoPoint& a = ring[i];
    const GeoPoint& b = ring[j];
    if ((a.lat > p.lat) != (b.lat > p.lat)) {
      const double x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
      if (p.lon < x) inside = !inside;
    }
  }
  return inside;
}

// Distance from p to segment ab. The closest point is located in a local
// tangent plane at p and its haversine distance to p is returned.
inline double point_segment_distance(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
  const double k = std::cos(to_radians(p.lat));
  const double ax = lon_delta(p.lon, a.lon) * k;
  const double ay = a.lat - p.lat;
  const double abx = lon_delta(a.lon, b.lon) * k;
  const double aby = b.lat - a.lat;
  const double len2 = abx * abx + aby * aby;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(-(ax * abx + ay * aby) / len2, 0.0, 1.0);
  GeoPoint q{a.lat + t * (b.lat - a.lat), a.lon + t * lon_delta(a.lon, b.lon)};
  if (q.lon > 180.0) q.lon -= 360.0;
  if (q.lon < -180.0) q.lon += 360.0;
  return haversine_distance(p, q);
}

inline double point_polyline_distance(const GeoPoint& p, std::span<const GeoPoint> line) {
  if (line.empty()) throw input_error("polyline has no vertices");
  if (line.size() == 1) return haversine_distance(p, line.front());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    best = std::min(best, point_segment_distance(p, line[i], line[i + 1]));
  }
  return best;
}

inline double polyline_length(std::span<const GeoPoint> line) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) total += haversine_distance(line[i], line[i + 1]);
  return total;
}

struct NearestLine {
  std::size_t index;
  double distance_m;
};

// Grid over polyline bounding boxes for nearest-line lookups within a fixed
// maximum radius. Distances closer than 1e-9 m are ties, broken toward the
// lower line index. Lines crossing the antimeridian are not supported.
class LineIndex {
 public:
  LineIndex(std::vector<std::vector<GeoPoint>> lines, double max_radius_m)
      : lines_(std::move(lines)), max_radius_m_(max_radius_m) {
    if (!(max_radius_m > 0.0)) throw input_error("LineIndex: radius must be positive");
    cell_deg_ = std::max(max_radius_m, 50.0) / meters_per_degree();
    const double pad_lat = max_radius_m / meters_per_degree() * 1.01 + 1e-9;
    for (std::size_t i = 0; i < lines_.size(); ++i) {
      const auto& line = lines_[i];
      if (line.empty()) throw input_error("LineIndex: empty line");
      double lat_lo = 90.0, lat_hi = -90.0, lon_lo = 180.0, lon_hi = -180.0;
      for (const auto& v : line) {
        lat_lo = std::min(lat_lo, v.lat);
        lat_hi = std::max(lat_hi, v.lat);
        lon_lo = std::min(lon_lo, v.lon);
        lon_hi = std::max(lon_hi, v.lon);
      }
      lat_lo -= pad_lat;
      lat_hi += pad_lat;
      const double widest = std::min(89.9, std::max(std::abs(lat_lo), std::abs(lat_hi)));
      const double pad_lon = pad_lat / std::cos(to_radians(widest));
      lon_lo -= pad_lon;
      lon_hi += pad_lon;
      for (auto r = cell(lat_lo); r <= cell(lat_hi); ++r) {
        for (auto c = cell(lon_lo); c <= cell(lon_hi); ++c) cells_[{r, c}].push_back(i);
      }
    }
  }

  const std::vector<std::vector<GeoPoint>>& lines() const { return lines_; }

  std::optional<NearestLine> nearest(const GeoPoint& p, double radius_m) const {
    if (!(radius_m > 0.0) || radius_m > max_radius_m_) {
      throw input_error("LineIndex: query radius outside (0, build radius]");
    }
    auto it = cells_.find({cell(p.lat), cell(p.lon)});
    if (it == cells_.end()) return std::nullopt;
    std::optional<NearestLine> best;
    for (std::size_t i : it->second) {
      const double d = point_polyline_distance(p, lines_[i]);
      if (d > radius_m) continue;
      if (!best || d < best->distance_m - 1e-9 ||
          (std::abs(d - best->distance_m) <= 1e-9 && i < best->index)) {
        best = NearestLine{i, d};
      }
    }
    return best;
  }

 private:
  std::int64_t cell(double deg) const {
    return static_cast<std::int64_t>(std::floor((deg + 180.0) / cell_deg_));
  }

  std::vector<std::vector<GeoPoint>> lines_;
  double max_radius_m_;
  double cell_deg_ = 0.0;
  std::unordered_map<detail::CellKey, std::vector<std::size_t>, detail::CellKeyHash> cells_;
};

}  // namespace streetrisk::geo
