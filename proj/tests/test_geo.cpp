#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "oracles.hpp"
#include "streetrisk/geo.hpp"

using namespace streetrisk;
using geo::GeoPoint;

namespace {

// Point at `meters` due north of p.
GeoPoint north_of(GeoPoint p, double meters) {
  return {p.lat + meters / geo::meters_per_degree(), p.lon};
}

}  // namespace

TEST(haversine, identical_points_are_zero) {
  EXPECT_EQ(geo::haversine_distance({41.0, 2.0}, {41.0, 2.0}), 0.0);
}

TEST(haversine, one_degree_on_equator) {
  const double expected = 6'371'000.0 * std::numbers::pi / 180.0;  // 111194.93 m
  EXPECT_NEAR(geo::haversine_distance({0.0, 0.0}, {0.0, 1.0}), expected, 1e-6);
  EXPECT_NEAR(expected, 111194.9, 0.05);
}

TEST(haversine, matches_independent_formula) {
  const double d = geo::haversine_distance({41.38, 2.17}, {41.39, 2.17});
  const double ref = oracle::sphere_distance(41.38, 2.17, 41.39, 2.17);
  EXPECT_NEAR(d / ref, 1.0, 1e-6);
}

TEST(haversine, rejects_non_finite) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(geo::haversine_distance({nan, 0.0}, {0.0, 0.0}), input_error);
  EXPECT_THROW(geo::haversine_distance({0.0, 0.0}, {0.0, INFINITY}), input_error);
}

TEST(haversine, symmetric_and_triangle_inequality) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> lat(-80, 80), lon(-180, 180);
  for (int i = 0; i < 2000; ++i) {
    GeoPoint a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)}, c{lat(rng), lon(rng)};
    const double ab = geo::haversine_distance(a, b);
    EXPECT_EQ(ab, geo::haversine_distance(b, a));
    EXPECT_GE(ab, 0.0);
    const double ac = geo::haversine_distance(a, c), cb = geo::haversine_distance(c, b);
    EXPECT_LE(ab, (ac + cb) * (1.0 + 1e-9));
    EXPECT_NEAR(ab, oracle::sphere_distance(a.lat, a.lon, b.lat, b.lon), 1e-6 * ab + 1e-6);
  }
}

TEST(make_point, validates_bounds) {
  EXPECT_NO_THROW(geo::make_point(90.0, -180.0));
  EXPECT_THROW(geo::make_point(90.5, 0.0), input_error);
  EXPECT_THROW(geo::make_point(0.0, 181.0), input_error);
}

TEST(radius_query, empty_when_nothing_near) {
  geo::SpatialIndex<int> idx({{1, {41.40, 2.17}}});
  EXPECT_TRUE(idx.radius_query({41.38, 2.17}, 50.0).empty());
}

TEST(radius_query, finds_entry_at_49m) {
  const GeoPoint c{41.38, 2.17};
  const GeoPoint p = north_of(c, 49.0);
  ASSERT_LE(geo::haversine_distance(c, p), 50.0);
  geo::SpatialIndex<int> idx({{7, p}});
  EXPECT_EQ(idx.radius_query(c, 50.0), std::vector<int>{7});
}

TEST(radius_query, boundary_is_inclusive) {
  const GeoPoint c{41.38, 2.17};
  const GeoPoint p = north_of(c, 50.0);
  const double d = geo::haversine_distance(c, p);
  geo::SpatialIndex<int> idx({{3, p}});
  EXPECT_EQ(idx.radius_query(c, d), std::vector<int>{3});
}

TEST(radius_query, rejects_nonpositive_radius) {
  geo::SpatialIndex<int> idx({{1, {0.0, 0.0}}});
  EXPECT_THROW(idx.radius_query({0.0, 0.0}, 0.0), input_error);
  EXPECT_THROW(idx.radius_query({0.0, 0.0}, -1.0), input_error);
}

TEST(radius_query, equals_linear_scan_city_scale) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> lat(41.35, 41.45), lon(2.10, 2.23);
  std::vector<std::pair<int, GeoPoint>> entries;
  for (int i = 0; i < 1000; ++i) entries.push_back({i, {lat(rng), lon(rng)}});
  const geo::SpatialIndex<int> idx(entries, 60.0);
  std::uniform_real_distribution<double> radius(1.0, 2500.0);
  for (int q = 0; q < 300; ++q) {
    const GeoPoint c{lat(rng), lon(rng)};
    const double r = radius(rng);
    std::vector<int> expected;
    for (const auto& [id, p] : entries) {
      if (geo::haversine_distance(c, p) <= r) expected.push_back(id);
    }
    EXPECT_EQ(idx.radius_query(c, r), expected);
  }
}

TEST(radius_query, equals_linear_scan_global_including_poles_and_antimeridian) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> lat(-90, 90), lon(-180, 180), unit(0, 1);
  std::vector<std::pair<int, GeoPoint>> entries;
  for (int i = 0; i < 1000; ++i) entries.push_back({i, {lat(rng), lon(rng)}});
  entries.push_back({1000, {0.0, 179.9999}});
  entries.push_back({1001, {0.0, -179.9999}});
  entries.push_back({1002, {89.9999, 10.0}});
  const geo::SpatialIndex<int> idx(entries, 50'000.0);
  std::vector<GeoPoint> centers{{0.0, 180.0}, {0.0, -180.0}, {90.0, 0.0}, {-89.99, 45.0}};
  for (int q = 0; q < 200; ++q) centers.push_back({lat(rng), lon(rng)});
  for (const auto& c : centers) {
    const double r = 1000.0 + unit(rng) * 2'000'000.0;
    std::vector<int> expected;
    for (const auto& [id, p] : entries) {
      if (geo::haversine_distance(c, p) <= r) expected.push_back(id);
    }
    EXPECT_EQ(idx.radius_query(c, r), expected);
  }
}

TEST(polygon, rejects_degenerate) {
  EXPECT_THROW(geo::Polygon({{0, 0}, {1, 1}}), input_error);
  EXPECT_THROW(geo::Polygon({{0, 0}, {1, 1}, {0, 0}}), input_error);
  EXPECT_THROW(geo::Polygon({{0, 0}, {1, 1}, {1, 1}, {0, 0}}), input_error);
}

TEST(point_in_polygon, convex_square) {
  geo::Polygon sq({{0, 0}, {0, 1}, {1, 1}, {1, 0}, {0, 0}});
  EXPECT_TRUE(geo::point_in_polygon({0.5, 0.5}, sq));
  EXPECT_FALSE(geo::point_in_polygon({30.0, 40.0}, sq));
}

TEST(point_in_polygon, boundary_counts_as_inside) {
  geo::Polygon sq({{0, 0}, {0, 1}, {1, 1}, {1, 0}});
  EXPECT_TRUE(geo::point_in_polygon({0.0, 0.5}, sq));   // edge
  EXPECT_TRUE(geo::point_in_polygon({1.0, 1.0}, sq));   // vertex
  EXPECT_TRUE(geo::point_in_polygon({0.5, 1.0}, sq));
  EXPECT_FALSE(geo::point_in_polygon({0.5, 1.0 + 1e-6}, sq));
}

TEST(point_in_polygon, self_intersecting_uses_even_odd) {
  // Bow tie: both lobes are inside, the crossing region is on the boundary.
  geo::Polygon bow({{0, 0}, {1, 1}, {1, 0}, {0, 1}});
  EXPECT_TRUE(geo::point_in_polygon({0.1, 0.5}, bow));
  EXPECT_TRUE(geo::point_in_polygon({0.9, 0.5}, bow));
  EXPECT_FALSE(geo::point_in_polygon({0.5, 0.1}, bow));
}

TEST(point_in_polygon, matches_winding_number_on_random_star_polygons) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> radius(0.3, 1.0), unit(0.0, 1.0), coord(-1.2, 1.2);
  for (int poly = 0; poly < 20; ++poly) {
    const int n = 3 + poly;
    std::vector<double> angles;
    for (int i = 0; i < n; ++i) angles.push_back(unit(rng) * 2.0 * std::numbers::pi);
    std::sort(angles.begin(), angles.end());
    std::vector<GeoPoint> ring;
    std::vector<std::pair<double, double>> xy;
    for (double a : angles) {
      const double r = radius(rng);
      const GeoPoint p{41.0 + r * std::sin(a) * 0.01, 2.0 + r * std::cos(a) * 0.01};
      ring.push_back(p);
      xy.emplace_back(p.lon, p.lat);
    }
    const geo::Polygon polygon(ring);
    for (int k = 0; k < 50; ++k) {
      const GeoPoint p{41.0 + coord(rng) * 0.01, 2.0 + coord(rng) * 0.01};
      EXPECT_EQ(geo::point_in_polygon(p, polygon), oracle::winding_number(p.lon, p.lat, xy) != 0);
    }
  }
}

TEST(point_segment_distance, perpendicular_foot_and_endpoints) {
  const GeoPoint a{41.38, 2.17}, b{41.38, 2.18};
  const GeoPoint p = north_of({41.38, 2.175}, 5.0);
  EXPECT_NEAR(geo::point_segment_distance(p, a, b), 5.0, 1e-3);
  const GeoPoint beyond{41.38, 2.19};
  EXPECT_NEAR(geo::point_segment_distance(beyond, a, b), geo::haversine_distance(beyond, b), 1e-9);
  EXPECT_DOUBLE_EQ(geo::point_segment_distance(p, a, a), geo::haversine_distance(p, a));
}

TEST(line_index, nearest_matches_exhaustive_search) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> lat(41.38, 41.39), lon(2.17, 2.18), step(-0.001, 0.001);
  std::vector<std::vector<GeoPoint>> lines;
  for (int i = 0; i < 150; ++i) {
    GeoPoint a{lat(rng), lon(rng)};
    lines.push_back({a, {a.lat + step(rng), a.lon + step(rng)}});
  }
  const geo::LineIndex idx(lines, 40.0);
  for (int q = 0; q < 2000; ++q) {
    const GeoPoint p{lat(rng), lon(rng)};
    std::optional<std::size_t> expected;
    double best = 0.0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const double d = geo::point_polyline_distance(p, lines[i]);
      if (d <= 40.0 && (!expected || d < best - 1e-9)) {
        expected = i;
        best = d;
      }
    }
    const auto got = idx.nearest(p, 40.0);
    ASSERT_EQ(got.has_value(), expected.has_value());
    if (got) {
      EXPECT_EQ(got->index, *expected);
    }
  }
}
