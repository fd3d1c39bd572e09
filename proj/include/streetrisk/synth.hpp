#pragma once

// Seeded synthetic city: a street grid, scenes along every block in both
// periods, accidents drawn from a latent occupancy-driven risk, and four
// quadrant neighborhoods. Used for demos and end-to-end tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "streetrisk/config.hpp"
#include "streetrisk/csv.hpp"
#include "streetrisk/error.hpp"
#include "streetrisk/ingest.hpp"
#include "streetrisk/network.hpp"

namespace streetrisk::synth {

struct CityOptions {
  std::size_t grid = 12;  // nodes per side
  double spacing_m = 100.0;
  geo::GeoPoint origin{41.38, 2.17};
  std::size_t scenes_per_edge = 3;
  double accident_rate = 0.5;  // expected accidents per scene at maximal risk
};

inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names{"road", "sidewalk", "building", "vegetation", "car", "person"};
  return names;
}

struct City {
  std::vector<ingest::AccidentRecord> accidents;
  ingest::SceneTable scenes;
  std::vector<network::Node> nodes;
  std::vector<network::Edge> pedestrian_edges;
  std::vector<network::Edge> road_edges;
  std::vector<std::pair<std::string, std::vector<geo::GeoPoint>>> neighborhoods;
};

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Latent accident risk per kind; features follow feature_names().
inline double latent_risk(AccidentKind kind, const std::vector<double>& v) {
  double z = -2.0 + 12.0 * v[0] - 10.0 * v[3];
  z += kind == AccidentKind::pedestrian ? 10.0 * v[5] + 6.0 * v[1] - 3.0 : 12.0 * v[4] - 1.0;
  return sigmoid(z);
}

}  // namespace detail

inline City generate_city(std::uint64_t seed, const CityOptions& opt = {}) {
  if (opt.grid < 2 || !(opt.spacing_m > 0.0)) throw input_error("synth: grid needs at least 2 nodes per side");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  City city;
  const double m_per_deg = 6'371'000.0 * std::numbers::pi / 180.0;
  const double dlat = opt.spacing_m / m_per_deg;
  const double dlon = opt.spacing_m / (m_per_deg * std::cos(opt.origin.lat * std::numbers::pi / 180.0));
  const std::size_t k = opt.grid;

  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      network::Node n;
      n.id = "n" + std::to_string(i * k + j);
      n.location = {opt.origin.lat + dlat * static_cast<double>(i), opt.origin.lon + dlon * static_cast<double>(j)};
      n.population = std::floor(100.0 * unit(rng));
      n.poi_mass = unit(rng) < 0.3 ? 0.0 : std::floor(20.0 * unit(rng)) + 1.0;
      city.nodes.push_back(std::move(n));
    }
  }
  auto add_edge = [&](std::size_t a, std::size_t b, bool avenue) {
    const std::string id = "e" + std::to_string(city.pedestrian_edges.size());
    const double len = geo::haversine_distance(city.nodes[a].location, city.nodes[b].location);
    city.pedestrian_edges.push_back({id, a, b, len, std::nullopt, {}});
    city.road_edges.push_back({id, a, b, len, avenue ? 13.89 : 8.33, {}});
  };
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t a = i * k + j;
      if (j + 1 < k) add_edge(a, a + 1, i % 4 == 0);
      if (i + 1 < k) add_edge(a, a + k, j % 4 == 0);
    }
  }

  // Occupancy: 7 exponential shares normalized, the last being "other".
  auto occupancy = [&] {
    std::vector<double> raw(7);
    double sum = 0.0;
    for (double& x : raw) sum += (x = -std::log(1.0 - unit(rng)));
    std::vector<double> v(6);
    for (std::size_t c = 0; c < 6; ++c) v[c] = raw[c] / sum;
    return v;
  };
  // Moves share between road/car and sidewalk/vegetation, keeping the total.
  auto intervene = [](std::vector<double> v, double f, bool calmer) {
    if (calmer) {
      const double moved = f * (v[0] + v[4]);
      v[0] *= 1.0 - f;
      v[4] *= 1.0 - f;
      v[1] += moved / 2.0;
      v[3] += moved / 2.0;
    } else {
      const double moved = f * (v[1] + v[3]);
      v[1] *= 1.0 - f;
      v[3] *= 1.0 - f;
      v[0] += moved / 2.0;
      v[4] += moved / 2.0;
    }
    return v;
  };

  city.scenes.feature_names = feature_names();
  std::size_t accident_id = 0;
  for (std::size_t e = 0; e < city.pedestrian_edges.size(); ++e) {
    const auto& a = city.nodes[city.pedestrian_edges[e].u].location;
    const auto& b = city.nodes[city.pedestrian_edges[e].v].location;
    // Scenes on one block share most of their street layout, and an
    // intervention changes the whole block.
    const auto block = occupancy();
    const bool changed = unit(rng) < 0.35;
    const double f = 0.6 * unit(rng);
    const bool calmer = unit(rng) < 0.5;
    for (std::size_t s = 0; s < opt.scenes_per_edge; ++s) {
      const double t = (static_cast<double>(s) + 1.0) / (static_cast<double>(opt.scenes_per_edge) + 1.0);
      const geo::GeoPoint at{a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon)};
      const std::string id = "s" + std::to_string(e) + "_" + std::to_string(s);
      const auto own = occupancy();
      std::vector<double> v1(6);
      for (std::size_t c = 0; c < 6; ++c) v1[c] = 0.8 * block[c] + 0.2 * own[c];
      const std::vector<double> v2 = changed ? intervene(v1, f, calmer) : v1;
      for (auto [period, v] : {std::pair{Period::p1, &std::as_const(v1)}, std::pair{Period::p2, &v2}}) {
        city.scenes.scenes.push_back({id, at, period, *v});
        for (auto kind : all_kinds) {
          std::poisson_distribution<int> count(opt.accident_rate * detail::latent_risk(kind, *v));
          const int n = count(rng);
          for (int i = 0; i < n; ++i) {
            // Uniform in a 10 m disk around the scene.
            const double r = 10.0 * std::sqrt(unit(rng)), th = 2.0 * std::numbers::pi * unit(rng);
            const geo::GeoPoint p{at.lat + r * std::sin(th) / m_per_deg,
                                  at.lon + r * std::cos(th) / (m_per_deg * std::cos(at.lat * std::numbers::pi / 180.0))};
            const int first = period == Period::p1 ? 2010 : 2014;
            const int year = first + std::min(3, static_cast<int>(std::floor(4.0 * unit(rng))));
            city.accidents.push_back({"a" + std::to_string(accident_id++), p, kind, year});
          }
        }
      }
    }
  }

  // Quadrant neighborhoods with a margin around the grid.
  const double lat0 = opt.origin.lat - dlat / 2, lon0 = opt.origin.lon - dlon / 2;
  const double lat1 = opt.origin.lat + dlat * (static_cast<double>(k) - 0.5);
  const double lon1 = opt.origin.lon + dlon * (static_cast<double>(k) - 0.5);
  const double latm = (lat0 + lat1) / 2, lonm = (lon0 + lon1) / 2;
  auto box = [](double la0, double lo0, double la1, double lo1) {
    return std::vector<geo::GeoPoint>{{la0, lo0}, {la0, lo1}, {la1, lo1}, {la1, lo0}, {la0, lo0}};
  };
  city.neighborhoods = {{"South-West", box(lat0, lon0, latm, lonm)},
                        {"South-East", box(lat0, lonm, latm, lon1)},
                        {"North-West", box(latm, lon0, lat1, lonm)},
                        {"North-East", box(latm, lonm, lat1, lon1)}};
  return city;
}

// Writes the city as the CSV/GeoJSON inputs the CLI reads, plus city.conf
// pointing at them (paths relative to the config file).
inline void write_city(const City& city, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw input_error("cannot write " + (dir / name).string());
    return f;
  };
  auto num = [](double v) { return streetrisk::detail::format_double(v); };
  {
    auto f = open("accidents.csv");
    csv::write_row(f, {"id", "lat", "lon", "kind", "year"});
    for (const auto& a : city.accidents) {
      csv::write_row(f, {a.id, num(a.location.lat), num(a.location.lon), to_string(a.kind), std::to_string(a.year)});
    }
  }
  {
    auto f = open("scenes.csv");
    std::vector<std::string> header{"id", "lat", "lon", "period"};
    header.insert(header.end(), city.scenes.feature_names.begin(), city.scenes.feature_names.end());
    csv::write_row(f, header);
    for (const auto& s : city.scenes.scenes) {
      std::vector<std::string> row{s.id, num(s.location.lat), num(s.location.lon), to_string(s.period)};
      for (double x : s.features) row.push_back(num(x));
      csv::write_row(f, row);
    }
  }
  for (const auto* prefix : {"pedestrian", "road"}) {
    auto nf = open(std::string(prefix) + "_nodes.csv");
    csv::write_row(nf, {"node_id", "lat", "lon", "population", "poi_mass"});
    for (const auto& n : city.nodes) {
      csv::write_row(nf, {n.id, num(n.location.lat), num(n.location.lon), num(n.population), num(n.poi_mass)});
    }
    auto ef = open(std::string(prefix) + "_edges.csv");
    csv::write_row(ef, {"edge_id", "u", "v", "length_m", "speed_mps"});
    const auto& edges = std::string(prefix) == "road" ? city.road_edges : city.pedestrian_edges;
    for (const auto& e : edges) {
      csv::write_row(ef, {e.id, city.nodes[e.u].id, city.nodes[e.v].id, num(e.length_m),
                          e.speed_mps ? num(*e.speed_mps) : std::string()});
    }
  }
  {
    nlohmann::json fc{{"type", "FeatureCollection"}, {"features", nlohmann::json::array()}};
    for (const auto& [name, ring] : city.neighborhoods) {
      nlohmann::json coords = nlohmann::json::array();
      for (const auto& p : ring) coords.push_back({p.lon, p.lat});
      fc["features"].push_back({{"type", "Feature"},
                                {"properties", {{"name", name}}},
                                {"geometry", {{"type", "Polygon"}, {"coordinates", {coords}}}}});
    }
    open("neighborhoods.geojson") << fc.dump(1) << '\n';
  }
  RunConfig c;
  c.accidents = "accidents.csv";
  c.scenes = "scenes.csv";
  c.neighborhoods = "neighborhoods.geojson";
  c.pedestrian_nodes = "pedestrian_nodes.csv";
  c.pedestrian_edges = "pedestrian_edges.csv";
  c.road_nodes = "road_nodes.csv";
  c.road_edges = "road_edges.csv";
  c.learning_rate = 5.0;
  c.epochs = 3000;
  open("city.conf") << "# synthetic city; input paths are relative to this file\n" << serialize(c);
}

}  // namespace streetrisk::synth
