#pragma once

// Accident, scene and neighborhood loading, and the 50 m accident-labeling
// rule that turns scenes into dangerous/safe samples.

#include <algorithm>
#include <array>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "streetrisk/csv.hpp"
#include "streetrisk/error.hpp"
#include "streetrisk/geo.hpp"
#include "streetrisk/hazard.hpp"
#include "streetrisk/parallel.hpp"
#include "streetrisk/types.hpp"

namespace streetrisk::ingest {

inline constexpr double default_label_radius_m = 50.0;

struct AccidentRecord {
  std::string id;
  geo::GeoPoint location;
  AccidentKind kind = AccidentKind::pedestrian;
  int year = first_study_year;

  Period period() const { return assign_period(year); }
};

struct SceneRecord {
  std::string id;
  geo::GeoPoint location;
  Period period = Period::p1;
  std::vector<double> features;
};

struct RowError {
  std::size_t line = 0;
  std::string message;
};

struct AccidentTable {
  std::vector<AccidentRecord> records;
  std::vector<RowError> errors;
};

struct SceneTable {
  std::vector<std::string> feature_names;
  std::vector<SceneRecord> scenes;
  std::vector<RowError> errors;
};

namespace detail {

inline geo::GeoPoint parse_location(const std::vector<std::string>& f, std::size_t lat_col,
                                    std::size_t lon_col) {
  auto lat = csv::parse_double(f[lat_col]);
  auto lon = csv::parse_double(f[lon_col]);
  if (!lat || !lon) throw input_error("unparseable coordinate");
  return geo::make_point(*lat, *lon);
}

inline int parse_year(const std::string& s) {
  auto y = csv::parse_int(s);
  if (!y) throw input_error("unparseable year '" + s + "'");
  if (*y < first_study_year || *y > last_study_year) {
    throw input_error("year " + s + " out of range 2010-2017");
  }
  return static_cast<int>(*y);
}

}  // namespace detail

// Required header columns: id, lat, lon, kind, year (any order, extra columns
// ignored). A missing header column is fatal; bad rows are skipped and
// reported in `errors`.
inline AccidentTable load_accidents(std::istream& in, const std::string& source = "accidents") {
  const auto table = csv::read(in, source);
  const auto c_id = table.require_column("id", source);
  const auto c_lat = table.require_column("lat", source);
  const auto c_lon = table.require_column("lon", source);
  const auto c_kind = table.require_column("kind", source);
  const auto c_year = table.require_column("year", source);

  AccidentTable out;
  for (const auto& row : table.rows) {
    try {
      if (row.fields.size() != table.header.size()) {
        throw input_error("expected " + std::to_string(table.header.size()) + " fields, got " +
                          std::to_string(row.fields.size()));
      }
      AccidentRecord r;
      r.id = row.fields[c_id];
      r.location = detail::parse_location(row.fields, c_lat, c_lon);
      r.kind = parse_kind(row.fields[c_kind]);
      r.year = detail::parse_year(row.fields[c_year]);
      out.records.push_back(std::move(r));
    } catch (const input_error& e) {
      out.errors.push_back({row.line, e.what()});
    }
  }
  return out;
}

inline AccidentTable load_accidents(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open " + path);
  return load_accidents(in, path);
}

// Header: id, lat, lon, one of period/year, then feature columns. Every other
// column is a feature, in header order. A `period` value may be P1/P2 or a
// year. (id, period) must be unique.
inline SceneTable load_scenes(std::istream& in, const std::string& source = "scenes") {
  const auto table = csv::read(in, source);
  const auto c_id = table.require_column("id", source);
  const auto c_lat = table.require_column("lat", source);
  const auto c_lon = table.require_column("lon", source);
  auto c_period = table.column("period");
  if (!c_period) c_period = table.column("year");
  if (!c_period) throw input_error(source + ": missing required column 'period' or 'year'");

  SceneTable out;
  std::vector<std::size_t> feature_cols;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i == c_id || i == c_lat || i == c_lon || i == *c_period) continue;
    feature_cols.push_back(i);
    out.feature_names.push_back(table.header[i]);
  }
  if (feature_cols.empty()) throw input_error(source + ": no feature columns");

  std::unordered_set<std::string> seen;
  for (const auto& row : table.rows) {
    try {
      if (row.fields.size() != table.header.size()) {
        throw input_error("expected " + std::to_string(table.header.size()) + " fields, got " +
                          std::to_string(row.fields.size()));
      }
      SceneRecord s;
      s.id = row.fields[c_id];
      s.location = detail::parse_location(row.fields, c_lat, c_lon);
      const auto& pv = row.fields[*c_period];
      s.period = (pv.size() == 2 && (pv[0] == 'P' || pv[0] == 'p'))
                     ? parse_period(pv)
                     : assign_period(detail::parse_year(pv));
      for (std::size_t c : feature_cols) {
        auto v = csv::parse_double(row.fields[c]);
        if (!v) throw input_error("unparseable feature '" + table.header[c] + "'");
        s.features.push_back(*v);
      }
      hazard::validate_occupancy(s.features);
      if (!seen.insert(s.id + '\x1f' + to_string(s.period)).second) {
        throw input_error("duplicate scene id '" + s.id + "' in period " + to_string(s.period));
      }
      out.scenes.push_back(std::move(s));
    } catch (const input_error& e) {
      out.errors.push_back({row.line, e.what()});
    }
  }
  return out;
}

inline SceneTable load_scenes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open " + path);
  return load_scenes(in, path);
}

struct Neighborhood {
  std::string name;
  std::vector<geo::Polygon> parts;  // outer rings; holes are ignored

  bool contains(const geo::GeoPoint& p) const {
    return std::any_of(parts.begin(), parts.end(),
                       [&](const geo::Polygon& poly) { return geo::point_in_polygon(p, poly); });
  }
};

namespace detail {

inline geo::Polygon ring_from_json(const nlohmann::json& ring) {
  std::vector<geo::GeoPoint> pts;
  for (const auto& c : ring) pts.push_back(geo::make_point(c.at(1).get<double>(), c.at(0).get<double>()));
  return geo::Polygon(std::move(pts));
}

}  // namespace detail

// GeoJSON FeatureCollection of Polygon/MultiPolygon features carrying a
// `name` property. Order is preserved.
inline std::vector<Neighborhood> load_neighborhoods(std::istream& in,
                                                    const std::string& source = "neighborhoods") {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw input_error(source + ": " + e.what());
  }
  std::vector<Neighborhood> out;
  try {
    for (const auto& feature : doc.at("features")) {
      Neighborhood n;
      n.name = feature.at("properties").at("name").get<std::string>();
      const auto& g = feature.at("geometry");
      const auto type = g.at("type").get<std::string>();
      if (type == "Polygon") {
        n.parts.push_back(detail::ring_from_json(g.at("coordinates").at(0)));
      } else if (type == "MultiPolygon") {
        for (const auto& poly : g.at("coordinates")) {
          n.parts.push_back(detail::ring_from_json(poly.at(0)));
        }
      } else {
        throw input_error(source + ": unsupported geometry type " + type);
      }
      out.push_back(std::move(n));
    }
  } catch (const nlohmann::json::exception& e) {
    throw input_error(source + ": " + e.what());
  }
  return out;
}

inline std::vector<Neighborhood> load_neighborhoods(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open " + path);
  return load_neighborhoods(in, path);
}

enum class Label { safe, dangerous };

inline Label label(std::size_t count) { return count >= 1 ? Label::dangerous : Label::safe; }

inline std::string to_string(Label l) { return l == Label::dangerous ? "dangerous" : "safe"; }

struct LabeledSample {
  std::string scene_id;
  Period period = Period::p1;
  AccidentKind kind = AccidentKind::pedestrian;
  std::size_t count = 0;
  Label label = Label::safe;
};

// Counts accidents of `kind` within `radius_m` (inclusive) of each scene. With
// a period, only scenes and accidents of that period take part; without one,
// every scene is counted against accidents from the whole 2010-2017 window.
// An accident may count toward several scenes. Output is sorted by
// (scene_id, period).
inline std::vector<LabeledSample> count_accidents(std::span<const SceneRecord> scenes,
                                                  std::span<const AccidentRecord> accidents,
                                                  double radius_m, AccidentKind kind,
                                                  std::optional<Period> period,
                                                  unsigned threads = 1) {
  if (!(radius_m > 0.0)) throw input_error("count_accidents: radius must be positive");
  std::vector<std::pair<std::size_t, geo::GeoPoint>> entries;
  for (std::size_t i = 0; i < accidents.size(); ++i) {
    const auto& a = accidents[i];
    if (a.kind != kind) continue;
    if (period && a.period() != *period) continue;
    entries.emplace_back(i, a.location);
  }
  const geo::SpatialIndex<std::size_t> index(std::move(entries), std::max(radius_m, 25.0));

  std::vector<const SceneRecord*> selected;
  for (const auto& s : scenes) {
    if (!period || s.period == *period) selected.push_back(&s);
  }
  std::vector<LabeledSample> out(selected.size());
  parallel_for(selected.size(), threads, [&](std::size_t i) {
    const auto& s = *selected[i];
    const std::size_t n = index.radius_query_indices(s.location, radius_m).size();
    out[i] = LabeledSample{s.id, s.period, kind, n, label(n)};
  });
  std::sort(out.begin(), out.end(), [](const LabeledSample& a, const LabeledSample& b) {
    return std::tie(a.scene_id, a.period) < std::tie(b.scene_id, b.period);
  });
  return out;
}

struct LabelCounts {
  std::size_t dangerous = 0;
  std::size_t safe = 0;
  std::size_t total() const { return dangerous + safe; }
};

// Dangerous/safe tallies indexed by [kind][period].
struct LabelSummary {
  std::array<std::array<LabelCounts, 2>, 2> counts{};

  const LabelCounts& at(AccidentKind k, Period p) const { return counts[index_of(k)][index_of(p)]; }
};

inline LabelSummary summarize_labels(std::span<const LabeledSample> samples) {
  LabelSummary s;
  for (const auto& x : samples) {
    auto& c = s.counts[index_of(x.kind)][index_of(x.period)];
    (x.label == Label::dangerous ? c.dangerous : c.safe) += 1;
  }
  return s;
}

// Accident totals by kind and period.
struct AccidentSummary {
  std::array<std::array<std::size_t, 2>, 2> counts{};

  std::size_t at(AccidentKind k, Period p) const { return counts[index_of(k)][index_of(p)]; }
  std::size_t kind_total(AccidentKind k) const { return at(k, Period::p1) + at(k, Period::p2); }
  std::size_t period_total(Period p) const {
    return at(AccidentKind::pedestrian, p) + at(AccidentKind::vehicle, p);
  }
  std::size_t grand_total() const { return period_total(Period::p1) + period_total(Period::p2); }

  // Percent change from P1 to P2; nullopt when P1 is empty.
  std::optional<double> percent_change(AccidentKind k) const {
    if (at(k, Period::p1) == 0) return std::nullopt;
    return 100.0 * (static_cast<double>(at(k, Period::p2)) - static_cast<double>(at(k, Period::p1))) /
           static_cast<double>(at(k, Period::p1));
  }
  std::optional<double> total_percent_change() const {
    if (period_total(Period::p1) == 0) return std::nullopt;
    return 100.0 *
           (static_cast<double>(period_total(Period::p2)) -
            static_cast<double>(period_total(Period::p1))) /
           static_cast<double>(period_total(Period::p1));
  }
};

inline AccidentSummary summarize_accidents(std::span<const AccidentRecord> accidents) {
  AccidentSummary s;
  for (const auto& a : accidents) s.counts[index_of(a.kind)][index_of(a.period())] += 1;
  return s;
}

}  // namespace streetrisk::ingest
