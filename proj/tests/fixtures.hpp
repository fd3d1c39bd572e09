#pragma once

// Deterministic synthetic inputs engineered to the real dataset totals.

#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "streetrisk/geo.hpp"
#include "streetrisk/ingest.hpp"

namespace fixtures {

using streetrisk::AccidentKind;
using streetrisk::Period;

// Accident totals per kind and period.
struct AccidentCounts {
  std::size_t p_p1 = 4478;
  std::size_t p_p2 = 4672;
  std::size_t v_p1 = 32031;
  std::size_t v_p2 = 35328;
};

// CSV with the requested totals, years cycling through each period.
inline std::string accident_csv(const AccidentCounts& c = {}) {
  std::ostringstream out;
  out << "id,lat,lon,kind,year\n";
  std::size_t id = 0;
  auto emit = [&](std::size_t n, const char* kind, int first_year) {
    for (std::size_t i = 0; i < n; ++i, ++id) {
      const double lat = 41.30 + static_cast<double>(id % 1000) * 1e-4;
      const double lon = 2.10 + static_cast<double>(id / 1000) * 1e-3;
      out << "a" << id << ',' << lat << ',' << lon << ',' << kind << ',' << first_year + static_cast<int>(i % 4)
          << '\n';
    }
  };
  emit(c.p_p1, "P", 2010);
  emit(c.p_p2, "P", 2014);
  emit(c.v_p1, "V", 2010);
  emit(c.v_p2, "V", 2014);
  return out.str();
}

// Scene/accident layout reproducing the dangerous/safe split of the image
// dataset: scenes sit on a 200 m lattice and each dangerous scene gets one
// accident 10 m north of it, far from every other scene.
struct LabelLayout {
  std::size_t scenes_p1 = 138684;
  std::size_t scenes_p2 = 177645;
  std::size_t p_dangerous_p1 = 50945;
  std::size_t p_dangerous_p2 = 62108;
  std::size_t v_dangerous_p1 = 101572;
  std::size_t v_dangerous_p2 = 134546;
};

inline streetrisk::geo::GeoPoint lattice_point(std::size_t i) {
  const double step = 200.0 / streetrisk::geo::meters_per_degree();
  return {41.0 + static_cast<double>(i / 400) * step, 2.0 + static_cast<double>(i % 400) * step * 1.4};
}

inline std::vector<streetrisk::ingest::SceneRecord> layout_scenes(const LabelLayout& l) {
  std::vector<streetrisk::ingest::SceneRecord> scenes;
  for (std::size_t i = 0; i < l.scenes_p1; ++i) {
    scenes.push_back({"s" + std::to_string(i), lattice_point(i), Period::p1, {0.1, 0.2}});
  }
  for (std::size_t i = 0; i < l.scenes_p2; ++i) {
    scenes.push_back({"s" + std::to_string(i), lattice_point(i), Period::p2, {0.1, 0.2}});
  }
  return scenes;
}

inline std::vector<streetrisk::ingest::AccidentRecord> layout_accidents(const LabelLayout& l) {
  std::vector<streetrisk::ingest::AccidentRecord> out;
  const double ten_m = 10.0 / streetrisk::geo::meters_per_degree();
  auto emit = [&](std::size_t n, AccidentKind kind, int year) {
    for (std::size_t i = 0; i < n; ++i) {
      auto p = lattice_point(i);
      p.lat += ten_m;
      out.push_back({"a" + std::to_string(out.size()), p, kind, year});
    }
  };
  emit(l.p_dangerous_p1, AccidentKind::pedestrian, 2012);
  emit(l.p_dangerous_p2, AccidentKind::pedestrian, 2016);
  emit(l.v_dangerous_p1, AccidentKind::vehicle, 2011);
  emit(l.v_dangerous_p2, AccidentKind::vehicle, 2015);
  return out;
}

inline std::string scenes_csv(const std::vector<streetrisk::ingest::SceneRecord>& scenes) {
  std::ostringstream out;
  out.precision(12);
  out << "id,lat,lon,period,road,building\n";
  for (const auto& s : scenes) {
    out << s.id << ',' << s.location.lat << ',' << s.location.lon << ',' << streetrisk::to_string(s.period)
        << ',' << s.features[0] << ',' << s.features[1] << '\n';
  }
  return out.str();
}

inline std::string accidents_csv(const std::vector<streetrisk::ingest::AccidentRecord>& acc) {
  std::ostringstream out;
  out.precision(12);
  out << "id,lat,lon,kind,year\n";
  for (const auto& a : acc) {
    out << a.id << ',' << a.location.lat << ',' << a.location.lon << ',' << streetrisk::to_string(a.kind)
        << ',' << a.year << '\n';
  }
  return out.str();
}

}  // namespace fixtures
