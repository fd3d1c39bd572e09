#pragma once

#include <array>
#include <string>
#include <string_view>

#include "streetrisk/error.hpp"

namespace streetrisk {

// Pedestrian (vehicle-pedestrian) or vehicle (vehicle-vehicle) accidents.
enum class AccidentKind { pedestrian, vehicle };

// P1 covers 2010-2013, P2 covers 2014-2017, both inclusive.
enum class Period { p1, p2 };

inline constexpr std::array<AccidentKind, 2> all_kinds{AccidentKind::pedestrian,
                                                       AccidentKind::vehicle};
inline constexpr std::array<Period, 2> all_periods{Period::p1, Period::p2};

inline constexpr int first_study_year = 2010;
inline constexpr int last_study_year = 2017;

inline std::string to_string(AccidentKind k) { return k == AccidentKind::pedestrian ? "P" : "V"; }
inline std::string to_string(Period p) { return p == Period::p1 ? "P1" : "P2"; }

inline std::size_t index_of(AccidentKind k) { return k == AccidentKind::pedestrian ? 0 : 1; }
inline std::size_t index_of(Period p) { return p == Period::p1 ? 0 : 1; }

inline AccidentKind parse_kind(std::string_view s) {
  if (s == "P" || s == "p" || s == "pedestrian") return AccidentKind::pedestrian;
  if (s == "V" || s == "v" || s == "vehicle") return AccidentKind::vehicle;
  throw input_error("unknown accident kind '" + std::string(s) + "' (expected P or V)");
}

inline Period parse_period(std::string_view s) {
  if (s == "P1" || s == "p1") return Period::p1;
  if (s == "P2" || s == "p2") return Period::p2;
  throw input_error("unknown period '" + std::string(s) + "' (expected P1 or P2)");
}

inline Period assign_period(int year) {
  if (year < first_study_year || year > last_study_year) {
    throw input_error("year " + std::to_string(year) + " outside study range 2010-2017");
  }
  return year <= 2013 ? Period::p1 : Period::p2;
}

}  // namespace streetrisk
