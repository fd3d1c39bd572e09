#pragma once

// Run configuration: a flat key = value text file. Lines starting with '#'
// are comments. Unknown keys are errors.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "streetrisk/csv.hpp"
#include "streetrisk/error.hpp"
#include "streetrisk/types.hpp"

namespace streetrisk {

enum class LabelMode { per_period, pooled };

inline std::string to_string(LabelMode m) { return m == LabelMode::per_period ? "per_period" : "pooled"; }

inline LabelMode parse_label_mode(std::string_view s) {
  if (s == "per_period") return LabelMode::per_period;
  if (s == "pooled") return LabelMode::pooled;
  throw input_error("unknown label mode '" + std::string(s) + "' (expected per_period or pooled)");
}

struct RunConfig {
  // inputs
  std::string accidents;
  std::string scenes;
  std::string neighborhoods;
  std::string pedestrian_nodes;
  std::string pedestrian_edges;
  std::string pedestrian_geojson;
  std::string road_nodes;
  std::string road_edges;
  std::string road_geojson;
  std::string model_dir;  // empty: the output directory

  // parameters
  double radius_m = 50.0;
  double tolerance = 0.05;
  double hex_size = 0.05;
  double lambda_m = 500.0;
  double snap_radius_m = 25.0;
  double total_trips = 10000.0;
  double learning_rate = 0.1;
  int epochs = 500;
  double l2 = 1e-4;
  std::size_t n_bins = 10;
  LabelMode label_mode = LabelMode::per_period;

  // run control
  std::string out = "out";
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::optional<AccidentKind> kind;  // nullopt: both kinds
  std::optional<Period> period;      // nullopt: both periods
  bool restricted = false;
  bool per_scene = false;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  std::vector<AccidentKind> kinds() const {
    if (kind) return {*kind};
    return {all_kinds.begin(), all_kinds.end()};
  }
  std::vector<Period> periods() const {
    if (period) return {*period};
    return {all_periods.begin(), all_periods.end()};
  }
  std::string models() const { return model_dir.empty() ? out : model_dir; }
};

namespace detail {

// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct ConfigKey {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

inline double parse_number(const std::string& key, const std::string& v) {
  auto d = csv::parse_double(v);
  if (!d || !std::isfinite(*d)) throw input_error("config: " + key + " expects a number, got '" + v + "'");
  return *d;
}

inline long long parse_integer(const std::string& key, const std::string& v) {
  auto i = csv::parse_int(v);
  if (!i) throw input_error("config: " + key + " expects an integer, got '" + v + "'");
  return *i;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw input_error("config: " + key + " expects true or false, got '" + v + "'");
}

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto text = [&k](std::string name, std::string RunConfig::*field) {
      k.push_back({name, [field](const RunConfig& c) { return c.*field; },
                   [field](RunConfig& c, const std::string& v) { c.*field = v; }});
    };
    auto number = [&k](std::string name, double RunConfig::*field) {
      k.push_back({name, [field](const RunConfig& c) { return format_double(c.*field); },
                   [field, name](RunConfig& c, const std::string& v) { c.*field = parse_number(name, v); }});
    };
    text("accidents", &RunConfig::accidents);
    text("scenes", &RunConfig::scenes);
    text("neighborhoods", &RunConfig::neighborhoods);
    text("pedestrian_nodes", &RunConfig::pedestrian_nodes);
    text("pedestrian_edges", &RunConfig::pedestrian_edges);
    text("pedestrian_geojson", &RunConfig::pedestrian_geojson);
    text("road_nodes", &RunConfig::road_nodes);
    text("road_edges", &RunConfig::road_edges);
    text("road_geojson", &RunConfig::road_geojson);
    text("model_dir", &RunConfig::model_dir);
    number("radius_m", &RunConfig::radius_m);
    number("tolerance", &RunConfig::tolerance);
    number("hex_size", &RunConfig::hex_size);
    number("lambda_m", &RunConfig::lambda_m);
    number("snap_radius_m", &RunConfig::snap_radius_m);
    number("total_trips", &RunConfig::total_trips);
    number("learning_rate", &RunConfig::learning_rate);
    k.push_back({"epochs", [](const RunConfig& c) { return std::to_string(c.epochs); },
                 [](RunConfig& c, const std::string& v) {
                   const auto i = parse_integer("epochs", v);
                   if (i < 0 || i > 100'000'000) throw input_error("config: epochs out of range");
                   c.epochs = static_cast<int>(i);
                 }});
    number("l2", &RunConfig::l2);
    k.push_back({"n_bins", [](const RunConfig& c) { return std::to_string(c.n_bins); },
                 [](RunConfig& c, const std::string& v) {
                   const auto i = parse_integer("n_bins", v);
                   if (i < 1) throw input_error("config: n_bins must be >= 1");
                   c.n_bins = static_cast<std::size_t>(i);
                 }});
    k.push_back({"label_mode", [](const RunConfig& c) { return to_string(c.label_mode); },
                 [](RunConfig& c, const std::string& v) { c.label_mode = parse_label_mode(v); }});
    text("out", &RunConfig::out);
    k.push_back({"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, const std::string& v) {
                   std::uint64_t s = 0;
                   auto res = std::from_chars(v.data(), v.data() + v.size(), s);
                   if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
                     throw input_error("config: seed expects a nonnegative integer, got '" + v + "'");
                   }
                   c.seed = s;
                 }});
    k.push_back({"threads", [](const RunConfig& c) { return std::to_string(c.threads); },
                 [](RunConfig& c, const std::string& v) {
                   const auto i = parse_integer("threads", v);
                   if (i < 1 || i > 1024) throw input_error("config: threads must be in [1, 1024]");
                   c.threads = static_cast<unsigned>(i);
                 }});
    k.push_back({"kind", [](const RunConfig& c) { return c.kind ? to_string(*c.kind) : std::string("all"); },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "all" || v.empty()) {
                     c.kind.reset();
                   } else {
                     c.kind = parse_kind(v);
                   }
                 }});
    k.push_back({"period", [](const RunConfig& c) { return c.period ? to_string(*c.period) : std::string("all"); },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "all" || v.empty()) {
                     c.period.reset();
                   } else {
                     c.period = parse_period(v);
                   }
                 }});
    k.push_back({"restricted", [](const RunConfig& c) { return std::string(c.restricted ? "true" : "false"); },
                 [](RunConfig& c, const std::string& v) { c.restricted = parse_bool("restricted", v); }});
    k.push_back({"per_scene", [](const RunConfig& c) { return std::string(c.per_scene ? "true" : "false"); },
                 [](RunConfig& c, const std::string& v) { c.per_scene = parse_bool("per_scene", v); }});
    return k;
  }();
  return keys;
}

}  // namespace detail

// Applies one key = value assignment.
inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  for (const auto& k : detail::config_keys()) {
    if (k.name == key) {
      k.set(c, value);
      return;
    }
  }
  throw input_error("config: unknown key '" + key + "'");
}

inline void validate(const RunConfig& c) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw input_error(std::string("config: ") + name + " must be positive");
  };
  positive(c.radius_m, "radius_m");
  positive(c.hex_size, "hex_size");
  positive(c.lambda_m, "lambda_m");
  positive(c.snap_radius_m, "snap_radius_m");
  positive(c.total_trips, "total_trips");
  positive(c.learning_rate, "learning_rate");
  if (!(c.tolerance >= 0.0)) throw input_error("config: tolerance must be >= 0");
  if (!(c.l2 >= 0.0)) throw input_error("config: l2 must be >= 0");
  if (c.epochs < 0) throw input_error("config: epochs must be >= 0");
  if (c.out.empty()) throw input_error("config: out must not be empty");
}

// Parses on top of `base` so that defaults survive for absent keys.
inline RunConfig parse_config(std::istream& in, RunConfig base = {}, const std::string& source = "config") {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = csv::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw input_error(source + ":" + std::to_string(n) + ": expected key = value");
    }
    try {
      set_config_value(base, csv::trim(std::string_view(t).substr(0, eq)),
                       csv::trim(std::string_view(t).substr(eq + 1)));
    } catch (const input_error& e) {
      throw input_error(source + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return base;
}

inline RunConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open config " + path);
  return parse_config(in, {}, path);
}

inline std::string serialize(const RunConfig& c) {
  std::string out;
  for (const auto& k : detail::config_keys()) out += k.name + " = " + k.get(c) + "\n";
  return out;
}

}  // namespace streetrisk
