#pragma once

// Period-over-period analytics on location pairs: accident and hazard deltas,
// the increase/decrease agreement table, hexagonal binning of (H1, H2),
// count distributions, occupancy differentials and neighborhood means.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "streetrisk/error.hpp"
#include "streetrisk/hazard.hpp"
#include "streetrisk/ingest.hpp"
#include "streetrisk/pairs.hpp"
#include "streetrisk/stats.hpp"

namespace streetrisk::change {

inline constexpr double default_tolerance = 0.05;
inline constexpr double default_hex_size = 0.05;

struct Deltas {
  long long accidents = 0;  // n2 - n1
  double hazard = 0.0;      // h2 - h1
};

inline Deltas deltas(const LocationPair& p) {
  return {static_cast<long long>(p.n2) - static_cast<long long>(p.n1), p.h2 - p.h1};
}

// Builds one pair per scene id present in both periods. Accident counts come
// from `labels` (samples of the model's kind, both periods); hazard from the
// model. Scenes lacking a counterpart in the other period are skipped.
inline std::vector<LocationPair> build_pairs(const ingest::SceneTable& scenes,
                                             std::span<const ingest::LabeledSample> labels,
                                             const hazard::HazardModel& model) {
  hazard::check_feature_columns(model, scenes.feature_names);
  std::map<std::pair<std::string, Period>, std::size_t> counts;
  for (const auto& s : labels) {
    if (s.kind == model.kind) counts[{s.scene_id, s.period}] = s.count;
  }
  std::map<std::string, std::array<const ingest::SceneRecord*, 2>> by_id;
  for (const auto& s : scenes.scenes) by_id[s.id][index_of(s.period)] = &s;

  std::vector<LocationPair> pairs;
  for (const auto& [id, slots] : by_id) {
    if (!slots[0] || !slots[1]) continue;
    auto c1 = counts.find({id, Period::p1});
    auto c2 = counts.find({id, Period::p2});
    if (c1 == counts.end() || c2 == counts.end()) continue;
    LocationPair p;
    p.location_id = id;
    p.location = slots[0]->location;
    p.kind = model.kind;
    p.n1 = c1->second;
    p.n2 = c2->second;
    p.v1 = slots[0]->features;
    p.v2 = slots[1]->features;
    p.h1 = hazard::predict(model, p.v1).value;
    p.h2 = hazard::predict(model, p.v2).value;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

// round(100 * hits / base), half away from zero, in exact integer arithmetic.
inline std::optional<int> rounded_percent(std::size_t hits, std::size_t base) {
  if (base == 0) return std::nullopt;
  return static_cast<int>((200 * hits + base) / (2 * base));
}

// One row of the agreement table. "hits" count pairs whose hazard moved in
// the same direction as the accident count; the tolerant columns loosen the
// hazard condition to dH > -tol (increases) and dH < +tol (decreases).
struct KindAgreement {
  std::size_t increase_base = 0;
  std::size_t increase_hits = 0;
  std::size_t increase_hits_tol = 0;
  std::size_t decrease_base = 0;
  std::size_t decrease_hits = 0;
  std::size_t decrease_hits_tol = 0;

  std::optional<int> increase_percent() const { return rounded_percent(increase_hits, increase_base); }
  std::optional<int> increase_percent_tol() const {
    return rounded_percent(increase_hits_tol, increase_base);
  }
  std::optional<int> decrease_percent() const { return rounded_percent(decrease_hits, decrease_base); }
  std::optional<int> decrease_percent_tol() const {
    return rounded_percent(decrease_hits_tol, decrease_base);
  }
};

struct AgreementReport {
  double tolerance = default_tolerance;
  std::array<KindAgreement, 2> kinds{};

  const KindAgreement& at(AccidentKind k) const { return kinds[index_of(k)]; }
};

// Pairs with no accident change enter neither base.
inline AgreementReport agreement_report(std::span<const LocationPair> pairs,
                                        double tolerance = default_tolerance) {
  if (pairs.empty()) throw input_error("agreement_report: no pairs");
  if (!(tolerance >= 0.0)) throw input_error("agreement_report: tolerance must be >= 0");
  AgreementReport r;
  r.tolerance = tolerance;
  for (const auto& p : pairs) {
    auto& k = r.kinds[index_of(p.kind)];
    const auto d = deltas(p);
    if (d.accidents > 0) {
      ++k.increase_base;
      if (d.hazard > 0.0) ++k.increase_hits;
      if (d.hazard > -tolerance) ++k.increase_hits_tol;
    } else if (d.accidents < 0) {
      ++k.decrease_base;
      if (d.hazard < 0.0) ++k.decrease_hits;
      if (d.hazard < tolerance) ++k.decrease_hits_tol;
    }
  }
  return r;
}

inline nlohmann::json to_json(const AgreementReport& r) {
  auto cell = [](std::size_t count, std::optional<int> pct) {
    nlohmann::json j{{"count", count}};
    j["percent"] = pct ? nlohmann::json(*pct) : nlohmann::json(nullptr);
    return j;
  };
  nlohmann::json out{{"tolerance", r.tolerance}};
  for (auto kind : all_kinds) {
    const auto& k = r.at(kind);
    out[to_string(kind)] = {
        {"incr_acc", k.increase_base},
        {"incr_acc_incr_hzrd", cell(k.increase_hits, k.increase_percent())},
        {"incr_acc_incr_hzrd_tol", cell(k.increase_hits_tol, k.increase_percent_tol())},
        {"decr_acc", k.decrease_base},
        {"decr_acc_decr_hzrd", cell(k.decrease_hits, k.decrease_percent())},
        {"decr_acc_decr_hzrd_tol", cell(k.decrease_hits_tol, k.decrease_percent_tol())},
    };
  }
  return out;
}

// Pointy-top hexagon in axial coordinates; `size` is center-to-vertex.
struct HexCoord {
  long long q = 0;
  long long r = 0;
  friend auto operator<=>(const HexCoord&, const HexCoord&) = default;
};

inline std::pair<double, double> hex_center(HexCoord h, double size) {
  const double sqrt3 = std::numbers::sqrt3;
  return {size * sqrt3 * (static_cast<double>(h.q) + static_cast<double>(h.r) / 2.0),
          size * 1.5 * static_cast<double>(h.r)};
}

// Nearest hexagon center to (x, y) by cube rounding.
inline HexCoord hex_of(double x, double y, double size) {
  const double qf = (std::numbers::sqrt3 / 3.0 * x - y / 3.0) / size;
  const double rf = (2.0 / 3.0 * y) / size;
  const double sf = -qf - rf;
  double q = std::round(qf);
  double r = std::round(rf);
  const double s = std::round(sf);
  const double dq = std::abs(q - qf);
  const double dr = std::abs(r - rf);
  const double ds = std::abs(s - sf);
  if (dq > dr && dq > ds) {
    q = -r - s;
  } else if (dr > ds) {
    r = -q - s;
  }
  return {static_cast<long long>(q), static_cast<long long>(r)};
}

struct HexBin {
  HexCoord coord;
  double center_x = 0.0;  // H1 axis
  double center_y = 0.0;  // H2 axis
  std::size_t count = 0;
  double mean_delta_accidents = 0.0;
};

struct HexBinGrid {
  double size = default_hex_size;
  std::vector<HexBin> bins;  // ordered by (q, r)
};

// Bins pairs by (h1, h2) and averages the accident delta per bin.
inline HexBinGrid hexbin(std::span<const LocationPair> pairs, double size = default_hex_size) {
  if (!(size > 0.0)) throw input_error("hexbin: size must be positive");
  std::map<HexCoord, std::pair<std::size_t, long long>> acc;
  for (const auto& p : pairs) {
    auto& slot = acc[hex_of(p.h1, p.h2, size)];
    slot.first += 1;
    slot.second += deltas(p).accidents;
  }
  HexBinGrid grid;
  grid.size = size;
  for (const auto& [coord, v] : acc) {
    const auto [cx, cy] = hex_center(coord, size);
    grid.bins.push_back({coord, cx, cy, v.first,
                         static_cast<double>(v.second) / static_cast<double>(v.first)});
  }
  return grid;
}

// Distribution of n1 among pairs sharing the same n2.
struct CountGroup {
  std::size_t n2 = 0;
  std::size_t size = 0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

inline std::vector<CountGroup> grouped_count_stats(std::span<const LocationPair> pairs) {
  if (pairs.empty()) throw input_error("grouped_count_stats: no pairs");
  std::map<std::size_t, std::vector<double>> groups;
  for (const auto& p : pairs) groups[p.n2].push_back(static_cast<double>(p.n1));
  std::vector<CountGroup> out;
  for (auto& [n2, values] : groups) {
    std::sort(values.begin(), values.end());
    out.push_back({n2, values.size(), stats::quantile_sorted(values, 0.25),
                   stats::quantile_sorted(values, 0.5), stats::quantile_sorted(values, 0.75)});
  }
  return out;
}

struct ThresholdMedian {
  std::size_t threshold = 0;
  std::size_t count = 0;
  double median_delta = 0.0;
};

// Median accident delta over pairs with n2 >= x, for x = 0 .. max n2.
inline std::vector<ThresholdMedian> threshold_median_change(std::span<const LocationPair> pairs) {
  if (pairs.empty()) throw input_error("threshold_median_change: no pairs");
  std::vector<std::pair<std::size_t, double>> by_n2;
  for (const auto& p : pairs) by_n2.emplace_back(p.n2, static_cast<double>(deltas(p).accidents));
  std::sort(by_n2.begin(), by_n2.end());
  const std::size_t max_n2 = by_n2.back().first;
  std::vector<ThresholdMedian> out;
  std::size_t start = 0;
  for (std::size_t x = 0; x <= max_n2; ++x) {
    while (start < by_n2.size() && by_n2[start].first < x) ++start;
    if (start == by_n2.size()) break;
    std::vector<double> tail;
    tail.reserve(by_n2.size() - start);
    for (std::size_t i = start; i < by_n2.size(); ++i) tail.push_back(by_n2[i].second);
    out.push_back({x, tail.size(), stats::median(std::move(tail))});
  }
  return out;
}

// Mean over pairs with a nonzero accident delta of (v_more - v_fewer), where
// v_more is the occupancy vector of the period with more accidents.
inline std::vector<double> occupancy_differential(std::span<const LocationPair> pairs) {
  std::vector<double> sum;
  std::size_t n = 0;
  for (const auto& p : pairs) {
    const auto d = deltas(p).accidents;
    if (d == 0) continue;
    if (p.v1.size() != p.v2.size()) throw input_error("occupancy_differential: dimension mismatch");
    if (sum.empty()) sum.assign(p.v1.size(), 0.0);
    if (sum.size() != p.v1.size()) throw input_error("occupancy_differential: dimension mismatch");
    const auto& more = d > 0 ? p.v2 : p.v1;
    const auto& fewer = d > 0 ? p.v1 : p.v2;
    for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += more[c] - fewer[c];
    ++n;
  }
  if (n == 0) throw computation_error("occupancy_differential: no pairs with a nonzero accident change");
  for (double& s : sum) s /= static_cast<double>(n);
  return sum;
}

struct NeighborhoodStat {
  std::string name;
  std::size_t count = 0;
  std::optional<double> mean_delta;  // nullopt when no pair falls inside
};

struct NeighborhoodReport {
  std::vector<NeighborhoodStat> neighborhoods;  // input order
  std::size_t unassigned = 0;
  std::optional<double> unassigned_mean_delta;
};

// Each pair goes to the first neighborhood (in input order) containing it.
inline NeighborhoodReport neighborhood_mean_change(std::span<const LocationPair> pairs,
                                                   std::span<const ingest::Neighborhood> hoods) {
  NeighborhoodReport r;
  std::vector<long long> sums(hoods.size(), 0);
  long long unassigned_sum = 0;
  for (const auto& h : hoods) r.neighborhoods.push_back({h.name, 0, std::nullopt});
  for (const auto& p : pairs) {
    const auto d = deltas(p).accidents;
    auto it = std::find_if(hoods.begin(), hoods.end(),
                           [&](const ingest::Neighborhood& h) { return h.contains(p.location); });
    if (it == hoods.end()) {
      ++r.unassigned;
      unassigned_sum += d;
      continue;
    }
    const auto idx = static_cast<std::size_t>(it - hoods.begin());
    ++r.neighborhoods[idx].count;
    sums[idx] += d;
  }
  for (std::size_t i = 0; i < hoods.size(); ++i) {
    if (r.neighborhoods[i].count) {
      r.neighborhoods[i].mean_delta =
          static_cast<double>(sums[i]) / static_cast<double>(r.neighborhoods[i].count);
    }
  }
  if (r.unassigned) {
    r.unassigned_mean_delta = static_cast<double>(unassigned_sum) / static_cast<double>(r.unassigned);
  }
  return r;
}

}  // namespace streetrisk::change
