#pragma once

// Hazard scores joined onto network edges, and the analyses relating edge
// hazard to centrality.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streetrisk/error.hpp"
#include "streetrisk/geo.hpp"
#include "streetrisk/network.hpp"
#include "streetrisk/stats.hpp"
#include "streetrisk/types.hpp"

namespace streetrisk::risk {

inline constexpr double default_snap_radius_m = 25.0;
inline constexpr std::size_t default_bins = 10;

struct ScoredScene {
  std::string scene_id;
  geo::GeoPoint location;
  Period period = Period::p1;
  AccidentKind kind = AccidentKind::pedestrian;
  double hazard = 0.0;
};

struct EdgeHazard {
  std::size_t edge = 0;  // index into Network::edges()
  std::string edge_id;
  AccidentKind kind = AccidentKind::pedestrian;
  std::optional<double> h1;  // mean hazard of P1 scenes
  std::optional<double> h2;
  std::size_t scenes_p1 = 0;
  std::size_t scenes_p2 = 0;

  std::size_t scene_count() const { return scenes_p1 + scenes_p2; }
  bool has_both() const { return h1 && h2; }
  double delta() const { return *h2 - *h1; }
};

struct JoinResult {
  std::vector<EdgeHazard> edges;       // ascending edge index; only edges with scenes
  std::vector<std::size_t> unsnapped;  // indices into the input scenes of this kind
  std::size_t snapped = 0;
  std::size_t considered = 0;
};

// Snaps each scene of `kind` to the nearest edge within snap_radius_m (ties go
// to the lower edge index) and averages scene hazard per edge and period.
inline JoinResult join_hazard_to_edges(std::span<const ScoredScene> scenes,
                                       const network::Network& net, double snap_radius_m,
                                       AccidentKind kind) {
  if (!(snap_radius_m > 0.0)) throw input_error("join_hazard_to_edges: snap radius must be positive");
  std::vector<std::vector<geo::GeoPoint>> lines;
  lines.reserve(net.edge_count());
  for (std::size_t e = 0; e < net.edge_count(); ++e) lines.push_back(net.edge_geometry(e));
  const geo::LineIndex index(std::move(lines), snap_radius_m);

  std::vector<double> sum1(net.edge_count(), 0.0), sum2(net.edge_count(), 0.0);
  std::vector<std::size_t> cnt1(net.edge_count(), 0), cnt2(net.edge_count(), 0);
  JoinResult r;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& s = scenes[i];
    if (s.kind != kind) continue;
    ++r.considered;
    auto hit = index.nearest(s.location, snap_radius_m);
    if (!hit) {
      r.unsnapped.push_back(i);
      continue;
    }
    ++r.snapped;
    if (s.period == Period::p1) {
      sum1[hit->index] += s.hazard;
      ++cnt1[hit->index];
    } else {
      sum2[hit->index] += s.hazard;
      ++cnt2[hit->index];
    }
  }
  for (std::size_t e = 0; e < net.edge_count(); ++e) {
    if (cnt1[e] + cnt2[e] == 0) continue;
    EdgeHazard eh;
    eh.edge = e;
    eh.edge_id = net.edges()[e].id;
    eh.kind = kind;
    eh.scenes_p1 = cnt1[e];
    eh.scenes_p2 = cnt2[e];
    if (cnt1[e]) eh.h1 = sum1[e] / static_cast<double>(cnt1[e]);
    if (cnt2[e]) eh.h2 = sum2[e] / static_cast<double>(cnt2[e]);
    r.edges.push_back(std::move(eh));
  }
  return r;
}

// Which per-edge hazard to correlate.
enum class HazardField { p1, p2, mean };

inline std::optional<double> hazard_value(const EdgeHazard& e, HazardField f) {
  switch (f) {
    case HazardField::p1:
      return e.h1;
    case HazardField::p2:
      return e.h2;
    case HazardField::mean:
      if (e.h1 && e.h2) return (*e.h1 + *e.h2) / 2.0;
      return e.h1 ? e.h1 : e.h2;
  }
  return std::nullopt;
}

struct CentralityBin {
  std::size_t index = 0;
  std::size_t count = 0;
  double centrality_min = 0.0;
  double centrality_max = 0.0;
  double mean_centrality = 0.0;
  double mean_hazard = 0.0;
};

struct CorrelationReport {
  std::size_t edges = 0;
  std::optional<double> spearman;  // nullopt: undefined (a constant variable)
  std::vector<CentralityBin> bins;
};

// Spearman correlation of edge hazard against centrality, plus mean hazard
// over equal-population centrality bins.
inline CorrelationReport centrality_correlation(std::span<const EdgeHazard> edges,
                                                const network::EdgeCentrality& centrality,
                                                HazardField field = HazardField::mean,
                                                std::size_t n_bins = default_bins) {
  if (n_bins == 0) throw input_error("centrality_correlation: need at least one bin");
  std::vector<double> xs, ys;
  for (const auto& e : edges) {
    if (e.edge >= centrality.values.size()) throw input_error("centrality missing for edge " + e.edge_id);
    if (auto h = hazard_value(e, field)) {
      xs.push_back(centrality.values[e.edge]);
      ys.push_back(*h);
    }
  }
  if (xs.size() < 2) throw input_error("centrality_correlation: need at least 2 edges with hazard");
  CorrelationReport r;
  r.edges = xs.size();
  r.spearman = stats::spearman(xs, ys);

  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  const std::size_t n = order.size();
  for (std::size_t k = 0; k < n_bins; ++k) {
    const std::size_t lo = k * n / n_bins;
    const std::size_t hi = (k + 1) * n / n_bins;
    if (lo == hi) continue;
    CentralityBin b;
    b.index = k;
    b.count = hi - lo;
    b.centrality_min = xs[order[lo]];
    b.centrality_max = xs[order[hi - 1]];
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      sx += xs[order[i]];
      sy += ys[order[i]];
    }
    b.mean_centrality = sx / static_cast<double>(b.count);
    b.mean_hazard = sy / static_cast<double>(b.count);
    r.bins.push_back(b);
  }
  return r;
}

enum class Trend { improved, deteriorated };

inline std::string to_string(Trend t) { return t == Trend::improved ? "improved" : "deteriorated"; }

struct ExtremeValue {
  std::size_t index = 0;  // position in the input
  double delta = 0.0;
  Trend trend = Trend::improved;
};

struct ExtremeReport {
  double mean = 0.0;
  double sigma = 0.0;  // population standard deviation
  std::vector<ExtremeValue> flagged;
};

// Flags values with |x - mean| > 2 sigma. sigma == 0 flags nothing.
inline ExtremeReport extreme_values(std::span<const double> deltas) {
  if (deltas.size() < 2) throw input_error("extreme_values: need at least 2 values");
  ExtremeReport r;
  r.mean = stats::mean(deltas);
  r.sigma = stats::population_stddev(deltas);
  if (r.sigma == 0.0) return r;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const double dev = deltas[i] - r.mean;
    if (std::abs(dev) > 2.0 * r.sigma) {
      r.flagged.push_back({i, deltas[i], dev < 0.0 ? Trend::improved : Trend::deteriorated});
    }
  }
  return r;
}

struct FlaggedEdge {
  std::size_t edge = 0;
  std::string edge_id;
  double delta = 0.0;
  Trend trend = Trend::improved;
};

struct ExtremeSegments {
  double mean = 0.0;
  double sigma = 0.0;
  std::size_t edges = 0;
  std::vector<FlaggedEdge> flagged;
};

// Works on edges with hazard in both periods.
inline ExtremeSegments extreme_segments(std::span<const EdgeHazard> edges) {
  std::vector<const EdgeHazard*> both;
  std::vector<double> deltas;
  for (const auto& e : edges) {
    if (!e.has_both()) continue;
    both.push_back(&e);
    deltas.push_back(e.delta());
  }
  const auto rep = extreme_values(deltas);
  ExtremeSegments out{rep.mean, rep.sigma, both.size(), {}};
  for (const auto& f : rep.flagged) {
    out.flagged.push_back({both[f.index]->edge, both[f.index]->edge_id, f.delta, f.trend});
  }
  return out;
}

struct DeltaBetweennessRow {
  std::size_t edge = 0;
  std::string edge_id;
  double delta = 0.0;
  double betweenness = 0.0;
};

struct DeltaBetweennessReport {
  std::vector<DeltaBetweennessRow> rows;
  std::optional<double> spearman;  // |delta| vs betweenness; nullopt if undefined
};

inline DeltaBetweennessReport delta_vs_betweenness(std::span<const EdgeHazard> edges,
                                                   const network::EdgeCentrality& betweenness) {
  DeltaBetweennessReport r;
  std::vector<double> abs_delta, values;
  for (const auto& e : edges) {
    if (!e.has_both()) continue;
    if (e.edge >= betweenness.values.size()) throw input_error("betweenness missing for edge " + e.edge_id);
    r.rows.push_back({e.edge, e.edge_id, e.delta(), betweenness.values[e.edge]});
    abs_delta.push_back(std::abs(e.delta()));
    values.push_back(betweenness.values[e.edge]);
  }
  if (r.rows.size() >= 2) r.spearman = stats::spearman(abs_delta, values);
  return r;
}

}  // namespace streetrisk::risk
