#pragma once

// Command-line front end. run_cli() is the whole program minus main(), so the
// commands can be driven in-process.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "streetrisk/change.hpp"
#include "streetrisk/config.hpp"
#include "streetrisk/csv.hpp"
#include "streetrisk/error.hpp"
#include "streetrisk/hazard.hpp"
#include "streetrisk/ingest.hpp"
#include "streetrisk/network.hpp"
#include "streetrisk/risk.hpp"
#include "streetrisk/synth.hpp"

namespace streetrisk::cli {

namespace fs = std::filesystem;

inline std::string num(double v) { return streetrisk::detail::format_double(v); }
inline std::string num(std::optional<double> v) { return v ? num(*v) : std::string(); }

// Relative input paths in a config file are taken relative to that file.
inline void resolve_paths(RunConfig& c, const fs::path& base) {
  for (std::string* p : {&c.accidents, &c.scenes, &c.neighborhoods, &c.pedestrian_nodes, &c.pedestrian_edges,
                         &c.pedestrian_geojson, &c.road_nodes, &c.road_edges, &c.road_geojson, &c.model_dir}) {
    if (!p->empty() && fs::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
}

inline const std::string& require_path(const std::string& value, const char* key) {
  if (value.empty()) throw input_error(std::string("config: '") + key + "' is required for this command");
  return value;
}

class CsvFile {
 public:
  CsvFile(const fs::path& path, const std::vector<std::string>& header) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw input_error("cannot write " + path.string());
    csv::write_row(out_, header);
  }
  void row(const std::vector<std::string>& fields) { csv::write_row(out_, fields); }

 private:
  fs::path path_;
  std::ofstream out_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot write " + path.string());
  f << text;
}

inline void warn_rows(std::ostream& err, const std::string& source, const std::vector<ingest::RowError>& errors) {
  constexpr std::size_t shown = 5;
  for (std::size_t i = 0; i < std::min(shown, errors.size()); ++i) {
    err << "warning: " << source << ":" << errors[i].line << ": " << errors[i].message << "\n";
  }
  if (errors.size() > shown) err << "warning: " << source << ": " << errors.size() << " rows skipped in total\n";
}

struct Context {
  RunConfig config;
  std::ostream& out;
  std::ostream& err;

  fs::path out_dir() const { return fs::path(config.out); }
  fs::path model_path(AccidentKind k) const { return fs::path(config.models()) / ("model_" + to_string(k) + ".json"); }

  ingest::SceneTable scenes() const {
    auto t = ingest::load_scenes(require_path(config.scenes, "scenes"));
    warn_rows(err, config.scenes, t.errors);
    if (t.scenes.empty()) throw input_error(config.scenes + ": no valid scenes");
    return t;
  }
  std::vector<ingest::AccidentRecord> accidents() const {
    auto t = ingest::load_accidents(require_path(config.accidents, "accidents"));
    warn_rows(err, config.accidents, t.errors);
    return std::move(t.records);
  }
};

// Per-scene accident counts for the selected kinds. per_period: each scene
// against accidents of its own period. pooled: against all 2010-2017
// accidents. The period filter restricts which scenes take part.
inline std::vector<ingest::LabeledSample> label_samples(const ingest::SceneTable& scenes,
                                                        std::span<const ingest::AccidentRecord> accidents,
                                                        const RunConfig& c, LabelMode mode) {
  std::vector<ingest::LabeledSample> out;
  for (auto kind : c.kinds()) {
    if (mode == LabelMode::per_period) {
      for (auto p : c.periods()) {
        auto part = ingest::count_accidents(scenes.scenes, accidents, c.radius_m, kind, p, c.threads);
        out.insert(out.end(), part.begin(), part.end());
      }
    } else {
      auto part = ingest::count_accidents(scenes.scenes, accidents, c.radius_m, kind, std::nullopt, c.threads);
      for (auto& s : part) {
        if (!c.period || s.period == *c.period) out.push_back(std::move(s));
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.kind, a.scene_id, a.period) < std::tie(b.kind, b.scene_id, b.period);
  });
  return out;
}

inline std::vector<hazard::TrainingSample> training_samples(const ingest::SceneTable& scenes,
                                                            std::span<const ingest::LabeledSample> labels,
                                                            AccidentKind kind) {
  std::map<std::pair<std::string, Period>, const ingest::SceneRecord*> by_key;
  for (const auto& s : scenes.scenes) by_key[{s.id, s.period}] = &s;
  std::vector<hazard::TrainingSample> out;
  for (const auto& l : labels) {
    if (l.kind != kind) continue;
    const auto* s = by_key.at({l.scene_id, l.period});
    out.push_back({s->features, l.label == ingest::Label::dangerous});
  }
  return out;
}

inline hazard::TrainingOptions training_options(const RunConfig& c) {
  hazard::TrainingOptions o;
  o.learning_rate = c.learning_rate;
  o.epochs = c.epochs;
  o.l2 = c.l2;
  o.threads = c.threads;
  return o;
}

inline hazard::ModelSet load_models(const Context& ctx, const ingest::SceneTable& scenes) {
  hazard::ModelSet models;
  for (auto kind : ctx.config.kinds()) {
    const auto path = ctx.model_path(kind);
    if (!fs::exists(path)) throw input_error("missing model " + path.string() + " (run 'train' first)");
    auto m = hazard::load_model(path.string());
    if (m.kind != kind) throw input_error(path.string() + ": model kind does not match file name");
    hazard::check_feature_columns(m, scenes.feature_names);
    models.set(std::move(m));
  }
  return models;
}

inline std::vector<risk::ScoredScene> score_scenes(const ingest::SceneTable& scenes, const hazard::ModelSet& models,
                                                   const RunConfig& c) {
  std::vector<risk::ScoredScene> out;
  for (auto kind : c.kinds()) {
    const auto& m = models.at(kind);
    for (const auto& s : scenes.scenes) {
      if (c.period && s.period != *c.period) continue;
      out.push_back({s.id, s.location, s.period, kind, hazard::predict(m, s.features).value});
    }
  }
  return out;
}

inline network::Network load_kind_network(const RunConfig& c, AccidentKind kind) {
  const bool ped = kind == AccidentKind::pedestrian;
  const auto& geojson = ped ? c.pedestrian_geojson : c.road_geojson;
  if (!geojson.empty()) return network::load_network_geojson(geojson);
  const auto& nodes = ped ? c.pedestrian_nodes : c.road_nodes;
  const auto& edges = ped ? c.pedestrian_edges : c.road_edges;
  if (nodes.empty() || edges.empty()) {
    throw input_error(std::string("config: set ") + (ped ? "pedestrian" : "road") + "_nodes and " +
                      (ped ? "pedestrian" : "road") + "_edges, or " + (ped ? "pedestrian" : "road") + "_geojson");
  }
  return network::load_network_csv(nodes, edges);
}

struct Centralities {
  network::EdgeCentrality betweenness;
  network::EdgeCentrality closeness;
  std::size_t dropped_origins = 0;
  double dropped_trips = 0.0;
};

// Pedestrians: gravity OD over distance weights. Vehicles: uniform OD over
// traversal time.
inline Centralities centralities(const network::Network& net, AccidentKind kind, const RunConfig& c) {
  Centralities r;
  if (kind == AccidentKind::pedestrian) {
    const auto w = network::traversal_weights(net, network::WeightMode::distance);
    auto g = network::gravity_od(net, c.lambda_m, c.total_trips, c.threads);
    r.dropped_origins = g.dropped_origins.size();
    r.dropped_trips = g.dropped_trips;
    r.betweenness = network::od_edge_betweenness(net, g.od, w, c.threads);
    r.closeness = network::edge_closeness(net, w, c.threads);
  } else {
    const auto w = network::traversal_weights(net, network::WeightMode::time);
    r.betweenness = network::od_edge_betweenness(net, network::uniform_od(net), w, c.threads);
    r.closeness = network::edge_closeness(net, w, c.threads);
  }
  return r;
}

// ---- commands ------------------------------------------------------------

inline void cmd_label(const Context& ctx) {
  const auto& c = ctx.config;
  const auto scenes = ctx.scenes();
  const auto accidents = ctx.accidents();
  const auto labels = label_samples(scenes, accidents, c, c.label_mode);
  fs::create_directories(ctx.out_dir());

  CsvFile lf(ctx.out_dir() / "labels.csv", {"scene_id", "period", "kind", "count", "label"});
  for (const auto& l : labels) {
    lf.row({l.scene_id, to_string(l.period), to_string(l.kind), std::to_string(l.count), ingest::to_string(l.label)});
  }

  const auto summary = ingest::summarize_labels(labels);
  CsvFile sf(ctx.out_dir() / "label_summary.csv", {"kind", "period", "dangerous", "safe", "total"});
  ctx.out << "labels (" << to_string(c.label_mode) << ", radius " << num(c.radius_m) << " m)\n";
  ctx.out << "kind period dangerous safe total\n";
  for (auto k : c.kinds()) {
    for (auto p : c.periods()) {
      const auto& s = summary.at(k, p);
      sf.row({to_string(k), to_string(p), std::to_string(s.dangerous), std::to_string(s.safe),
              std::to_string(s.total())});
      ctx.out << to_string(k) << " " << to_string(p) << " " << s.dangerous << " " << s.safe << " " << s.total()
              << "\n";
    }
  }

  const auto acc = ingest::summarize_accidents(accidents);
  CsvFile af(ctx.out_dir() / "accident_summary.csv", {"kind", "P1", "P2", "total", "percent_change"});
  ctx.out << "accidents: kind P1 P2 total change%\n";
  auto pct = [](std::optional<double> v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.1f", *v);
    return std::string(buf);
  };
  for (auto k : all_kinds) {
    af.row({to_string(k), std::to_string(acc.at(k, Period::p1)), std::to_string(acc.at(k, Period::p2)),
            std::to_string(acc.kind_total(k)), num(acc.percent_change(k))});
    ctx.out << to_string(k) << " " << acc.at(k, Period::p1) << " " << acc.at(k, Period::p2) << " "
            << acc.kind_total(k) << " " << pct(acc.percent_change(k)) << "\n";
  }
  af.row({"total", std::to_string(acc.period_total(Period::p1)), std::to_string(acc.period_total(Period::p2)),
          std::to_string(acc.grand_total()), num(acc.total_percent_change())});
  ctx.out << "total " << acc.period_total(Period::p1) << " " << acc.period_total(Period::p2) << " "
          << acc.grand_total() << " " << pct(acc.total_percent_change()) << "\n";
}

inline void cmd_train(const Context& ctx) {
  const auto& c = ctx.config;
  const auto scenes = ctx.scenes();
  const auto accidents = ctx.accidents();
  const auto labels = label_samples(scenes, accidents, c, c.label_mode);
  fs::create_directories(c.models());
  fs::create_directories(ctx.out_dir());
  CsvFile sf(ctx.out_dir() / "training_summary.csv",
             {"kind", "samples", "accuracy", "tp", "fp", "tn", "fn", "initial_loss", "final_loss", "halvings",
              "stalled"});
  ctx.out << "kind samples accuracy final_loss\n";
  for (auto kind : c.kinds()) {
    const auto samples = training_samples(scenes, labels, kind);
    const auto model = hazard::train(samples, kind, scenes.feature_names, training_options(c));
    hazard::save_model(model, ctx.model_path(kind).string());
    const auto conf = hazard::evaluate(model, samples);
    const auto& md = model.metadata;
    sf.row({to_string(kind), std::to_string(samples.size()), num(conf.accuracy()), std::to_string(conf.tp),
            std::to_string(conf.fp), std::to_string(conf.tn), std::to_string(conf.fn), num(md.initial_loss),
            num(md.final_loss), std::to_string(md.halvings), md.stalled ? "true" : "false"});
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s %zu %.4f %.6f", to_string(kind).c_str(), samples.size(), conf.accuracy(),
                  md.final_loss);
    ctx.out << buf << (md.stalled ? " (stalled)" : "") << "\n";
  }
}

inline void cmd_score(const Context& ctx) {
  const auto scenes = ctx.scenes();
  const auto models = load_models(ctx, scenes);
  const auto scored = score_scenes(scenes, models, ctx.config);
  fs::create_directories(ctx.out_dir());
  CsvFile f(ctx.out_dir() / "scores.csv", {"scene_id", "period", "kind", "hazard", "predicted"});
  std::size_t dangerous = 0;
  for (const auto& s : scored) {
    const bool d = hazard::HazardScore{s.hazard}.dangerous();
    dangerous += d;
    f.row({s.scene_id, to_string(s.period), to_string(s.kind), num(s.hazard), d ? "dangerous" : "safe"});
  }
  ctx.out << "scored " << scored.size() << " scene rows, " << dangerous << " predicted dangerous\n";
}

inline std::string agreement_text(const change::AgreementReport& r, std::span<const AccidentKind> kinds) {
  std::ostringstream o;
  auto cell = [](std::size_t n, std::optional<int> p) {
    return std::to_string(n) + " (" + (p ? std::to_string(*p) + "%" : std::string("n/a")) + ")";
  };
  o << "type incr_acc incr_hzrd incr_hzrd_tol decr_acc decr_hzrd decr_hzrd_tol\n";
  for (auto k : kinds) {
    const auto& a = r.at(k);
    o << to_string(k) << " " << a.increase_base << " " << cell(a.increase_hits, a.increase_percent()) << " "
      << cell(a.increase_hits_tol, a.increase_percent_tol()) << " " << a.decrease_base << " "
      << cell(a.decrease_hits, a.decrease_percent()) << " " << cell(a.decrease_hits_tol, a.decrease_percent_tol())
      << "\n";
  }
  return o.str();
}

inline void cmd_change(const Context& ctx) {
  const auto& c = ctx.config;
  auto pc = c;
  pc.period.reset();  // pairs need both periods
  const auto scenes = ctx.scenes();
  const auto accidents = ctx.accidents();
  const auto models = load_models(ctx, scenes);
  const auto labels = label_samples(scenes, accidents, pc, LabelMode::per_period);
  std::vector<ingest::Neighborhood> hoods;
  if (!c.neighborhoods.empty()) hoods = ingest::load_neighborhoods(c.neighborhoods);

  std::vector<LocationPair> all_pairs;
  for (auto kind : c.kinds()) {
    auto p = change::build_pairs(scenes, labels, models.at(kind));
    all_pairs.insert(all_pairs.end(), p.begin(), p.end());
  }
  if (all_pairs.empty()) throw input_error("change: no scene is present in both periods");
  fs::create_directories(ctx.out_dir());

  const auto kinds = c.kinds();
  nlohmann::json table{{"full", change::to_json(change::agreement_report(all_pairs, c.tolerance))}};
  ctx.out << "full dataset (" << all_pairs.size() << " pairs, tolerance " << num(c.tolerance) << ")\n"
          << agreement_text(change::agreement_report(all_pairs, c.tolerance), kinds);
  if (c.restricted) {
    const auto kept = hazard::restrict_pairs(all_pairs, models);
    if (kept.empty()) throw computation_error("change: no pair is correctly classified in both periods");
    const auto rr = change::agreement_report(kept, c.tolerance);
    table["restricted"] = change::to_json(rr);
    ctx.out << "restricted dataset (" << kept.size() << " pairs)\n" << agreement_text(rr, kinds);
  }
  write_text(ctx.out_dir() / "agreement.json", table.dump(2) + "\n");

  for (auto kind : kinds) {
    std::vector<LocationPair> pairs;
    for (const auto& p : all_pairs)
      if (p.kind == kind) pairs.push_back(p);
    if (pairs.empty()) continue;
    const auto k = to_string(kind);

    const auto grid = change::hexbin(pairs, c.hex_size);
    CsvFile hf(ctx.out_dir() / ("hexbin_" + k + ".csv"), {"q", "r", "center_h1", "center_h2", "count", "mean_delta_acc"});
    for (const auto& b : grid.bins) {
      hf.row({std::to_string(b.coord.q), std::to_string(b.coord.r), num(b.center_x), num(b.center_y),
              std::to_string(b.count), num(b.mean_delta_accidents)});
    }

    CsvFile gf(ctx.out_dir() / ("grouped_" + k + ".csv"), {"n2", "size", "q1_n1", "median_n1", "q3_n1"});
    for (const auto& g : change::grouped_count_stats(pairs)) {
      gf.row({std::to_string(g.n2), std::to_string(g.size), num(g.q1), num(g.median), num(g.q3)});
    }

    CsvFile tf(ctx.out_dir() / ("threshold_" + k + ".csv"), {"min_n2", "count", "median_delta_acc"});
    for (const auto& t : change::threshold_median_change(pairs)) {
      tf.row({std::to_string(t.threshold), std::to_string(t.count), num(t.median_delta)});
    }

    CsvFile df(ctx.out_dir() / ("differential_" + k + ".csv"), {"feature", "mean_difference"});
    try {
      const auto d = change::occupancy_differential(pairs);
      for (std::size_t i = 0; i < d.size(); ++i) df.row({scenes.feature_names[i], num(d[i])});
    } catch (const computation_error& e) {
      ctx.err << "warning: " << k << ": " << e.what() << "\n";
    }

    if (!hoods.empty()) {
      const auto nr = change::neighborhood_mean_change(pairs, hoods);
      CsvFile nf(ctx.out_dir() / ("neighborhoods_" + k + ".csv"), {"name", "count", "mean_delta_acc"});
      for (const auto& n : nr.neighborhoods) nf.row({n.name, std::to_string(n.count), num(n.mean_delta)});
      nf.row({"(unassigned)", std::to_string(nr.unassigned), num(nr.unassigned_mean_delta)});
    }
  }
}

inline void cmd_network(const Context& ctx) {
  const auto& c = ctx.config;
  fs::create_directories(ctx.out_dir());
  for (auto kind : c.kinds()) {
    const auto net = load_kind_network(c, kind);
    const auto cent = centralities(net, kind, c);
    const auto k = to_string(kind);
    CsvFile f(ctx.out_dir() / ("centrality_" + k + ".csv"), {"edge_id", "u", "v", "betweenness", "closeness"});
    for (std::size_t e = 0; e < net.edge_count(); ++e) {
      const auto& edge = net.edges()[e];
      f.row({edge.id, net.nodes()[edge.u].id, net.nodes()[edge.v].id, num(cent.betweenness.values[e]),
             num(cent.closeness.values[e])});
    }
    ctx.out << k << " network: " << net.node_count() << " nodes, " << net.edge_count() << " edges";
    if (kind == AccidentKind::pedestrian) {
      ctx.out << ", gravity OD (lambda " << num(c.lambda_m) << " m)";
      if (cent.dropped_origins) {
        ctx.err << "warning: " << cent.dropped_origins << " origins had no reachable destination; "
                << num(cent.dropped_trips) << " trips dropped\n";
      }
    } else {
      ctx.out << ", uniform OD, time weights";
    }
    ctx.out << "\n";
  }
}

inline nlohmann::json correlation_json(const risk::CorrelationReport& r) {
  nlohmann::json j{{"edges", r.edges}};
  j["spearman"] = r.spearman ? nlohmann::json(*r.spearman) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json line_feature(const std::vector<geo::GeoPoint>& line, nlohmann::json props) {
  nlohmann::json coords = nlohmann::json::array();
  for (const auto& p : line) coords.push_back({p.lon, p.lat});
  return {{"type", "Feature"}, {"properties", std::move(props)}, {"geometry", {{"type", "LineString"}, {"coordinates", coords}}}};
}

inline void cmd_risk(const Context& ctx) {
  const auto& c = ctx.config;
  auto sc = c;
  sc.period.reset();  // deltas need both periods
  const auto scenes = ctx.scenes();
  const auto models = load_models(ctx, scenes);
  const auto scored = score_scenes(scenes, models, sc);
  fs::create_directories(ctx.out_dir());

  for (auto kind : c.kinds()) {
    const auto k = to_string(kind);
    const auto net = load_kind_network(c, kind);
    const auto cent = centralities(net, kind, c);
    const auto join = risk::join_hazard_to_edges(scored, net, c.snap_radius_m, kind);
    if (!join.unsnapped.empty()) {
      ctx.err << "warning: " << k << ": " << join.unsnapped.size() << " of " << join.considered
              << " scenes farther than " << num(c.snap_radius_m) << " m from every edge\n";
    }

    CsvFile ef(ctx.out_dir() / ("edge_hazard_" + k + ".csv"),
               {"edge_id", "scenes_p1", "scenes_p2", "h1", "h2", "delta", "betweenness", "closeness"});
    for (const auto& e : join.edges) {
      ef.row({e.edge_id, std::to_string(e.scenes_p1), std::to_string(e.scenes_p2), num(e.h1), num(e.h2),
              e.has_both() ? num(e.delta()) : std::string(), num(cent.betweenness.values[e.edge]),
              num(cent.closeness.values[e.edge])});
    }

    nlohmann::json summary{{"kind", k}, {"edges_with_hazard", join.edges.size()}, {"scenes_snapped", join.snapped},
                           {"scenes_unsnapped", join.unsnapped.size()}};
    CsvFile bf(ctx.out_dir() / ("correlation_bins_" + k + ".csv"),
               {"measure", "bin", "count", "centrality_min", "centrality_max", "mean_centrality", "mean_hazard"});
    if (join.edges.size() >= 2) {
      for (auto [name, values] : {std::pair{"betweenness", &cent.betweenness}, std::pair{"closeness", &cent.closeness}}) {
        const auto r = risk::centrality_correlation(join.edges, *values, risk::HazardField::mean, c.n_bins);
        summary[name] = correlation_json(r);
        for (const auto& b : r.bins) {
          bf.row({name, std::to_string(b.index), std::to_string(b.count), num(b.centrality_min),
                  num(b.centrality_max), num(b.mean_centrality), num(b.mean_hazard)});
        }
      }
    }

    const auto dvb = risk::delta_vs_betweenness(join.edges, cent.betweenness);
    CsvFile df(ctx.out_dir() / ("delta_betweenness_" + k + ".csv"), {"edge_id", "delta", "betweenness"});
    for (const auto& row : dvb.rows) df.row({row.edge_id, num(row.delta), num(row.betweenness)});
    summary["abs_delta_vs_betweenness_spearman"] = dvb.spearman ? nlohmann::json(*dvb.spearman) : nlohmann::json(nullptr);

    nlohmann::json fc{{"type", "FeatureCollection"}, {"features", nlohmann::json::array()}};
    CsvFile xf(ctx.out_dir() / ("extremes_" + k + ".csv"), {"id", "delta", "trend"});
    if (c.per_scene) {
      std::map<std::string, std::array<std::optional<double>, 2>> by_id;
      std::map<std::string, geo::GeoPoint> where;
      for (const auto& s : scored) {
        if (s.kind != kind) continue;
        by_id[s.scene_id][index_of(s.period)] = s.hazard;
        where[s.scene_id] = s.location;
      }
      std::vector<std::string> ids;
      std::vector<double> deltas;
      for (const auto& [id, h] : by_id) {
        if (h[0] && h[1]) {
          ids.push_back(id);
          deltas.push_back(*h[1] - *h[0]);
        }
      }
      if (deltas.size() >= 2) {
        const auto rep = risk::extreme_values(deltas);
        summary["extremes"] = {{"unit", "scene"}, {"mean", rep.mean}, {"sigma", rep.sigma}, {"flagged", rep.flagged.size()}};
        for (const auto& f : rep.flagged) {
          xf.row({ids[f.index], num(f.delta), risk::to_string(f.trend)});
          const auto& p = where[ids[f.index]];
          fc["features"].push_back({{"type", "Feature"},
                                    {"properties", {{"id", ids[f.index]}, {"delta", f.delta}, {"trend", risk::to_string(f.trend)}}},
                                    {"geometry", {{"type", "Point"}, {"coordinates", {p.lon, p.lat}}}}});
        }
      }
    } else {
      std::size_t both = 0;
      for (const auto& e : join.edges) both += e.has_both();
      if (both >= 2) {
        const auto ex = risk::extreme_segments(join.edges);
        summary["extremes"] = {{"unit", "edge"}, {"mean", ex.mean}, {"sigma", ex.sigma}, {"flagged", ex.flagged.size()}};
        for (const auto& f : ex.flagged) {
          xf.row({f.edge_id, num(f.delta), risk::to_string(f.trend)});
          fc["features"].push_back(line_feature(net.edge_geometry(f.edge),
                                                {{"id", f.edge_id}, {"delta", f.delta}, {"trend", risk::to_string(f.trend)}}));
        }
      }
    }
    write_text(ctx.out_dir() / ("extremes_" + k + ".geojson"), fc.dump(1) + "\n");
    write_text(ctx.out_dir() / ("risk_summary_" + k + ".json"), summary.dump(2) + "\n");

    ctx.out << k << ": " << join.edges.size() << " edges with hazard";
    if (summary.contains("betweenness") && !summary["betweenness"]["spearman"].is_null()) {
      char buf[64];
      std::snprintf(buf, sizeof buf, ", spearman(H, betweenness) = %.3f", summary["betweenness"]["spearman"].get<double>());
      ctx.out << buf;
    }
    if (summary.contains("extremes")) ctx.out << ", " << summary["extremes"]["flagged"].get<std::size_t>() << " extreme";
    ctx.out << "\n";
  }
}

inline void cmd_synth(const Context& ctx, std::size_t grid) {
  synth::CityOptions opt;
  opt.grid = grid;
  const auto city = synth::generate_city(ctx.config.seed, opt);
  synth::write_city(city, ctx.out_dir());
  ctx.out << "wrote synthetic city (" << city.nodes.size() << " nodes, " << city.scenes.scenes.size()
          << " scene rows, " << city.accidents.size() << " accidents) to " << ctx.config.out << "\n";
}

// ---- entry point ---------------------------------------------------------

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Street-level accident risk analytics"};
  app.require_subcommand(1);

  std::string config_path, out_dir, kind, period;
  std::vector<std::string> sets;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
  bool restricted = false, per_scene = false;
  std::size_t grid = 12;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--kind", kind, "accident kind: P or V (default both)");
    sub->add_option("--period", period, "period: P1 or P2 (default both)");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 1024u));
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--set", sets, "override a config key, KEY=VALUE");
    return sub;
  };
  auto* label = common(app.add_subcommand("label", "count accidents near scenes and label them"));
  auto* train = common(app.add_subcommand("train", "train one hazard model per accident kind"));
  auto* score = common(app.add_subcommand("score", "score scenes with trained models"));
  auto* chg = common(app.add_subcommand("change", "period-over-period agreement and change analytics"));
  chg->add_flag("--restricted", restricted, "also report the restricted (correctly classified) pairs");
  auto* net = common(app.add_subcommand("network", "edge betweenness and closeness centrality"));
  auto* rsk = common(app.add_subcommand("risk", "join hazard to edges, correlations, extremes"));
  rsk->add_flag("--per-scene", per_scene, "flag extreme hazard changes per scene instead of per edge");
  auto* syn = common(app.add_subcommand("synth", "write a seeded synthetic city"));
  syn->add_option("--grid", grid, "nodes per side")->check(CLI::Range(2, 200));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      cfg = load_config(config_path);
      resolve_paths(cfg, fs::absolute(config_path).parent_path());
    }
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw input_error("--set expects KEY=VALUE, got '" + s + "'");
      set_config_value(cfg, csv::trim(std::string_view(s).substr(0, eq)), csv::trim(std::string_view(s).substr(eq + 1)));
    }
    if (!out_dir.empty()) cfg.out = out_dir;
    if (!kind.empty()) set_config_value(cfg, "kind", kind);
    if (!period.empty()) set_config_value(cfg, "period", period);
    if (threads) cfg.threads = *threads;
    if (seed) cfg.seed = *seed;
    if (restricted) cfg.restricted = true;
    if (per_scene) cfg.per_scene = true;
    validate(cfg);

    const Context ctx{cfg, out, err};
    if (label->parsed()) cmd_label(ctx);
    if (train->parsed()) cmd_train(ctx);
    if (score->parsed()) cmd_score(ctx);
    if (chg->parsed()) cmd_change(ctx);
    if (net->parsed()) cmd_network(ctx);
    if (rsk->parsed()) cmd_risk(ctx);
    if (syn->parsed()) cmd_synth(ctx, grid);
    return 0;
  } catch (const input_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const computation_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace streetrisk::cli
