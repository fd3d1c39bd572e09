#pragma once

// Undirected sidewalk/road graphs, gravity-model trip distribution,
// demand-weighted edge betweenness and closeness centrality.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "streetrisk/csv.hpp"
#include "streetrisk/error.hpp"
#include "streetrisk/geo.hpp"
#include "streetrisk/parallel.hpp"

namespace streetrisk::network {

inline constexpr double default_decay_m = 500.0;
// Accumulated path weights closer than this are treated as equal.
inline constexpr double path_tie_tolerance = 1e-9;

struct Node {
  std::string id;
  geo::GeoPoint location;
  double population = 0.0;
  double poi_mass = 0.0;
};

struct Edge {
  std::string id;
  std::size_t u = 0;
  std::size_t v = 0;
  double length_m = 0.0;
  std::optional<double> speed_mps;
  std::vector<geo::GeoPoint> geometry;  // empty: straight segment between endpoints
};

struct Arc {
  std::size_t to;
  std::size_t edge;
};

class Network {
 public:
  Network() = default;

  Network(std::vector<Node> nodes, std::vector<Edge> edges)
      : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (!node_index_.emplace(n.id, i).second) throw input_error("duplicate node id '" + n.id + "'");
      if (!geo::is_valid(n.location)) throw input_error("node '" + n.id + "' has invalid coordinates");
      if (!(n.population >= 0.0) || !(n.poi_mass >= 0.0) || !std::isfinite(n.population) ||
          !std::isfinite(n.poi_mass)) {
        throw input_error("node '" + n.id + "' has negative or non-finite mass");
      }
    }
    std::unordered_map<std::string, std::size_t> edge_ids;
    adjacency_.resize(nodes_.size());
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto& edge = edges_[e];
      if (!edge_ids.emplace(edge.id, e).second) throw input_error("duplicate edge id '" + edge.id + "'");
      if (edge.u >= nodes_.size() || edge.v >= nodes_.size()) {
        throw input_error("edge '" + edge.id + "' references a missing node");
      }
      if (!(edge.length_m > 0.0) || !std::isfinite(edge.length_m)) {
        throw input_error("edge '" + edge.id + "' has nonpositive length");
      }
      if (edge.speed_mps && (!(*edge.speed_mps > 0.0) || !std::isfinite(*edge.speed_mps))) {
        throw input_error("edge '" + edge.id + "' has nonpositive speed");
      }
      adjacency_[edge.u].push_back({edge.v, e});
      if (edge.v != edge.u) adjacency_[edge.v].push_back({edge.u, e});
    }
  }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const Arc> arcs(std::size_t node) const { return adjacency_[node]; }

  std::optional<std::size_t> node_index(const std::string& id) const {
    auto it = node_index_.find(id);
    if (it == node_index_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<geo::GeoPoint> edge_geometry(std::size_t e) const {
    const auto& edge = edges_[e];
    if (!edge.geometry.empty()) return edge.geometry;
    return {nodes_[edge.u].location, nodes_[edge.v].location};
  }

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Arc>> adjacency_;
  std::unordered_map<std::string, std::size_t> node_index_;
};

// Nodes CSV: node_id, lat, lon[, population][, poi_mass].
// Edges CSV: edge_id, u, v[, length_m][, speed_mps]. An empty or absent
// length is computed from the endpoint coordinates.
inline Network load_network_csv(std::istream& nodes_in, std::istream& edges_in,
                                const std::string& nodes_source = "nodes",
                                const std::string& edges_source = "edges") {
  const auto nt = csv::read(nodes_in, nodes_source);
  const auto c_id = nt.require_column("node_id", nodes_source);
  const auto c_lat = nt.require_column("lat", nodes_source);
  const auto c_lon = nt.require_column("lon", nodes_source);
  const auto c_pop = nt.column("population");
  const auto c_poi = nt.column("poi_mass");
  auto row_error = [](const std::string& source, std::size_t line, const std::string& msg) {
    return input_error(source + ":" + std::to_string(line) + ": " + msg);
  };
  auto number = [&](const csv::Row& row, std::optional<std::size_t> col, const std::string& source,
                    double fallback) {
    if (!col || row.fields[*col].empty()) return fallback;
    auto v = csv::parse_double(row.fields[*col]);
    if (!v) throw row_error(source, row.line, "unparseable number '" + row.fields[*col] + "'");
    return *v;
  };

  std::vector<Node> nodes;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& row : nt.rows) {
    if (row.fields.size() != nt.header.size()) throw row_error(nodes_source, row.line, "wrong field count");
    Node n;
    n.id = row.fields[c_id];
    auto lat = csv::parse_double(row.fields[c_lat]);
    auto lon = csv::parse_double(row.fields[c_lon]);
    if (!lat || !lon) throw row_error(nodes_source, row.line, "unparseable coordinate");
    n.location = geo::GeoPoint{*lat, *lon};
    n.population = number(row, c_pop, nodes_source, 0.0);
    n.poi_mass = number(row, c_poi, nodes_source, 0.0);
    index.emplace(n.id, nodes.size());
    nodes.push_back(std::move(n));
  }

  const auto et = csv::read(edges_in, edges_source);
  const auto c_eid = et.require_column("edge_id", edges_source);
  const auto c_u = et.require_column("u", edges_source);
  const auto c_v = et.require_column("v", edges_source);
  const auto c_len = et.column("length_m");
  const auto c_speed = et.column("speed_mps");
  std::vector<Edge> edges;
  for (const auto& row : et.rows) {
    if (row.fields.size() != et.header.size()) throw row_error(edges_source, row.line, "wrong field count");
    Edge e;
    e.id = row.fields[c_eid];
    for (auto [col, slot] : {std::pair{c_u, &e.u}, std::pair{c_v, &e.v}}) {
      auto it = index.find(row.fields[col]);
      if (it == index.end()) {
        throw input_error("edge '" + e.id + "' references missing node '" + row.fields[col] + "'");
      }
      *slot = it->second;
    }
    const double computed = geo::haversine_distance(nodes[e.u].location, nodes[e.v].location);
    e.length_m = number(row, c_len, edges_source, computed);
    if (c_speed && !row.fields[*c_speed].empty()) e.speed_mps = number(row, c_speed, edges_source, 0.0);
    edges.push_back(std::move(e));
  }
  return Network(std::move(nodes), std::move(edges));
}

inline Network load_network_csv(const std::string& nodes_path, const std::string& edges_path) {
  std::ifstream nodes_in(nodes_path);
  if (!nodes_in) throw input_error("cannot open " + nodes_path);
  std::ifstream edges_in(edges_path);
  if (!edges_in) throw input_error("cannot open " + edges_path);
  return load_network_csv(nodes_in, edges_in, nodes_path, edges_path);
}

// GeoJSON FeatureCollection. Point features are nodes (properties: id,
// population, poi_mass). LineString features are edges (properties: id and
// optionally u, v, length_m, speed_mps). Without u/v an edge endpoint joins
// the node at exactly the same coordinates, or creates a new one.
inline Network load_network_geojson(std::istream& in, const std::string& source = "network") {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw input_error(source + ": " + e.what());
  }
  std::vector<Node> nodes;
  std::unordered_map<std::string, std::size_t> by_id;
  std::map<std::pair<double, double>, std::size_t> by_coord;
  std::vector<Edge> edges;
  auto add_node = [&](Node n) {
    if (by_id.count(n.id)) throw input_error(source + ": duplicate node id '" + n.id + "'");
    by_id.emplace(n.id, nodes.size());
    by_coord.emplace(std::pair(n.location.lat, n.location.lon), nodes.size());
    nodes.push_back(std::move(n));
    return nodes.size() - 1;
  };
  auto point_of = [](const nlohmann::json& c) {
    return geo::make_point(c.at(1).get<double>(), c.at(0).get<double>());
  };
  try {
    const auto& features = doc.at("features");
    for (const auto& f : features) {
      if (f.at("geometry").at("type") != "Point") continue;
      const auto& props = f.value("properties", nlohmann::json::object());
      Node n;
      n.location = point_of(f.at("geometry").at("coordinates"));
      n.id = props.contains("id") ? props.at("id").dump() : "n" + std::to_string(nodes.size());
      if (props.contains("id") && props.at("id").is_string()) n.id = props.at("id").get<std::string>();
      n.population = props.value("population", 0.0);
      n.poi_mass = props.value("poi_mass", 0.0);
      add_node(std::move(n));
    }
    std::size_t auto_edge = 0;
    for (const auto& f : features) {
      if (f.at("geometry").at("type") != "LineString") continue;
      const auto& props = f.value("properties", nlohmann::json::object());
      Edge e;
      if (props.contains("id")) {
        e.id = props.at("id").is_string() ? props.at("id").get<std::string>() : props.at("id").dump();
      } else {
        e.id = "e" + std::to_string(auto_edge);
      }
      ++auto_edge;
      for (const auto& c : f.at("geometry").at("coordinates")) e.geometry.push_back(point_of(c));
      if (e.geometry.size() < 2) throw input_error("edge '" + e.id + "' has fewer than 2 vertices");
      auto endpoint = [&](const char* key, const geo::GeoPoint& p) -> std::size_t {
        if (props.contains(key)) {
          const auto& v = props.at(key);
          const std::string id = v.is_string() ? v.get<std::string>() : v.dump();
          auto it = by_id.find(id);
          if (it == by_id.end()) {
            throw input_error("edge '" + e.id + "' references missing node '" + id + "'");
          }
          return it->second;
        }
        auto it = by_coord.find({p.lat, p.lon});
        if (it != by_coord.end()) return it->second;
        return add_node(Node{"n" + std::to_string(nodes.size()), p, 0.0, 0.0});
      };
      e.u = endpoint("u", e.geometry.front());
      e.v = endpoint("v", e.geometry.back());
      e.length_m = props.contains("length_m") ? props.at("length_m").get<double>()
                                              : geo::polyline_length(e.geometry);
      if (props.contains("speed_mps") && !props.at("speed_mps").is_null()) {
        e.speed_mps = props.at("speed_mps").get<double>();
      }
      edges.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw input_error(source + ": " + e.what());
  }
  return Network(std::move(nodes), std::move(edges));
}

inline Network load_network_geojson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open " + path);
  return load_network_geojson(in, path);
}

enum class WeightMode { distance, time };

// Per-edge traversal cost: meters, or seconds (length / speed).
inline std::vector<double> traversal_weights(const Network& net, WeightMode mode) {
  std::vector<double> w(net.edge_count());
  std::vector<std::string> missing;
  for (std::size_t e = 0; e < net.edge_count(); ++e) {
    const auto& edge = net.edges()[e];
    if (mode == WeightMode::distance) {
      w[e] = edge.length_m;
    } else if (!edge.speed_mps) {
      missing.push_back(edge.id);
    } else {
      w[e] = edge.length_m / *edge.speed_mps;
    }
  }
  if (!missing.empty()) {
    std::string msg = "time weighting needs speed_mps; missing on " + std::to_string(missing.size()) +
                      " edge(s):";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ...";
    throw input_error(msg);
  }
  return w;
}

inline void check_weights(const Network& net, std::span<const double> weights) {
  if (weights.size() != net.edge_count()) throw input_error("weight vector size does not match edges");
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw input_error("edge weights must be positive and finite");
  }
}

struct ODEntry {
  std::size_t destination;
  double trips;
};

// Sparse trip demand, one row per origin sorted by destination.
class ODMatrix {
 public:
  explicit ODMatrix(std::size_t node_count = 0) : rows_(node_count) {}

  std::size_t node_count() const { return rows_.size(); }

  void set(std::size_t origin, std::size_t destination, double trips) {
    if (origin >= rows_.size() || destination >= rows_.size()) throw input_error("OD index out of range");
    if (origin == destination) throw input_error("OD matrix cannot hold self-demand");
    if (!(trips >= 0.0) || !std::isfinite(trips)) throw input_error("OD entries must be finite and >= 0");
    auto& row = rows_[origin];
    auto it = std::lower_bound(row.begin(), row.end(), destination,
                               [](const ODEntry& e, std::size_t d) { return e.destination < d; });
    if (it != row.end() && it->destination == destination) {
      it->trips = trips;
    } else {
      row.insert(it, ODEntry{destination, trips});
    }
  }

  double get(std::size_t origin, std::size_t destination) const {
    const auto& row = rows_.at(origin);
    auto it = std::lower_bound(row.begin(), row.end(), destination,
                               [](const ODEntry& e, std::size_t d) { return e.destination < d; });
    return (it != row.end() && it->destination == destination) ? it->trips : 0.0;
  }

  std::span<const ODEntry> row(std::size_t origin) const { return rows_.at(origin); }

  std::size_t entry_count() const {
    std::size_t n = 0;
    for (const auto& r : rows_) n += r.size();
    return n;
  }

  double row_total(std::size_t origin) const {
    double s = 0.0;
    for (const auto& e : rows_.at(origin)) s += e.trips;
    return s;
  }

 private:
  std::vector<std::vector<ODEntry>> rows_;
};

inline ODMatrix uniform_od(const Network& net, double value = 1.0) {
  ODMatrix od(net.node_count());
  for (std::size_t i = 0; i < net.node_count(); ++i) {
    for (std::size_t j = 0; j < net.node_count(); ++j) {
      if (i != j) od.set(i, j, value);
    }
  }
  return od;
}

// Single-source Dijkstra; unreachable nodes are +inf.
inline std::vector<double> shortest_distances(const Network& net, std::span<const double> weights,
                                              std::size_t source) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(net.node_count(), inf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[v]) continue;
    for (const auto& arc : net.arcs(v)) {
      const double nd = d + weights[arc.edge];
      if (nd < dist[arc.to]) {
        dist[arc.to] = nd;
        heap.emplace(nd, arc.to);
      }
    }
  }
  return dist;
}

struct GravityResult {
  ODMatrix od;
  std::vector<std::size_t> dropped_origins;  // had trips but no reachable positive-mass destination
  double dropped_trips = 0.0;
};

// Trips T_i = total * pop_i / sum(pop) leave each origin and split over
// reachable destinations j != i in proportion to poi_j * exp(-d_ij / decay),
// d_ij being the shortest-path length in meters.
inline GravityResult gravity_od(const Network& net, double decay_m, double total_trips,
                                unsigned threads = 1) {
  if (!(decay_m > 0.0)) throw input_error("gravity_od: decay length must be positive");
  if (!(total_trips >= 0.0) || !std::isfinite(total_trips)) {
    throw input_error("gravity_od: total trips must be finite and >= 0");
  }
  double pop_sum = 0.0;
  bool any_poi = false;
  for (const auto& n : net.nodes()) {
    pop_sum += n.population;
    any_poi = any_poi || n.poi_mass > 0.0;
  }
  if (!(pop_sum > 0.0)) throw input_error("gravity_od: no node has positive population");
  if (!any_poi) throw input_error("gravity_od: no node has positive POI mass");

  const auto lengths = traversal_weights(net, WeightMode::distance);
  const std::size_t n = net.node_count();
  std::vector<std::vector<ODEntry>> rows(n);
  std::vector<char> dropped(n, 0);
  parallel_for(n, threads, [&](std::size_t i) {
    const double trips = total_trips * net.nodes()[i].population / pop_sum;
    if (!(trips > 0.0)) return;
    const auto dist = shortest_distances(net, lengths, i);
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && std::isfinite(dist[j]) && net.nodes()[j].poi_mass > 0.0) dmin = std::min(dmin, dist[j]);
    }
    if (!std::isfinite(dmin)) {
      dropped[i] = 1;
      return;
    }
    std::vector<ODEntry> row;
    double total_weight = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !std::isfinite(dist[j]) || !(net.nodes()[j].poi_mass > 0.0)) continue;
      const double w = net.nodes()[j].poi_mass * std::exp(-(dist[j] - dmin) / decay_m);
      row.push_back({j, w});
      total_weight += w;
    }
    for (auto& e : row) e.trips = trips * e.trips / total_weight;
    rows[i] = std::move(row);
  });

  GravityResult result{ODMatrix(n), {}, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& e : rows[i]) result.od.set(i, e.destination, e.trips);
    if (dropped[i]) {
      result.dropped_origins.push_back(i);
      result.dropped_trips += total_trips * net.nodes()[i].population / pop_sum;
    }
  }
  return result;
}

// Per-edge values indexed like Network::edges().
struct EdgeCentrality {
  std::vector<double> values;
};

namespace detail {

// Adds source s's demand-weighted dependencies to `scores` (Brandes
// accumulation over the shortest-path DAG, ties within path_tie_tolerance).
inline void accumulate_source(const Network& net, std::span<const double> weights,
                              const ODMatrix& od, std::size_t s, std::vector<double>& scores) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t n = net.node_count();
  std::vector<double> dist(n, inf);
  std::vector<double> sigma(n, 0.0);
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> preds(n);  // (node, edge)
  std::vector<char> settled(n, 0);
  std::vector<std::size_t> order;
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[s] = 0.0;
  sigma[s] = 1.0;
  heap.emplace(0.0, s);
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (settled[v] || d > dist[v]) continue;
    settled[v] = 1;
    order.push_back(v);
    for (const auto& arc : net.arcs(v)) {
      const std::size_t w = arc.to;
      if (settled[w]) continue;
      const double nd = dist[v] + weights[arc.edge];
      if (nd < dist[w] - path_tie_tolerance) {
        dist[w] = nd;
        sigma[w] = sigma[v];
        preds[w].assign(1, {v, arc.edge});
        heap.emplace(nd, w);
      } else if (std::abs(nd - dist[w]) <= path_tie_tolerance) {
        sigma[w] += sigma[v];
        preds[w].push_back({v, arc.edge});
        if (nd < dist[w]) {
          dist[w] = nd;
          heap.emplace(nd, w);
        }
      }
    }
  }
  std::vector<double> demand(n, 0.0);
  for (const auto& e : od.row(s)) demand[e.destination] = e.trips;
  std::vector<double> delta(n, 0.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::size_t w = *it;
    if (w == s) continue;
    const double flow = demand[w] + delta[w];
    if (flow == 0.0) continue;
    for (const auto& [v, edge] : preds[w]) {
      const double c = sigma[v] / sigma[w] * flow;
      scores[edge] += c;
      delta[v] += c;
    }
  }
}

}  // namespace detail

// E_e = sum over s != t of o_st * sigma_st(e) / sigma_st. Sources are grouped
// in fixed blocks whose partial sums are combined in block order, so the
// result is bit-identical for any thread count.
inline EdgeCentrality od_edge_betweenness(const Network& net, const ODMatrix& od,
                                          std::span<const double> weights, unsigned threads = 1) {
  check_weights(net, weights);
  if (od.node_count() != net.node_count()) throw input_error("OD matrix size does not match network");
  constexpr std::size_t block = 32;
  const std::size_t n = net.node_count();
  const std::size_t blocks = (n + block - 1) / block;
  std::vector<std::vector<double>> partial(blocks);
  parallel_for(blocks, threads, [&](std::size_t b) {
    std::vector<double> scores(net.edge_count(), 0.0);
    for (std::size_t s = b * block; s < std::min(n, (b + 1) * block); ++s) {
      bool any = false;
      for (const auto& e : od.row(s)) any = any || e.trips > 0.0;
      if (any) detail::accumulate_source(net, weights, od, s, scores);
    }
    partial[b] = std::move(scores);
  });
  EdgeCentrality out{std::vector<double>(net.edge_count(), 0.0)};
  for (const auto& p : partial) {
    for (std::size_t e = 0; e < p.size(); ++e) out.values[e] += p[e];
  }
  return out;
}

// Closeness with the Wasserman-Faust correction for disconnected graphs:
// ((s-1)/(n-1)) * (s-1)/sum_v d(u,v), s the size of u's component.
inline std::vector<double> node_closeness(const Network& net, std::span<const double> weights,
                                          unsigned threads = 1) {
  check_weights(net, weights);
  const std::size_t n = net.node_count();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  parallel_for(n, threads, [&](std::size_t u) {
    const auto dist = shortest_distances(net, weights, u);
    double total = 0.0;
    std::size_t reached = 0;
    for (std::size_t v = 0; v < n; ++v) {
      if (v != u && std::isfinite(dist[v])) {
        total += dist[v];
        ++reached;
      }
    }
    if (reached == 0 || total <= 0.0) return;
    const double r = static_cast<double>(reached);
    out[u] = (r / static_cast<double>(n - 1)) * (r / total);
  });
  return out;
}

inline EdgeCentrality edge_closeness(const Network& net, std::span<const double> node_values) {
  if (node_values.size() != net.node_count()) throw input_error("node closeness size mismatch");
  EdgeCentrality out{std::vector<double>(net.edge_count())};
  for (std::size_t e = 0; e < net.edge_count(); ++e) {
    const auto& edge = net.edges()[e];
    out.values[e] = (node_values[edge.u] + node_values[edge.v]) / 2.0;
  }
  return out;
}

inline EdgeCentrality edge_closeness(const Network& net, std::span<const double> weights,
                                     unsigned threads) {
  const auto nodes = node_closeness(net, weights, threads);
  return edge_closeness(net, nodes);
}

}  // namespace streetrisk::network
