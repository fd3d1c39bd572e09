#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "oracles.hpp"
#include "streetrisk/change.hpp"

using namespace streetrisk;

namespace {

LocationPair make_pair(std::size_t n1, std::size_t n2, double h1, double h2,
                       AccidentKind kind = AccidentKind::pedestrian) {
  LocationPair p;
  p.kind = kind;
  p.n1 = n1;
  p.n2 = n2;
  p.h1 = h1;
  p.h2 = h2;
  return p;
}

std::vector<LocationPair> random_pairs(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> h(0.0, 1.0), v(0.0, 0.25);
  std::uniform_int_distribution<std::size_t> c(0, 6);
  std::vector<LocationPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto p = make_pair(c(rng), c(rng), h(rng), h(rng), i % 2 ? AccidentKind::vehicle : AccidentKind::pedestrian);
    p.location_id = "s" + std::to_string(i);
    p.location = {41.3 + 0.1 * h(rng), 2.1 + 0.1 * h(rng)};
    for (int k = 0; k < 4; ++k) {
      p.v1.push_back(v(rng));
      p.v2.push_back(v(rng));
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

TEST(deltas, accident_rise_and_fall) {
  EXPECT_EQ(change::deltas(make_pair(4, 10, 0.2, 0.2)).accidents, 6);
  EXPECT_EQ(change::deltas(make_pair(9, 2, 0.2, 0.2)).accidents, -7);
  EXPECT_EQ(change::deltas(make_pair(9, 2, 0.3, 0.3)).hazard, 0.0);
  EXPECT_DOUBLE_EQ(change::deltas(make_pair(0, 0, 0.25, 0.75)).hazard, 0.5);
}

TEST(rounded_percent, published_full_dataset_counts) {
  EXPECT_EQ(change::rounded_percent(18533, 30230), 61);
  EXPECT_EQ(change::rounded_percent(21842, 30230), 72);
  EXPECT_EQ(change::rounded_percent(36372, 58230), 62);
  EXPECT_EQ(change::rounded_percent(23085, 48486), 48);
  EXPECT_FALSE(change::rounded_percent(0, 0).has_value());
}

TEST(rounded_percent, half_goes_up_and_matches_floating_reference) {
  EXPECT_EQ(change::rounded_percent(1, 8), 13);  // 12.5
  EXPECT_EQ(change::rounded_percent(3, 8), 38);  // 37.5
  EXPECT_EQ(change::rounded_percent(1, 3), 33);
  EXPECT_EQ(change::rounded_percent(2, 3), 67);
  for (std::size_t base = 1; base <= 300; ++base) {
    for (std::size_t hits = 0; hits <= base; ++hits) {
      // Compare against long double where there is no exact half.
      const long double x = 100.0L * hits / base;
      if (std::abs(x - std::floor(x) - 0.5L) < 1e-9L) continue;
      ASSERT_EQ(*change::rounded_percent(hits, base), static_cast<int>(std::llround(x))) << hits << "/" << base;
    }
  }
}

TEST(agreement_report, all_increasing_is_100_percent) {
  std::vector<LocationPair> pairs{make_pair(0, 1, 0.1, 0.2), make_pair(2, 5, 0.4, 0.9)};
  const auto r = change::agreement_report(pairs);
  EXPECT_EQ(r.at(AccidentKind::pedestrian).increase_percent(), 100);
  EXPECT_FALSE(r.at(AccidentKind::pedestrian).decrease_percent().has_value());
  EXPECT_EQ(r.at(AccidentKind::vehicle).increase_base, 0u);
}

TEST(agreement_report, excludes_unchanged_pairs) {
  std::vector<LocationPair> pairs{make_pair(3, 3, 0.1, 0.9), make_pair(0, 0, 0.5, 0.1), make_pair(1, 0, 0.5, 0.4)};
  const auto& k = change::agreement_report(pairs).at(AccidentKind::pedestrian);
  EXPECT_EQ(k.increase_base, 0u);
  EXPECT_EQ(k.decrease_base, 1u);
  EXPECT_EQ(k.decrease_hits, 1u);
}

TEST(agreement_report, tolerance_semantics) {
  // Increase with a small hazard drop: counted only by the tolerant column.
  std::vector<LocationPair> pairs{make_pair(0, 2, 0.50, 0.47), make_pair(2, 0, 0.50, 0.53),
                                  make_pair(0, 2, 0.50, 0.40)};
  const auto& k = change::agreement_report(pairs, 0.05).at(AccidentKind::pedestrian);
  EXPECT_EQ(k.increase_hits, 0u);
  EXPECT_EQ(k.increase_hits_tol, 1u);
  EXPECT_EQ(k.decrease_hits, 0u);
  EXPECT_EQ(k.decrease_hits_tol, 1u);
  EXPECT_THROW(change::agreement_report({}), input_error);
  EXPECT_THROW(change::agreement_report(pairs, -0.1), input_error);
}

TEST(agreement_report, matches_brute_force_tally) {
  const auto pairs = random_pairs(9, 5000);
  for (double tol : {0.0, 0.05, 0.2}) {
    const auto r = change::agreement_report(pairs, tol);
    for (auto kind : all_kinds) {
      std::size_t ib = 0, ih = 0, iht = 0, db = 0, dh = 0, dht = 0;
      for (const auto& p : pairs) {
        if (p.kind != kind) continue;
        const double dH = p.h2 - p.h1;
        if (p.n2 > p.n1) {
          ++ib;
          ih += dH > 0;
          iht += dH > -tol;
        }
        if (p.n2 < p.n1) {
          ++db;
          dh += dH < 0;
          dht += dH < tol;
        }
      }
      const auto& k = r.at(kind);
      EXPECT_EQ(k.increase_base, ib);
      EXPECT_EQ(k.increase_hits, ih);
      EXPECT_EQ(k.increase_hits_tol, iht);
      EXPECT_EQ(k.decrease_base, db);
      EXPECT_EQ(k.decrease_hits, dh);
      EXPECT_EQ(k.decrease_hits_tol, dht);
      EXPECT_GE(k.increase_hits_tol, k.increase_hits);
      EXPECT_GE(k.decrease_hits_tol, k.decrease_hits);
    }
  }
}

TEST(agreement_report, zero_tolerance_equals_strict) {
  const auto pairs = random_pairs(10, 2000);
  const auto r = change::agreement_report(pairs, 0.0);
  for (auto kind : all_kinds) {
    EXPECT_EQ(r.at(kind).increase_hits, r.at(kind).increase_hits_tol);
    EXPECT_EQ(r.at(kind).decrease_hits, r.at(kind).decrease_hits_tol);
  }
}

TEST(agreement_report, json_layout) {
  std::vector<LocationPair> pairs{make_pair(0, 1, 0.1, 0.2), make_pair(2, 0, 0.4, 0.3, AccidentKind::vehicle)};
  const auto j = change::to_json(change::agreement_report(pairs));
  EXPECT_EQ(j.at("P").at("incr_acc").get<std::size_t>(), 1u);
  EXPECT_EQ(j.at("P").at("incr_acc_incr_hzrd").at("percent").get<int>(), 100);
  EXPECT_EQ(j.at("V").at("decr_acc_decr_hzrd_tol").at("count").get<std::size_t>(), 1u);
}

TEST(hexbin, single_pair_and_cancelling_pair) {
  std::vector<LocationPair> one{make_pair(1, 4, 0.3, 0.3)};
  auto g = change::hexbin(one);
  ASSERT_EQ(g.bins.size(), 1u);
  EXPECT_EQ(g.bins[0].mean_delta_accidents, 3.0);

  std::vector<LocationPair> two{make_pair(0, 2, 0.3, 0.3), make_pair(2, 0, 0.301, 0.299)};
  g = change::hexbin(two);
  ASSERT_EQ(g.bins.size(), 1u);
  EXPECT_EQ(g.bins[0].count, 2u);
  EXPECT_EQ(g.bins[0].mean_delta_accidents, 0.0);
  EXPECT_THROW(change::hexbin(two, 0.0), input_error);
}

TEST(hexbin, assignment_matches_nearest_center_search) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double size : {0.05, 0.13}) {
    for (int t = 0; t < 3000; ++t) {
      const double x = u(rng), y = u(rng);
      const auto h = change::hex_of(x, y, size);
      const auto [q, r] = oracle::nearest_hex(x, y, size, 30);
      // Exact ties between centers are measure-zero; compare distances to be safe.
      const auto [cx, cy] = change::hex_center(h, size);
      const double sq3 = std::sqrt(3.0);
      const double ox = size * sq3 * (q + r / 2.0), oy = size * 1.5 * r;
      EXPECT_NEAR(std::hypot(x - cx, y - cy), std::hypot(x - ox, y - oy), 1e-12);
    }
  }
}

TEST(hexbin, counts_sum_to_pairs_and_centers_on_lattice) {
  const auto pairs = random_pairs(3, 4000);
  const auto g = change::hexbin(pairs, 0.05);
  std::size_t total = 0;
  long long delta_sum = 0;
  for (const auto& b : g.bins) {
    total += b.count;
    delta_sum += std::llround(b.mean_delta_accidents * static_cast<double>(b.count));
    // center = q * a1 + r * a2 with a1 = (sqrt3 s, 0), a2 = (sqrt3 s / 2, 1.5 s)
    const double r = b.center_y / (1.5 * 0.05);
    const double q = b.center_x / (std::sqrt(3.0) * 0.05) - r / 2.0;
    EXPECT_NEAR(r, std::round(r), 1e-9);
    EXPECT_NEAR(q, std::round(q), 1e-9);
  }
  EXPECT_EQ(total, pairs.size());
  long long expected = 0;
  for (const auto& p : pairs) expected += change::deltas(p).accidents;
  EXPECT_EQ(delta_sum, expected);
  for (std::size_t i = 1; i < g.bins.size(); ++i) EXPECT_LT(g.bins[i - 1].coord, g.bins[i].coord);
}

TEST(grouped_count_stats, small_group) {
  std::vector<LocationPair> pairs{make_pair(1, 2, 0, 0), make_pair(5, 2, 0, 0), make_pair(3, 2, 0, 0),
                                  make_pair(7, 0, 0, 0)};
  const auto g = change::grouped_count_stats(pairs);
  ASSERT_EQ(g.size(), 2u);  // n2 = 1 absent
  EXPECT_EQ(g[0].n2, 0u);
  EXPECT_EQ(g[1].n2, 2u);
  EXPECT_EQ(g[1].median, 3.0);
  EXPECT_EQ(g[1].size, 3u);
  EXPECT_EQ(g[1].q1, 2.0);
  EXPECT_EQ(g[1].q3, 4.0);
}

TEST(grouped_count_stats, matches_sort_and_index_reference) {
  const auto pairs = random_pairs(4, 3000);
  for (const auto& g : change::grouped_count_stats(pairs)) {
    std::vector<double> xs;
    for (const auto& p : pairs)
      if (p.n2 == g.n2) xs.push_back(static_cast<double>(p.n1));
    EXPECT_EQ(g.size, xs.size());
    EXPECT_DOUBLE_EQ(g.q1, oracle::type7(xs, 0.25));
    EXPECT_DOUBLE_EQ(g.median, oracle::type7(xs, 0.5));
    EXPECT_DOUBLE_EQ(g.q3, oracle::type7(xs, 0.75));
  }
}

TEST(threshold_median_change, no_change_and_omitted_thresholds) {
  std::vector<LocationPair> pairs{make_pair(1, 1, 0, 0), make_pair(3, 3, 0, 0)};
  const auto t = change::threshold_median_change(pairs);
  ASSERT_EQ(t.size(), 4u);  // x = 0..3
  for (const auto& e : t) EXPECT_EQ(e.median_delta, 0.0);
  EXPECT_EQ(t.back().threshold, 3u);
  EXPECT_EQ(t.back().count, 1u);
}

TEST(threshold_median_change, matches_filter_and_median) {
  const auto pairs = random_pairs(6, 2500);
  for (const auto& e : change::threshold_median_change(pairs)) {
    std::vector<double> xs;
    for (const auto& p : pairs)
      if (p.n2 >= e.threshold) xs.push_back(static_cast<double>(p.n2) - static_cast<double>(p.n1));
    EXPECT_EQ(e.count, xs.size());
    EXPECT_DOUBLE_EQ(e.median_delta, oracle::type7(xs, 0.5));
  }
}

TEST(occupancy_differential, single_pair) {
  auto p = make_pair(1, 3, 0, 0);
  p.v1 = {0.1, 0.1};
  p.v2 = {0.3, 0.1};
  std::vector<LocationPair> pairs{p};
  const auto d = change::occupancy_differential(pairs);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_NEAR(d[0], 0.2, 1e-15);
  EXPECT_EQ(d[1], 0.0);
}

TEST(occupancy_differential, swapping_counts_negates) {
  auto pairs = random_pairs(7, 500);
  const auto a = change::occupancy_differential(pairs);
  for (auto& p : pairs) std::swap(p.n1, p.n2);
  const auto b = change::occupancy_differential(pairs);
  for (std::size_t c = 0; c < a.size(); ++c) EXPECT_NEAR(a[c], -b[c], 1e-15);
}

TEST(occupancy_differential, matches_per_category_loop) {
  const auto pairs = random_pairs(8, 1500);
  const auto d = change::occupancy_differential(pairs);
  for (std::size_t c = 0; c < 4; ++c) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& p : pairs) {
      if (p.n1 == p.n2) continue;
      s += p.n2 > p.n1 ? p.v2[c] - p.v1[c] : p.v1[c] - p.v2[c];
      ++n;
    }
    EXPECT_NEAR(d[c], s / static_cast<double>(n), 1e-12);
  }
}

TEST(occupancy_differential, no_qualifying_pairs_is_an_error) {
  std::vector<LocationPair> pairs{make_pair(2, 2, 0, 0)};
  EXPECT_THROW(change::occupancy_differential(pairs), computation_error);
}

namespace {

ingest::Neighborhood square_hood(std::string name, double lat0, double lon0, double side) {
  return {std::move(name),
          {geo::Polygon({{lat0, lon0}, {lat0, lon0 + side}, {lat0 + side, lon0 + side}, {lat0 + side, lon0}})}};
}

}  // namespace

TEST(neighborhood_mean_change, mean_and_unassigned) {
  std::vector<ingest::Neighborhood> hoods{square_hood("A", 41.0, 2.0, 0.1)};
  auto a = make_pair(0, 1, 0, 0), b = make_pair(1, 0, 0, 0), c = make_pair(0, 4, 0, 0);
  a.location = {41.05, 2.05};
  b.location = {41.02, 2.08};
  c.location = {42.0, 2.05};
  std::vector<LocationPair> pairs{a, b, c};
  const auto r = change::neighborhood_mean_change(pairs, hoods);
  ASSERT_EQ(r.neighborhoods.size(), 1u);
  EXPECT_EQ(r.neighborhoods[0].count, 2u);
  EXPECT_EQ(r.neighborhoods[0].mean_delta, 0.0);
  EXPECT_EQ(r.unassigned, 1u);
  EXPECT_EQ(r.unassigned_mean_delta, 4.0);
}

TEST(neighborhood_mean_change, first_polygon_wins_and_matches_winding_oracle) {
  std::vector<ingest::Neighborhood> hoods{square_hood("A", 41.3, 2.1, 0.05), square_hood("B", 41.33, 2.13, 0.05),
                                          square_hood("C", 41.36, 2.16, 0.03)};
  const auto pairs = random_pairs(11, 3000);
  const auto r = change::neighborhood_mean_change(pairs, hoods);
  std::vector<std::size_t> counts(hoods.size(), 0);
  std::vector<long long> sums(hoods.size(), 0);
  std::size_t unassigned = 0;
  for (const auto& p : pairs) {
    bool placed = false;
    for (std::size_t h = 0; h < hoods.size() && !placed; ++h) {
      std::vector<std::pair<double, double>> ring;
      for (const auto& v : hoods[h].parts[0].ring()) ring.emplace_back(v.lon, v.lat);
      if (oracle::winding_number(p.location.lon, p.location.lat, ring) != 0) {
        ++counts[h];
        sums[h] += change::deltas(p).accidents;
        placed = true;
      }
    }
    unassigned += placed ? 0 : 1;
  }
  for (std::size_t h = 0; h < hoods.size(); ++h) {
    EXPECT_EQ(r.neighborhoods[h].count, counts[h]) << hoods[h].name;
    if (counts[h]) {
      EXPECT_DOUBLE_EQ(*r.neighborhoods[h].mean_delta, static_cast<double>(sums[h]) / counts[h]);
    }
  }
  EXPECT_EQ(r.unassigned, unassigned);
}

TEST(build_pairs, joins_periods_and_scores) {
  ingest::SceneTable scenes;
  scenes.feature_names = {"road"};
  scenes.scenes = {{"a", {41.0, 2.0}, Period::p1, {0.1}}, {"a", {41.0, 2.0}, Period::p2, {0.9}},
                   {"b", {41.1, 2.0}, Period::p1, {0.5}}};
  std::vector<ingest::LabeledSample> labels{{"a", Period::p1, AccidentKind::vehicle, 4, ingest::Label::dangerous},
                                            {"a", Period::p2, AccidentKind::vehicle, 10, ingest::Label::dangerous},
                                            {"b", Period::p1, AccidentKind::vehicle, 0, ingest::Label::safe}};
  hazard::HazardModel m;
  m.kind = AccidentKind::vehicle;
  m.feature_names = {"road"};
  m.weights = {2.0};
  m.bias = -1.0;
  const auto pairs = change::build_pairs(scenes, labels, m);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].location_id, "a");
  EXPECT_EQ(change::deltas(pairs[0]).accidents, 6);
  EXPECT_NEAR(pairs[0].h1, 1.0 / (1.0 + std::exp(0.8)), 1e-12);
  EXPECT_NEAR(pairs[0].h2, 1.0 / (1.0 + std::exp(-0.8)), 1e-12);
  m.feature_names = {"building"};
  EXPECT_THROW(change::build_pairs(scenes, labels, m), input_error);
}
