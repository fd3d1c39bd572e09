#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "oracles.hpp"
#include "streetrisk/stats.hpp"

using namespace streetrisk;

TEST(stats, quantiles_match_sorted_reference) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> len(1, 40);
  std::uniform_real_distribution<double> val(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> xs(static_cast<std::size_t>(len(rng)));
    for (auto& x : xs) x = std::round(val(rng) * 2.0) / 2.0;  // plenty of ties
    for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      EXPECT_DOUBLE_EQ(stats::quantile(xs, p), oracle::type7(xs, p));
    }
  }
}

TEST(stats, median_of_odd_and_even) {
  EXPECT_DOUBLE_EQ(stats::median({1, 3, 5}), 3.0);
  EXPECT_DOUBLE_EQ(stats::median({1, 2, 3, 10}), 2.5);
  EXPECT_THROW(stats::median({}), std::invalid_argument);
}

TEST(stats, average_ranks_with_ties) {
  const std::vector<double> xs{10, 20, 20, 5};
  const auto r = stats::average_ranks(xs);
  EXPECT_EQ(r, (std::vector<double>{2.0, 3.5, 3.5, 1.0}));
}

TEST(stats, spearman_matches_rank_difference_formula) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(30), y(30);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = nd(rng);
      y[i] = 0.5 * x[i] + nd(rng);
    }
    EXPECT_NEAR(*stats::spearman(x, y), oracle::spearman_no_ties(x, y), 1e-12);
  }
}

TEST(stats, spearman_undefined_for_constant_input) {
  const std::vector<double> x{1, 1, 1}, y{1, 2, 3};
  EXPECT_FALSE(stats::spearman(x, y).has_value());
}

TEST(stats, spearman_invariant_under_monotone_transform) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 4.0);
  std::vector<double> x(100), y(100), xt(100);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = u(rng);
    y[i] = x[i] + u(rng);
    xt[i] = std::exp(3.0 * x[i]) + 7.0;
  }
  EXPECT_DOUBLE_EQ(*stats::spearman(x, y), *stats::spearman(xt, y));
}

TEST(stats, population_stddev) {
  const std::vector<double> xs{2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_DOUBLE_EQ(stats::population_stddev(xs), 2.0);
}
