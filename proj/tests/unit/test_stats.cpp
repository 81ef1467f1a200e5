#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "annotaudit/stats.hpp"

using namespace annotaudit;

TEST(Stats, MeanVarianceAndSd) {
  std::vector<double> x = {2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_DOUBLE_EQ(stats::mean(x), 5.0);
  EXPECT_DOUBLE_EQ(stats::population_sd(x), 2.0);
  EXPECT_NEAR(stats::variance(x), 32.0 / 7.0, 1e-12);
  std::vector<double> one = {3.0};
  EXPECT_EQ(stats::variance(one), 0.0);
}

TEST(Stats, QuantileType7) {
  std::vector<double> x = {5, 1, 3, 2, 4};
  EXPECT_DOUBLE_EQ(stats::median(x), 3.0);
  EXPECT_DOUBLE_EQ(stats::quantile(x, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(stats::quantile(x, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(stats::quantile(x, 0.25), 2.0);
  std::vector<double> even = {1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(stats::median(even), 2.5);
}

TEST(Stats, AverageRanksSplitTies) {
  std::vector<double> x = {10, 20, 20, 30};
  auto r = stats::average_ranks(x);
  EXPECT_EQ(r, (std::vector<double>{1, 2.5, 2.5, 4}));
  auto d = stats::average_ranks(x, true);
  EXPECT_EQ(d, (std::vector<double>{4, 2.5, 2.5, 1}));
}

TEST(Stats, SpearmanHandComputed) {
  std::vector<double> a = {1, 2, 3, 4}, b = {2, 1, 3, 4};
  EXPECT_NEAR(*stats::spearman(a, b), 0.8, 1e-12);
  std::vector<double> rev = {5, 4, 3, 2, 1}, fwd = {1, 2, 3, 4, 5};
  EXPECT_NEAR(*stats::spearman(fwd, rev), -1.0, 1e-12);
}

TEST(Stats, PearsonUndefinedForConstantVector) {
  std::vector<double> a = {1, 1, 1}, b = {1, 2, 3};
  EXPECT_FALSE(stats::pearson(a, b).has_value());
  std::vector<double> c = {2, 4, 6};
  EXPECT_NEAR(*stats::pearson(b, c), 1.0, 1e-12);
}

TEST(Stats, OlsRecoversLine) {
  std::vector<double> x = {0, 1, 2, 3}, y = {1, 0.7, 0.4, 0.1};
  auto fit = stats::ols(x, y);
  ASSERT_TRUE(fit);
  EXPECT_NEAR(fit->slope, -0.3, 1e-12);
  EXPECT_NEAR(fit->intercept, 1.0, 1e-12);
  std::vector<double> flat = {2, 2, 2, 2};
  EXPECT_FALSE(stats::ols(flat, y).has_value());
}

TEST(Stats, NormalFunctions) {
  EXPECT_NEAR(stats::normal_cdf(1.959963984540054), 0.975, 1e-12);
  EXPECT_NEAR(stats::normal_quantile(0.975), 1.959963984540054, 1e-9);
  EXPECT_NEAR(stats::two_sided_p(1.96), 0.05, 1e-3);
  EXPECT_DOUBLE_EQ(stats::two_sided_p(0.0), 1.0);
}

TEST(Stats, SeedMixingIsStableAndSpreads) {
  EXPECT_EQ(stats::mix_seed(1, 2), stats::mix_seed(1, 2));
  EXPECT_NE(stats::mix_seed(1, 2), stats::mix_seed(2, 1));
  EXPECT_EQ(stats::hash_string("item01|label01"), stats::hash_string("item01|label01"));
  EXPECT_NE(stats::hash_string("a"), stats::hash_string("b"));
  // FNV-1a reference value for the empty string.
  EXPECT_EQ(stats::hash_string(""), 14695981039346656037ULL);
}

TEST(Stats, ApportionLargestRemainder) {
  auto a = stats::apportion(10, {0.5, 0.3, 0.2});
  EXPECT_EQ(a, (std::vector<std::size_t>{5, 3, 2}));
  auto b = stats::apportion(3, {1, 1, 1, 1});
  EXPECT_EQ(b, (std::vector<std::size_t>{1, 1, 1, 0}));
  auto c = stats::apportion(7, {2, 1});
  EXPECT_EQ(std::accumulate(c.begin(), c.end(), std::size_t{0}), 7u);
  EXPECT_EQ(c[0], 5u);
}
