#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "annotaudit/culture.hpp"
#include "annotaudit/error.hpp"

using namespace annotaudit;

namespace {

HofstedeTable small_table() {
  HofstedeTable t;
  t.rows = {{"AA", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}},
            {"BB", {0.4, 0.6, 0.3, 0.4, 0.5, 0.6}},
            {"CC", {0.9, 0.1, 0.7, 0.2, 0.3, 0.8}},
            {"DD", {0.5, 0.5, 0.5, 0.5, 0.5, 0.5}}};
  return t;
}

mrp::ConsistencyVerdict verdict(const std::string& item, const std::string& label, mrp::Classification cls,
                                std::map<std::string, double> estimates) {
  mrp::ConsistencyVerdict v;
  v.item_id = item;
  v.label_id = label;
  v.classification = cls;
  v.country_estimates = std::move(estimates);
  return v;
}

template <class F>
void expect_code(ErrorCode code, F&& f) {
  try {
    f();
    ADD_FAILURE() << "no exception";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(Culture, CdiHandComputed) {
  auto t = small_table();
  auto m = culture::cdi(t, {HofstedeDimension::PowerDistance, HofstedeDimension::Individualism});
  EXPECT_NEAR(m.at("AA", "BB"), 0.5, 1e-15);  // 3-4-5 triangle scaled by 0.1
  EXPECT_NEAR(m.at("BB", "AA"), 0.5, 1e-15);
  EXPECT_EQ(m.at("CC", "CC"), 0.0);
  auto by_name = culture::cdi(t, std::vector<std::string>{"power_distance", "individualism"});
  EXPECT_EQ(by_name.distances, m.distances);
  expect_code(ErrorCode::UnknownDimension, [&] { culture::cdi(t, std::vector<std::string>{"hierarchy"}); });
  expect_code(ErrorCode::UnknownDimension, [&] { culture::cdi(t, std::vector<HofstedeDimension>{}); });
  expect_code(ErrorCode::MissingCountry, [&] { m.at("AA", "ZZ"); });
}

TEST(Culture, CdiIsAMetric) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  HofstedeTable t;
  for (int c = 0; c < 8; ++c) {
    HofstedeRow row;
    row.country = "C" + std::to_string(c);
    for (auto& v : row.values) v = u(rng);
    t.rows.push_back(row);
  }
  auto m = culture::cdi(t, std::vector<HofstedeDimension>(kHofstedeDimensions.begin(), kHofstedeDimensions.end()));
  const auto n = m.distances.rows();
  ASSERT_EQ(n, 8);
  for (Eigen::Index i = 0; i < n; ++i) {
    EXPECT_EQ(m.distances(i, i), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      EXPECT_GE(m.distances(i, j), 0.0);
      EXPECT_EQ(m.distances(i, j), m.distances(j, i));
      for (Eigen::Index k = 0; k < n; ++k) EXPECT_LE(m.distances(i, k), m.distances(i, j) + m.distances(j, k) + 1e-12);
    }
  }
}

TEST(Culture, CdiCountrySubsetKeepsOrder) {
  auto m = culture::cdi(small_table(), {HofstedeDimension::Masculinity}, {"CC", "AA"});
  EXPECT_EQ(m.countries, (std::vector<std::string>{"CC", "AA"}));
  EXPECT_NEAR(m.distances(0, 1), 0.4, 1e-15);
}

TEST(Culture, TrendOracle) {
  std::vector<double> x = {0.1, 0.2, 0.3, 0.4}, y = {0.9, 0.7, 0.8, 0.5};
  auto t = culture::fit_trend(x, y);
  // Hand OLS: xbar 0.25, ybar 0.725, Sxy -0.055, Sxx 0.05.
  EXPECT_NEAR(t.slope, -1.1, 1e-12);
  EXPECT_NEAR(t.intercept, 1.0, 1e-12);
  EXPECT_NEAR(*t.spearman, -0.8, 1e-12);
  EXPECT_EQ(t.pairs, 4u);
  std::vector<double> flat = {0.3, 0.3, 0.3, 0.3};
  expect_code(ErrorCode::DegenerateX, [&] { culture::fit_trend(flat, y); });
}

TEST(Culture, PairSimilarityIncludesSelfPairs) {
  using C = mrp::Classification;
  std::vector<mrp::ConsistencyVerdict> v = {
      verdict("i1", "a", C::Inconsistent, {{"AA", 0.2}, {"BB", 0.7}, {"CC", 0.3}}),
      verdict("i1", "b", C::Inconsistent, {{"AA", 0.6}, {"BB", 0.4}, {"CC", 0.5}}),
      verdict("i2", "a", C::Inconsistent, {{"AA", 0.4}, {"BB", 0.2}, {"CC", 0.45}}),
      verdict("i1", "c", C::Consistent, {{"AA", 0.9}, {"BB", 0.8}, {"CC", 0.85}}),
      verdict("i2", "b", C::Consistent, {{"AA", 0.1}, {"BB", 0.2}, {"CC", 0.15}}),
      verdict("i2", "c", C::Consistent, {{"AA", 0.5}, {"BB", 0.5}, {"CC", 0.5}}),
  };
  auto sims = culture::pair_similarity(v);
  ASSERT_EQ(sims.size(), 6u);  // three self pairs and three distinct pairs
  for (const auto& s : sims) {
    if (s.country_a == s.country_b) {
      EXPECT_NEAR(*s.pearson_inconsistent, 1.0, 1e-12);
      EXPECT_NEAR(*s.pearson_consistent, 1.0, 1e-12);
    }
    EXPECT_EQ(s.n_inconsistent, 3u);
    EXPECT_EQ(s.n_consistent, 3u);
  }
  // AA vs BB inconsistent vectors, sorted by (item, label): (0.2,0.6,0.4) vs (0.7,0.4,0.2).
  auto ab = std::find_if(sims.begin(), sims.end(), [](const auto& s) { return s.country_a == "AA" && s.country_b == "BB"; });
  ASSERT_NE(ab, sims.end());
  EXPECT_NEAR(*ab->pearson_inconsistent, -0.5960395606792697, 1e-12);

  std::vector<mrp::ConsistencyVerdict> few(v.begin(), v.begin() + 4);
  few.erase(few.begin());
  few.erase(few.begin());
  expect_code(ErrorCode::InvalidArgument, [&] { culture::pair_similarity(few); });
}

TEST(Culture, TrendSkipsSelfAndNullPairs) {
  culture::CdiMatrix m;
  m.countries = {"AA", "BB", "CC"};
  m.distances.resize(3, 3);
  m.distances << 0, 0.1, 0.3, 0.1, 0, 0.2, 0.3, 0.2, 0;
  std::vector<culture::CountryPairSimilarity> sims = {
      {"AA", "AA", 1.0, 1.0, 3, 3}, {"AA", "BB", 0.9, 0.5, 3, 3}, {"AA", "CC", 0.1, 0.4, 3, 3},
      {"BB", "BB", 1.0, 1.0, 3, 3}, {"BB", "CC", 0.5, std::nullopt, 3, 3}, {"CC", "CC", 1.0, 1.0, 3, 3}};
  auto trend = culture::cdi_similarity_trend(m, sims);
  ASSERT_TRUE(trend.inconsistent);
  EXPECT_EQ(trend.inconsistent->pairs, 3u);
  EXPECT_NEAR(trend.inconsistent->slope, -4.0, 1e-12);
  ASSERT_TRUE(trend.consistent);
  EXPECT_EQ(trend.consistent->pairs, 2u);
}

TEST(Culture, LabelRankAnalysisHandExample) {
  using C = mrp::Classification;
  std::vector<mrp::ConsistencyVerdict> v = {
      verdict("i1", "a", C::Inconsistent, {{"AA", 0.9}, {"BB", 0.1}}),
      verdict("i1", "b", C::Consistent, {{"AA", 0.5}, {"BB", 0.5}}),
      verdict("i1", "c", C::Consistent, {{"AA", 0.1}, {"BB", 0.9}}),
  };
  auto r = culture::label_rank_analysis(v);
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_NEAR(*r.pairs[0].spearman, -1.0, 1e-12);
  EXPECT_NEAR(*r.min_spearman, -1.0, 1e-12);
  EXPECT_NEAR(*r.mode_spearman, -1.0, 1e-12);
  ASSERT_EQ(r.labels.size(), 3u);
  EXPECT_DOUBLE_EQ(r.labels[0].median_rank_difference, 2.0);
  EXPECT_DOUBLE_EQ(r.labels[1].median_rank_difference, 0.0);
  EXPECT_DOUBLE_EQ(*r.median_difference_inconsistent, 2.0);
  EXPECT_DOUBLE_EQ(*r.median_difference_consistent, 1.0);

  v.push_back(verdict("i1", "d", C::Consistent, {{"AA", 0.3}}));
  expect_code(ErrorCode::IncompleteRanking, [&] { culture::label_rank_analysis(v); });
}

TEST(Culture, IdenticalCountriesRankPerfectly) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<mrp::ConsistencyVerdict> v;
  for (int l = 0; l < 6; ++l) {
    double p = u(rng);
    v.push_back(verdict("i", "l" + std::to_string(l), mrp::Classification::Consistent, {{"AA", p}, {"BB", p}}));
  }
  auto r = culture::label_rank_analysis(v);
  EXPECT_NEAR(*r.min_spearman, 1.0, 1e-12);
  for (const auto& l : r.labels) EXPECT_EQ(l.median_rank_difference, 0.0);
}

namespace {

std::vector<AnnotationRecord> culture_records(const HofstedeTable& t, HofstedeDimension driver, double effect,
                                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<AnnotationRecord> out;
  int id = 0;
  for (const auto& row : t.rows) {
    for (int i = 0; i < 600; ++i) {
      AnnotationRecord r;
      r.respondent_id = "r" + std::to_string(id++);
      r.country = row.country;
      r.gender = i % 2 ? Gender::Male : Gender::Female;
      r.age_group = kAgeGroups[static_cast<std::size_t>(i / 2) % 5];
      r.item_id = i % 3 ? "i1" : "i2";
      r.label_id = "l";
      r.annotated = u(rng) < glm::logistic(effect * (row.value(driver) - 0.5));
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace

TEST(Culture, DimensionSelectionFindsDriver) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  HofstedeTable t;
  for (int c = 0; c < 10; ++c) {
    HofstedeRow row;
    row.country = "K" + std::to_string(c);
    for (auto& v : row.values) v = u(rng);
    t.rows.push_back(row);
  }
  auto records = culture_records(t, HofstedeDimension::Uncertainty, 4.0, 6);
  auto sel = culture::select_dimensions(records, t);
  ASSERT_FALSE(sel.selected.empty());
  EXPECT_EQ(sel.selected.front(), HofstedeDimension::Uncertainty);
}

TEST(Culture, DimensionSelectionDropsConstantAndCollinear) {
  HofstedeTable t;
  t.rows = {{"AA", {0.1, 0.2, 0.5, 0.3, 0.9, 0.2}},
            {"BB", {0.4, 0.8, 0.5, 0.7, 0.1, 0.8}},
            {"CC", {0.9, 0.5, 0.5, 0.2, 0.6, 0.5}},
            {"DD", {0.6, 0.1, 0.5, 0.6, 0.4, 0.1}}};
  // indulgence == individualism, masculinity constant.
  auto records = culture_records(t, HofstedeDimension::PowerDistance, 2.0, 8);
  auto sel = culture::select_dimensions(records, t);
  auto dropped = [&](HofstedeDimension d) { return std::count(sel.dropped.begin(), sel.dropped.end(), d) == 1; };
  EXPECT_TRUE(dropped(HofstedeDimension::Masculinity));
  EXPECT_TRUE(dropped(HofstedeDimension::Indulgence));
  EXPECT_FALSE(sel.notes.empty());
  for (const auto& test : sel.tests) {
    EXPECT_NE(test.dimension, HofstedeDimension::Masculinity);
    EXPECT_GE(test.wald.p_value, 0.0);
  }
}

TEST(Culture, DimensionSelectionErrors) {
  auto t = small_table();
  auto records = culture_records(t, HofstedeDimension::PowerDistance, 1.0, 1);
  std::vector<AnnotationRecord> two;
  for (const auto& r : records) {
    if (r.country == "AA" || r.country == "BB") two.push_back(r);
  }
  expect_code(ErrorCode::TooFewCountries, [&] { culture::select_dimensions(two, t); });
  HofstedeTable partial = t;
  partial.rows.pop_back();
  expect_code(ErrorCode::MissingCountry, [&] { culture::select_dimensions(records, partial); });
}
