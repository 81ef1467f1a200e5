#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "annotaudit/error.hpp"
#include "annotaudit/matching.hpp"

using namespace annotaudit;

namespace {

matching::Unit unit(const std::string& id, bool treated, double age, double male, double play, double english) {
  matching::Unit u;
  u.respondent_id = id;
  u.treated = treated;
  u.covariates << age, male, play, english;
  return u;
}

std::vector<matching::Unit> random_units(std::uint64_t seed, int treated, int controls, double shift) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> age(0, 4), freq(0, 5), coin(0, 1);
  std::vector<matching::Unit> out;
  for (int i = 0; i < treated + controls; ++i) {
    bool t = i < treated;
    double a = std::min(4.0, age(rng) + (t ? shift : 0.0));
    out.push_back(unit((t ? "t" : "c") + std::to_string(i), t, a, coin(rng), freq(rng), 4 + coin(rng)));
  }
  return out;
}

AnnotationRecord respondent(const std::string& id, const std::string& lang, bool ambassador, int english_freq) {
  AnnotationRecord r;
  r.respondent_id = id;
  r.country = "DE";
  r.survey_language = lang;
  r.ambassador = ambassador;
  r.english_play_frequency = english_freq;
  r.play_frequency = 3;
  r.item_id = "i";
  r.label_id = "l";
  return r;
}

}  // namespace

TEST(Matching, MahalanobisOracle) {
  Eigen::Vector2d a(1.0, 2.0), b(3.0, 2.0);
  EXPECT_NEAR(matching::mahalanobis(a, b, Eigen::Matrix2d::Identity()), 2.0, 1e-15);
  Eigen::Matrix2d s;
  s << 4.0, 0.0, 0.0, 1.0;
  EXPECT_NEAR(matching::mahalanobis(a, b, s), 1.0, 1e-15);
  s << 2.0, 1.0, 1.0, 2.0;
  // d = (-2, 0); S^-1 = [[2,-1],[-1,2]]/3 so d'S^-1 d = 8/3.
  EXPECT_NEAR(matching::mahalanobis(a, b, s), std::sqrt(8.0 / 3.0), 1e-14);
  EXPECT_EQ(matching::mahalanobis(a, a, s), 0.0);
  EXPECT_THROW(matching::mahalanobis(a, b, -Eigen::Matrix2d::Identity()), Error);
}

TEST(Matching, StandardizedMeanDifference) {
  std::vector<double> t = {1, 2, 3}, c = {0, 1, 2};
  EXPECT_NEAR(matching::standardized_mean_difference(t, c), 1.0, 1e-15);
  EXPECT_NEAR(matching::standardized_mean_difference(c, t), -1.0, 1e-15);
  std::vector<double> k = {2, 2};
  EXPECT_EQ(matching::standardized_mean_difference(k, k), 0.0);
  EXPECT_TRUE(std::isinf(matching::standardized_mean_difference(1.0, 0.0, 0.0)));
}

TEST(Matching, SpecValidation) {
  matching::MatchSpec spec;
  EXPECT_NO_THROW(spec.validate());
  spec.caliper = 0.0;
  EXPECT_THROW(spec.validate(), Error);
  spec = {};
  spec.min_english_play_frequency = 6;
  EXPECT_THROW(spec.validate(), Error);
}

TEST(Matching, EligibilityRules) {
  std::vector<AnnotationRecord> records = {
      respondent("a", "en", true, 5),   // treated
      respondent("a", "en", true, 5),   // same respondent, second row
      respondent("b", "en", false, 5),  // English but not an ambassador
      respondent("c", "de", false, 4),  // control
      respondent("d", "de", false, 3),  // plays too rarely in English
  };
  matching::MatchSpec spec;
  auto units = matching::eligible_units(records, spec);
  ASSERT_EQ(units.size(), 2u);
  EXPECT_EQ(units[0].respondent_id, "a");
  EXPECT_TRUE(units[0].treated);
  EXPECT_FALSE(units[1].treated);

  spec.require_ambassador = false;
  units = matching::eligible_units(records, spec);
  ASSERT_EQ(units.size(), 3u);
  EXPECT_TRUE(units[1].treated);

  std::vector<AnnotationRecord> only_controls = {respondent("c", "de", false, 5)};
  try {
    matching::match(only_controls, matching::MatchSpec{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoEligibleUnits);
  }
}

TEST(Matching, PairsAreDisjointAndDeterministic) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto units = random_units(seed, 40, 120, 1.0);
    matching::MatchSpec spec;
    spec.seed = seed;
    auto a = matching::match(units, spec);
    auto b = matching::match(units, spec);
    ASSERT_EQ(a.pairs.size(), b.pairs.size());
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
      EXPECT_EQ(a.pairs[i].treated_id, b.pairs[i].treated_id);
      EXPECT_EQ(a.pairs[i].control_id, b.pairs[i].control_id);
    }
    std::set<std::string> used;
    for (const auto& p : a.pairs) {
      EXPECT_TRUE(used.insert(p.treated_id).second);
      EXPECT_TRUE(used.insert(p.control_id).second);
      EXPECT_EQ(p.treated_id[0], 't');
      EXPECT_EQ(p.control_id[0], 'c');
      EXPECT_GE(p.distance, 0.0);
    }
    EXPECT_EQ(a.pairs.size() + a.unmatched_treated, 40u);
    EXPECT_EQ(a.treated_count, 40u);
    EXPECT_EQ(a.control_count, 120u);
  }
}

TEST(Matching, ExactTwinsGiveZeroDistanceAndBalance) {
  std::vector<matching::Unit> units;
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> f(0, 5);
  for (int i = 0; i < 15; ++i) {
    double age = i % 5, male = i % 2, play = f(rng), eng = 4 + i % 2;
    units.push_back(unit("t" + std::to_string(i), true, age, male, play, eng));
    units.push_back(unit("c" + std::to_string(i), false, age, male, play, eng));
  }
  for (int i = 0; i < 15; ++i) units.push_back(unit("x" + std::to_string(i), false, 4, 0, 0, 4));
  matching::MatchSpec spec;
  spec.caliper_mode = matching::CaliperMode::Mahalanobis;
  spec.caliper = 0.5;
  auto m = matching::match(units, spec);
  ASSERT_EQ(m.pairs.size(), 15u);
  for (const auto& p : m.pairs) EXPECT_EQ(p.distance, 0.0);
  for (const auto& b : matching::balance_table(m)) EXPECT_NEAR(b.smd_after, 0.0, 1e-12) << b.covariate;
}

TEST(Matching, MatchingImprovesBalance) {
  auto units = random_units(7, 60, 300, 1.5);
  matching::MatchSpec spec;
  auto m = matching::match(units, spec);
  ASSERT_FALSE(m.pairs.empty());
  const auto& age = m.balance[0];
  EXPECT_EQ(age.covariate, "age_group");
  EXPECT_GT(age.smd_before, 0.3);
  EXPECT_LT(std::fabs(age.smd_after), std::fabs(age.smd_before));
}

TEST(Matching, LanguageEffectOracle) {
  matching::MatchedSample sample;
  std::map<std::string, bool> outcomes;
  const std::string t_out = "1111111000", c_out = "1110000000";
  for (std::size_t i = 0; i < 10; ++i) {
    std::string t = "t" + std::to_string(i), c = "c" + std::to_string(i);
    sample.pairs.push_back({i, t, c, 0.0});
    outcomes[t] = t_out[i] == '1';
    outcomes[c] = c_out[i] == '1';
  }
  sample.pairs.push_back({10, "t_missing", "c_missing", 0.0});  // skipped: no outcome
  auto e = matching::language_effect(sample, outcomes);
  EXPECT_EQ(e.pairs, 10u);
  EXPECT_NEAR(e.mean_treated, 0.7, 1e-15);
  EXPECT_NEAR(e.mean_control, 0.3, 1e-15);
  EXPECT_NEAR(e.mean_diff, 0.4, 1e-15);
  // Paired differences 0,0,0,1,1,1,1,0,0,0: sample variance 4/15, se sqrt(4/150).
  const double se = std::sqrt(4.0 / 150.0);
  EXPECT_NEAR(e.diff_ci_low, 0.4 - 1.96 * se, 1e-12);
  EXPECT_NEAR(e.diff_ci_high, 0.4 + 1.96 * se, 1e-12);
  ASSERT_TRUE(e.odds_ratio);
  EXPECT_NEAR(*e.odds_ratio, 49.0 / 9.0, 1e-7);
  EXPECT_LT(*e.or_ci_low, *e.odds_ratio);
  EXPECT_GT(*e.or_ci_high, *e.odds_ratio);
  EXPECT_GT(*e.p_value, 0.0);
  EXPECT_LT(*e.p_value, 1.0);
}

TEST(Matching, LanguageEffectDegenerateOutcomes) {
  matching::MatchedSample sample;
  std::map<std::string, bool> outcomes;
  for (std::size_t i = 0; i < 5; ++i) {
    sample.pairs.push_back({i, "t" + std::to_string(i), "c" + std::to_string(i), 0.0});
    outcomes["t" + std::to_string(i)] = true;
    outcomes["c" + std::to_string(i)] = true;
  }
  auto e = matching::language_effect(sample, outcomes);
  EXPECT_FALSE(e.odds_ratio.has_value());
  EXPECT_FALSE(e.note.empty());
  EXPECT_EQ(e.mean_diff, 0.0);

  for (std::size_t i = 0; i < 5; ++i) outcomes["c" + std::to_string(i)] = false;
  auto sep = matching::language_effect(sample, outcomes);
  EXPECT_FALSE(sep.odds_ratio.has_value());
  EXPECT_NE(sep.note.find("separation"), std::string::npos);

  sample.pairs.resize(1);
  EXPECT_THROW(matching::language_effect(sample, outcomes), Error);
}

TEST(Matching, CsvWritersProduceHeaders) {
  auto units = random_units(3, 10, 30, 0.5);
  std::map<std::string, matching::MatchedSample> samples = {{"DE", matching::match(units, matching::MatchSpec{})}};
  std::ostringstream matches, balance;
  matching::write_matches_csv(matches, samples);
  matching::write_balance_csv(balance, samples);
  EXPECT_NE(matches.str().find("treated_id"), std::string::npos);
  EXPECT_NE(balance.str().find("english_play_frequency"), std::string::npos);
}
