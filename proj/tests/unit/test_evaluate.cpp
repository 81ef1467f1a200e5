#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "annotaudit/error.hpp"
#include "annotaudit/evaluate.hpp"

using namespace annotaudit;
using evaluate::Confusion;

namespace {

// Countries disagree on label "split" and agree on label "shared".
const std::map<std::string, double> kSplitRate = {{"US", 0.6}, {"AA", 0.05}, {"BB", 0.1}, {"CC", 0.95}, {"DD", 0.9}};

std::vector<AnnotationRecord> population(std::uint64_t seed, int per_country) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<AnnotationRecord> out;
  for (const auto& [country, rate] : kSplitRate) {
    for (int i = 0; i < per_country; ++i) {
      for (const char* label : {"split", "shared"}) {
        AnnotationRecord r;
        r.respondent_id = country + "-" + std::to_string(i);
        r.country = country;
        r.gender = i % 2 ? Gender::Male : Gender::Female;
        r.age_group = kAgeGroups[static_cast<std::size_t>(i) % 5];
        r.item_id = "item";
        r.label_id = label;
        r.annotated = u(rng) < (std::string(label) == "split" ? rate : 0.9);
        out.push_back(r);
      }
    }
  }
  return out;
}

std::vector<mrp::ConsistencyVerdict> verdicts() {
  mrp::ConsistencyVerdict a, b;
  a.item_id = b.item_id = "item";
  a.label_id = "split";
  a.classification = mrp::Classification::Inconsistent;
  b.label_id = "shared";
  b.classification = mrp::Classification::Consistent;
  return {a, b};
}

AnnotationRecord row(const std::string& country, const std::string& label, bool annotated) {
  AnnotationRecord r;
  r.respondent_id = country + label;
  r.country = country;
  r.item_id = "item";
  r.label_id = label;
  r.annotated = annotated;
  return r;
}

}  // namespace

TEST(Evaluate, ConfusionMetrics) {
  Confusion c{2, 1, 1, 6};
  EXPECT_NEAR(*c.f1(), 4.0 / 6.0, 1e-15);
  EXPECT_NEAR(*c.accuracy(), 0.8, 1e-15);
  EXPECT_EQ(c.support(), 10u);
  Confusion negatives{0, 0, 0, 5};
  EXPECT_FALSE(negatives.f1().has_value());
  EXPECT_NEAR(*negatives.accuracy(), 1.0, 1e-15);
  EXPECT_FALSE(Confusion{}.accuracy().has_value());
  c += Confusion{1, 0, 0, 0};
  EXPECT_EQ(c.tp, 3u);
}

TEST(Evaluate, SamplingNames) {
  EXPECT_EQ(evaluate::parse_sampling("oversample_to_match"), evaluate::Sampling::OversampleToMatch);
  EXPECT_EQ(evaluate::to_string(evaluate::Sampling::RepresentativeStratified), "representative_stratified");
  EXPECT_FALSE(evaluate::parse_sampling("bootstrap"));
  evaluate::SplitSpec bad;
  bad.test_fraction = 1.0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Evaluate, ScoreFromPredictionsHandExample) {
  std::vector<AnnotationRecord> test = {row("AA", "split", true), row("AA", "split", false), row("AA", "shared", true),
                                        row("BB", "split", true)};
  const bool preds[] = {true, true, false, false};
  auto s = evaluate::score(std::span<const bool>(preds, 4), "x", test, verdicts());
  auto aa = s.cells.at({"AA", mrp::Classification::Inconsistent});
  EXPECT_EQ(aa.tp, 1u);
  EXPECT_EQ(aa.fp, 1u);
  EXPECT_EQ(s.cells.at({"AA", mrp::Classification::Consistent}).fn, 1u);
  EXPECT_EQ(s.pooled.at(mrp::Classification::Inconsistent).fn, 1u);
  EXPECT_EQ(s.overall.support(), 4u);

  test.push_back(row("AA", "unknown", true));
  const bool more[] = {true, true, false, false, true};
  EXPECT_THROW(evaluate::score(std::span<const bool>(more, 5), "x", test, verdicts()), Error);
}

TEST(Evaluate, ReportRelativeImprovement) {
  evaluate::RegimeScore hom, het;
  hom.regime = evaluate::kHomogeneous;
  het.regime = evaluate::kHeterogeneous;
  hom.cells[{"AA", mrp::Classification::Inconsistent}] = {2, 2, 2, 4};  // F1 0.5
  het.cells[{"AA", mrp::Classification::Inconsistent}] = {3, 1, 1, 5};  // F1 0.75
  for (auto* s : {&hom, &het}) {
    for (const auto& [k, c] : s->cells) {
      s->pooled[k.second] += c;
      s->overall += c;
    }
  }
  std::vector<evaluate::RegimeScore> scores = {het, hom};
  auto report = evaluate::make_report(scores);
  EXPECT_NEAR(*report.relative_improvement, 0.5, 1e-15);
  EXPECT_NEAR(*report.relative_improvement_overall, 0.5, 1e-15);
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_EQ(report.rows[0].regime, evaluate::kHeterogeneous);  // sorted by regime name last
  std::ostringstream csv;
  evaluate::write_eval_csv(csv, report);
  EXPECT_EQ(csv.str().rfind("country,consistency_class,regime,f1,accuracy,support", 0), 0u);
}

TEST(Evaluate, SplitIsRespondentLevelAndStratified) {
  auto records = population(1, 40);
  evaluate::SplitSpec spec;
  spec.seed = 4;
  auto parts = evaluate::split(records, spec);
  EXPECT_EQ(parts.train.size() + parts.test.size(), records.size());
  std::set<std::string> train_ids, test_ids;
  for (const auto& r : parts.train) train_ids.insert(r.respondent_id);
  std::map<std::string, std::set<std::string>> test_by_country;
  for (const auto& r : parts.test) {
    test_ids.insert(r.respondent_id);
    test_by_country[r.country].insert(r.respondent_id);
  }
  for (const auto& id : test_ids) EXPECT_FALSE(train_ids.count(id)) << id;
  EXPECT_EQ(test_ids.size(), 60u);  // round(0.3 * 200)
  for (const auto& [country, ids] : test_by_country) EXPECT_EQ(ids.size(), 12u) << country;

  auto again = evaluate::split(records, spec);
  EXPECT_EQ(again.test, parts.test);
  spec.seed = 5;
  EXPECT_NE(evaluate::split(records, spec).test, parts.test);
}

TEST(Evaluate, TrainSetsPartitionAndOversample) {
  auto records = population(2, 30);
  evaluate::SplitSpec spec;
  auto sets = evaluate::build_train_sets(records, spec);
  for (const auto& r : sets.homogeneous) EXPECT_EQ(r.country, "US");
  for (const auto& r : sets.heterogeneous) EXPECT_NE(r.country, "US");
  EXPECT_EQ(sets.homogeneous.size() + sets.heterogeneous.size(), records.size());

  spec.sampling = evaluate::Sampling::OversampleToMatch;
  auto over = evaluate::build_train_sets(records, spec);
  EXPECT_EQ(over.homogeneous.size(), over.heterogeneous.size());
  for (const auto& r : over.homogeneous) EXPECT_EQ(r.country, "US");

  spec.sampling = evaluate::Sampling::RepresentativeStratified;
  auto rep = evaluate::build_train_sets(records, spec);
  EXPECT_LE(rep.heterogeneous.size(), sets.heterogeneous.size());
  EXPECT_FALSE(rep.heterogeneous.empty());

  std::vector<AnnotationRecord> no_us;
  for (const auto& r : records) {
    if (r.country != "US") no_us.push_back(r);
  }
  try {
    evaluate::build_train_sets(no_us, evaluate::SplitSpec{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingCountry);
  }
}

TEST(Evaluate, PredictorRecoversRates) {
  auto records = population(3, 400);
  auto het = evaluate::Predictor::fit(records, true);
  auto hom = evaluate::Predictor::fit(records, false);
  EXPECT_TRUE(het.include_country());
  std::vector<AnnotationRecord> probe = {row("AA", "split", false), row("CC", "split", false)};
  auto p_het = het.probabilities(probe);
  EXPECT_LT(p_het[0], 0.5);
  EXPECT_GT(p_het[1], 0.5);
  // Score equations of a logistic fit with a country factor: fitted and
  // observed totals agree within every country.
  auto fitted = het.probabilities(records);
  std::map<std::string, std::pair<double, double>> totals;
  for (std::size_t i = 0; i < records.size(); ++i) {
    totals[records[i].country].first += fitted[i];
    totals[records[i].country].second += records[i].annotated ? 1.0 : 0.0;
  }
  for (const auto& [country, t] : totals) EXPECT_NEAR(t.first, t.second, 1e-6) << country;
  auto p_hom = hom.probabilities(probe);
  EXPECT_NEAR(p_hom[0], p_hom[1], 1e-12);  // no country term
  auto pred = het.predict(probe);
  EXPECT_FALSE(pred[0]);
  EXPECT_TRUE(pred[1]);

  std::vector<std::string> warnings;
  std::vector<AnnotationRecord> unseen = {row("ZZ", "split", false)};
  auto p = het.probabilities(unseen, &warnings);
  EXPECT_TRUE(p[0] > 0.0 && p[0] < 1.0);
  EXPECT_FALSE(warnings.empty());
}

TEST(Evaluate, PredictorDropsSeparatedLevels) {
  auto records = population(5, 100);
  for (auto& r : records) {
    if (r.country == "BB") r.annotated = false;
  }
  auto het = evaluate::Predictor::fit(records, true);
  ASSERT_FALSE(het.warnings().empty());
  EXPECT_NE(het.warnings().front().find("BB"), std::string::npos);
  std::vector<AnnotationRecord> probe = {row("BB", "shared", true)};
  EXPECT_EQ(het.probabilities(probe)[0], 0.0);
  EXPECT_THROW(evaluate::Predictor::fit(std::vector<AnnotationRecord>{}, true), Error);
}

TEST(Evaluate, HeterogeneousWinsOnInconsistentLabels) {
  auto records = population(6, 120);
  std::vector<AnnotationRecord> held_out;
  for (int i = 0; i < 60; ++i) {
    held_out.push_back(row("AA", "split", i % 5 == 0));
    held_out.back().respondent_id = "h" + std::to_string(i);
  }
  evaluate::SplitSpec spec;
  spec.seed = 1;
  auto v = verdicts();
  auto ev = evaluate::run(records, v, spec, nullptr, held_out);
  ASSERT_TRUE(ev.report.relative_improvement);
  EXPECT_GT(*ev.report.relative_improvement, 0.0);
  ASSERT_EQ(ev.out_of_sample.size(), 1u);
  EXPECT_EQ(ev.out_of_sample[0].country, "AA");
  EXPECT_EQ(ev.out_of_sample[0].support, 60u);
  EXPECT_GT(ev.train_homogeneous_rows, 0u);
  EXPECT_GT(ev.test_rows, 0u);
  auto j = evaluate::to_json(ev);
  EXPECT_TRUE(j.is_object());
}
