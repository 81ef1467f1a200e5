#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "annotaudit/error.hpp"
#include "annotaudit/synth.hpp"

using namespace annotaudit;

namespace {

synth::SynthConfig small_config(std::uint64_t seed) {
  auto c = synth::smoke_preset(seed);
  c.respondents = 800;
  return c;
}

}  // namespace

TEST(Synth, GenerateIsDeterministic) {
  auto a = synth::generate(small_config(3));
  auto b = synth::generate(small_config(3));
  EXPECT_EQ(a.annotations, b.annotations);
  EXPECT_EQ(synth::to_json(a.manifest).dump(), synth::to_json(b.manifest).dump());
  auto c = synth::generate(small_config(4));
  EXPECT_NE(a.annotations, c.annotations);
}

TEST(Synth, RecordsCoverEveryPairPerRespondent) {
  auto cfg = small_config(5);
  auto out = synth::generate(cfg);
  std::map<std::string, std::size_t> rows;
  for (const auto& r : out.annotations) ++rows[r.respondent_id];
  EXPECT_EQ(rows.size(), static_cast<std::size_t>(cfg.respondents));
  // Every respondent answers each (item, label) pair once.
  for (const auto& [id, n] : rows) EXPECT_EQ(n, static_cast<std::size_t>(cfg.items * cfg.labels)) << id;
  std::set<std::string> countries;
  for (const auto& r : out.annotations) countries.insert(r.country);
  EXPECT_EQ(countries.size(), cfg.countries.size());
  EXPECT_NEAR(out.strata.total_weight(), 1.0, 1e-9);
}

TEST(Synth, PaperPresetManifestShape) {
  auto cfg = synth::paper_scale_preset(1);
  auto m = synth::build_manifest(cfg);
  EXPECT_EQ(m.pairs.size(), 280u);
  EXPECT_EQ(m.analyzed_countries.size(), 14u);
  EXPECT_EQ(m.holdout_countries, (std::vector<std::string>{"IN", "SA"}));
  std::size_t planted = 0;
  for (const auto& p : m.pairs) {
    planted += p.planted;
    EXPECT_EQ(p.country_truth.size(), 16u);  // holdouts carry truths too
    for (const auto& [c, v] : p.country_truth) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
  EXPECT_EQ(planted, 55u);
  EXPECT_EQ(cfg.respondents, 5500);
  auto us = std::find_if(cfg.countries.begin(), cfg.countries.end(), [](const auto& c) { return c.code == "US"; });
  for (const auto& c : cfg.countries) EXPECT_LE(c.sample_share, us->sample_share);
}

TEST(Synth, NoiseFreeTruthsReproduceClassification) {
  auto cfg = synth::paper_scale_preset(2);
  cfg.noise_sd = 0.0;
  auto m = synth::build_manifest(cfg);
  for (const auto& p : m.pairs) {
    // Holdout countries are excluded from the classification.
    std::map<std::string, double> analyzed;
    for (const auto& c : m.analyzed_countries) analyzed[c] = p.country_truth.at(c);
    auto v = mrp::classify_consistency(analyzed, cfg.sd_threshold, cfg.majority_line);
    EXPECT_EQ(v.classification, p.classification) << p.item_id << "/" << p.label_id;
    EXPECT_NEAR(v.cross_country_sd, p.cross_country_sd, 1e-12);
  }
  EXPECT_GT(m.inconsistent_count(), 0u);
  EXPECT_EQ(&m.pair("item01", "label01"), &m.pairs.front());
}

TEST(Synth, ValidationRejectsInfeasibleConfigs) {
  auto expect_infeasible = [](const synth::SynthConfig& c) {
    try {
      c.validate();
      ADD_FAILURE() << "accepted";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InfeasibleConfig);
    }
  };
  auto c = small_config(1);
  c.respondents = 0;
  expect_infeasible(c);
  c = small_config(1);
  c.countries.push_back(c.countries.front());
  expect_infeasible(c);
  c = small_config(1);
  c.holdout_countries.push_back("ZZ");
  expect_infeasible(c);
  c = small_config(1);
  c.countries.front().ambassador_share = 1.5;
  expect_infeasible(c);
  EXPECT_NO_THROW(small_config(1).validate());
}

TEST(Synth, SkewedConfigPopulationMean) {
  auto cfg = synth::skewed_sampling_config(1);
  auto m = synth::build_manifest(cfg);
  ASSERT_EQ(m.pairs.size(), 1u);
  for (const auto& [c, v] : m.pairs[0].country_truth) EXPECT_NEAR(v, 0.40, 1e-9) << c;
}

TEST(Synth, GermanyFixtureCounts) {
  auto f = synth::germany_fixture();
  std::size_t treated = 0, treated_yes = 0, control_yes = 0;
  std::set<std::string> ids;
  for (const auto& r : f.records) {
    ids.insert(r.respondent_id);
    bool t = r.survey_language == "en";
    treated += t;
    (t ? treated_yes : control_yes) += f.outcomes.at(r.respondent_id);
  }
  EXPECT_EQ(ids.size(), 52u);
  EXPECT_EQ(treated, 26u);
  EXPECT_EQ(treated_yes, 21u);
  EXPECT_EQ(control_yes, 11u);
}

TEST(Synth, ConfoundedMatchingFixtureIsConfounded) {
  auto f = synth::confounded_matching(2, 100, 500, 0.2);
  EXPECT_DOUBLE_EQ(f.true_effect, 0.2);
  double age_t = 0, age_c = 0, nt = 0, nc = 0;
  for (const auto& r : f.records) {
    bool t = r.survey_language == "en" && r.ambassador;
    (t ? age_t : age_c) += age_code(r.age_group);
    (t ? nt : nc) += 1;
  }
  EXPECT_EQ(nt, 100);
  EXPECT_EQ(nc, 500);
  EXPECT_GT(age_t / nt, age_c / nc);
}

TEST(Synth, WriteOutputsRoundTrip) {
  auto out = synth::generate(small_config(7));
  auto dir = std::filesystem::temp_directory_path() / "annotaudit_synth_test";
  std::filesystem::remove_all(dir);
  synth::write_outputs(out, dir.string(), {"seed=7"});
  for (const char* f : {"annotations.csv", "strata.csv", "hofstede.csv", "manifest.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  auto loaded = load_annotations((dir / "annotations.csv").string());
  EXPECT_EQ(loaded.records, out.annotations);
  auto strata = load_strata((dir / "strata.csv").string());
  ASSERT_EQ(strata.cells.size(), out.strata.cells.size());
  auto hof = load_hofstede((dir / "hofstede.csv").string());
  ASSERT_EQ(hof.rows.size(), out.hofstede.rows.size());
  EXPECT_NEAR(hof.rows[0].values[0], out.hofstede.rows[0].values[0], 1e-9);
  std::filesystem::remove_all(dir);
}
