#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "annotaudit/dataset.hpp"
#include "annotaudit/mrp.hpp"
#include "json.hpp"

namespace annotaudit::synth {

using PairKey = std::pair<std::string, std::string>;  // (item_id, label_id)

struct CountrySpec {
  std::string code;
  std::string language;            // survey language of non-ambassadors
  double sample_share = 0.0;       // share of respondents drawn
  double population_share = 0.0;   // weight of the country in the strata table
  double ambassador_share = 0.0;   // respondents surveyed in English
};

struct SynthConfig {
  std::vector<CountrySpec> countries;
  HofstedeTable hofstede;  // positions of the countries, written alongside the data
  /// Generated like any other country but left out of the true classifications.
  std::vector<std::string> holdout_countries;
  int items = 10;
  int labels = 28;
  int respondents = 5000;

  // Demographic skew: respondents are drawn from gender x age cells with the
  // sample shares; truths are weighted with the population shares.
  std::array<double, 3> gender_population = {0.45, 0.55, 0.0};
  std::array<double, 3> gender_sample = {0.30, 0.70, 0.0};
  std::array<double, 5> age_population = {0.22, 0.28, 0.22, 0.16, 0.12};
  std::array<double, 5> age_sample = {0.33, 0.31, 0.18, 0.10, 0.08};
  std::array<double, 3> gender_offset = {0.0, 0.0, 0.0};
  std::array<double, 5> age_offset = {0.0, 0.0, 0.0, 0.0, 0.0};

  std::map<PairKey, double> base_rates;  // every (item, label) pair
  std::map<PairKey, std::map<std::string, double>> planted_inconsistent;  // per-country offsets
  std::map<std::pair<std::string, std::string>, double> language_shift;   // (country, label)
  double noise_sd = 0.0;  // per (country, item, label) jitter of the truth
  std::uint64_t seed = 0;

  double sd_threshold = 0.05;
  double majority_line = 0.5;

  std::vector<std::string> item_ids() const;
  std::vector<std::string> label_ids() const;
  /// Throws InfeasibleConfig.
  void validate() const;
};

struct PairTruth {
  std::string item_id;
  std::string label_id;
  double base_rate = 0.0;
  bool planted = false;
  std::map<std::string, double> country_truth;  // population-weighted, no language shift
  mrp::Classification classification = mrp::Classification::Consistent;
  double cross_country_sd = 0.0;
};

struct LanguageEffectTruth {
  std::string country;
  std::string label_id;
  double shift = 0.0;
};

struct Manifest {
  std::uint64_t seed = 0;
  std::size_t respondents = 0;
  std::vector<PairTruth> pairs;  // sorted by (item, label)
  std::map<PairKey, std::map<CellKey, double>> cell_probability;
  std::vector<LanguageEffectTruth> language_effects;
  /// Slope of inconsistent-label similarity on CDI (uncertainty, long-term
  /// orientation) computed from the true country probabilities.
  std::optional<double> culture_slope;
  std::vector<std::string> analyzed_countries;
  std::vector<std::string> holdout_countries;

  const PairTruth& pair(const std::string& item, const std::string& label) const;
  std::size_t inconsistent_count() const;
};

struct SynthOutput {
  std::vector<AnnotationRecord> annotations;
  Strata strata;
  HofstedeTable hofstede;
  Manifest manifest;
};

/// Single seeded stream; identical configs give identical outputs.
SynthOutput generate(const SynthConfig& config);

/// Manifest alone (cheap; no respondents are drawn).
Manifest build_manifest(const SynthConfig& config);

/// 14 analysed countries plus two holdouts (IN, SA), 10 items, 28 labels,
/// 5,500 respondents with the US as the largest country, 55 planted
/// inconsistent pairs (11 ambiguous labels x 5 items).
SynthConfig paper_scale_preset(std::uint64_t seed = 0);
/// Same countries and labels with two items and fewer respondents.
SynthConfig smoke_preset(std::uint64_t seed = 0);
/// Two identical countries, one item and label, 20,000 respondents with 80% in one cell and
/// strong demographic offsets; the population mean is 0.40.
SynthConfig skewed_sampling_config(std::uint64_t seed = 0);

/// The bundled Hofstede fixture.
const HofstedeTable& bundled_hofstede();

struct MatchingFixture {
  std::vector<AnnotationRecord> records;  // one (item, label) context in one country
  std::map<std::string, bool> outcomes;   // respondent -> annotated
  double true_effect = 0.0;
};

/// Treated respondents (English-surveyed ambassadors) skew older and male; the
/// annotation probability rises with age and carries `effect` for treated units.
MatchingFixture confounded_matching(std::uint64_t seed, std::size_t treated = 400, std::size_t controls = 3000,
                                    double effect = 0.20);

/// 26 treated and 26 control respondents with identical covariates pairwise;
/// 21 of the treated and 11 of the controls annotate.
MatchingFixture germany_fixture();

nlohmann::json to_json(const Manifest& manifest);

/// annotations.csv, strata.csv, hofstede.csv and manifest.json under `dir`.
void write_outputs(const SynthOutput& output, const std::string& dir, const std::vector<std::string>& comments = {},
                   const nlohmann::json& provenance = nullptr);

}  // namespace annotaudit::synth
