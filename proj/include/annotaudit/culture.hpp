#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "annotaudit/dataset.hpp"
#include "annotaudit/glm.hpp"
#include "annotaudit/mrp.hpp"
#include "json.hpp"

namespace annotaudit::culture {

struct DimensionTest {
  HofstedeDimension dimension;
  glm::WaldResult wald;
};

struct DimensionSelection {
  std::vector<HofstedeDimension> selected;  // p < alpha, largest |coefficient| first
  std::vector<DimensionTest> tests;         // every dimension that entered the model
  std::vector<HofstedeDimension> dropped;   // zero variance or collinear
  std::vector<std::string> notes;
  glm::GlmFit fit;
};

/// Pooled logistic regression of `annotated` on gender, age group, item and
/// label fixed effects and the Hofstede values of the respondent's country.
DimensionSelection select_dimensions(std::span<const AnnotationRecord> records, const HofstedeTable& hofstede,
                                     double alpha = 0.001);

struct CdiMatrix {
  std::vector<std::string> countries;
  Eigen::MatrixXd distances;
  std::vector<HofstedeDimension> dimensions_used;

  double at(const std::string& a, const std::string& b) const;
};

/// Euclidean distance over `dimensions`. An empty `countries` list uses every table row.
CdiMatrix cdi(const HofstedeTable& hofstede, const std::vector<HofstedeDimension>& dimensions,
              const std::vector<std::string>& countries = {});
/// Same, by dimension name; throws UnknownDimension.
CdiMatrix cdi(const HofstedeTable& hofstede, const std::vector<std::string>& dimension_names,
              const std::vector<std::string>& countries = {});

struct CountryPairSimilarity {
  std::string country_a;
  std::string country_b;
  std::optional<double> pearson_inconsistent;  // nullopt when a vector has zero variance
  std::optional<double> pearson_consistent;
  std::size_t n_inconsistent = 0;
  std::size_t n_consistent = 0;
};

/// Unordered country pairs (self pairs included) over the countries present in
/// every verdict. Pairs are ordered by (item_id, label_id) within each class.
std::vector<CountryPairSimilarity> pair_similarity(std::span<const mrp::ConsistencyVerdict> verdicts);

struct TrendFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::optional<double> spearman;
  std::size_t pairs = 0;
};

/// OLS plus Spearman; throws DegenerateX when x is constant.
TrendFit fit_trend(std::span<const double> x, std::span<const double> y);

struct CdiTrend {
  std::optional<TrendFit> inconsistent;
  std::optional<TrendFit> consistent;
};

/// Distinct unordered pairs only; pairs whose similarity is null are skipped.
CdiTrend cdi_similarity_trend(const CdiMatrix& distances, std::span<const CountryPairSimilarity> similarities);

struct RankPair {
  std::string item_id;
  std::string country_a;
  std::string country_b;
  std::optional<double> spearman;
};

struct LabelRankDifference {
  std::string item_id;
  std::string label_id;
  mrp::Classification classification = mrp::Classification::Consistent;
  double median_rank_difference = 0.0;  // over country pairs
};

struct RankAnalysis {
  std::vector<RankPair> pairs;
  std::vector<LabelRankDifference> labels;
  std::optional<double> min_spearman;
  std::optional<double> mode_spearman;  // most frequent value at two decimals
  std::optional<double> median_difference_inconsistent;
  std::optional<double> median_difference_consistent;
};

/// Labels are ranked within each item, highest estimate first, ties averaged.
/// Throws IncompleteRanking when a country lacks an estimate for a label of the item.
RankAnalysis label_rank_analysis(std::span<const mrp::ConsistencyVerdict> verdicts);

void write_cdi_csv(std::ostream& out, const CdiMatrix& matrix, const std::vector<std::string>& comments = {});
void write_similarity_csv(std::ostream& out, std::span<const CountryPairSimilarity> sims, const CdiMatrix* matrix,
                          const std::vector<std::string>& comments = {});
void write_rank_csv(std::ostream& out, const RankAnalysis& analysis, const std::vector<std::string>& comments = {});
nlohmann::json to_json(const CdiTrend& trend);
nlohmann::json to_json(const DimensionSelection& selection);
nlohmann::json to_json(const RankAnalysis& analysis);

}  // namespace annotaudit::culture
