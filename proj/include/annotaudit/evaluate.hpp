#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "annotaudit/dataset.hpp"
#include "annotaudit/glm.hpp"
#include "annotaudit/mrp.hpp"
#include "json.hpp"

namespace annotaudit::evaluate {

enum class Sampling { Random, RepresentativeStratified, OversampleToMatch };

std::string_view to_string(Sampling sampling);
std::optional<Sampling> parse_sampling(std::string_view text);

struct SplitSpec {
  double test_fraction = 0.30;
  std::uint64_t seed = 0;
  Sampling sampling = Sampling::Random;
  std::string homogeneous_country = "US";

  void validate() const;
};

struct Split {
  std::vector<AnnotationRecord> train;
  std::vector<AnnotationRecord> test;
};

/// Respondent-level split. Test respondents are drawn within each country
/// (largest-remainder allocation of round(fraction * respondents)) so the
/// test set mirrors the country mix of the input.
Split split(std::span<const AnnotationRecord> records, const SplitSpec& spec);

struct TrainSets {
  std::vector<AnnotationRecord> homogeneous;
  std::vector<AnnotationRecord> heterogeneous;
};

/// Throws MissingCountry when the pool lacks the homogeneous country or has
/// fewer than two other countries. `strata` is only read in the
/// representative mode; without it the empirical cell shares are used.
TrainSets build_train_sets(std::span<const AnnotationRecord> pool, const SplitSpec& spec,
                           const Strata* strata = nullptr);

/// Logistic annotation model over item, label, gender and age group, plus
/// country when `include_country` is set.
class Predictor {
 public:
  static Predictor fit(std::span<const AnnotationRecord> train, bool include_country);

  /// Probability of `annotated`; unseen levels fall back to the reference.
  std::vector<double> probabilities(std::span<const AnnotationRecord> rows, std::vector<std::string>* warnings = nullptr) const;
  std::vector<bool> predict(std::span<const AnnotationRecord> rows, std::vector<std::string>* warnings = nullptr) const;

  bool include_country() const { return include_country_; }
  const glm::GlmFit& fit_result() const { return fit_; }
  const glm::DesignSchema& schema() const { return schema_; }
  /// Warnings raised while fitting (dropped separated levels).
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  bool include_country_ = false;
  glm::DesignSchema schema_;
  glm::GlmFit fit_;
  // Levels removed from the fit because their outcome never varied; rows
  // carrying one are predicted at the observed constant.
  std::map<std::pair<std::string, std::string>, double> separated_;
  std::vector<std::string> warnings_;
};

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t support() const { return tp + fp + fn + tn; }
  /// 2TP / (2TP + FP + FN); null when the denominator is zero.
  std::optional<double> f1() const;
  std::optional<double> accuracy() const;
  Confusion& operator+=(const Confusion& other);
};

struct RegimeScore {
  std::string regime;
  std::map<std::pair<std::string, mrp::Classification>, Confusion> cells;  // (country, class)
  std::map<mrp::Classification, Confusion> pooled;
  Confusion overall;
};

/// Throws InvalidArgument when a test pair has no verdict.
RegimeScore score(const Predictor& predictor, const std::string& regime, std::span<const AnnotationRecord> test,
                  std::span<const mrp::ConsistencyVerdict> verdicts, std::vector<std::string>* warnings = nullptr);
RegimeScore score(std::span<const bool> predictions, const std::string& regime,
                  std::span<const AnnotationRecord> test, std::span<const mrp::ConsistencyVerdict> verdicts);

struct MetricRow {
  std::string country;
  mrp::Classification classification = mrp::Classification::Consistent;
  std::string regime;
  std::optional<double> f1;
  std::optional<double> accuracy;
  std::size_t support = 0;
};

struct EvalReport {
  std::vector<MetricRow> rows;  // sorted by country, class, regime
  std::map<std::string, RegimeScore> regimes;
  /// (f1_het - f1_hom) / f1_hom on the pooled inconsistent-label test rows.
  std::optional<double> relative_improvement;
  std::optional<double> relative_improvement_overall;
};

inline constexpr const char* kHomogeneous = "homogeneous";
inline constexpr const char* kHeterogeneous = "heterogeneous";

EvalReport make_report(std::span<const RegimeScore> scores);

struct OutOfSample {
  std::string country;
  std::optional<double> f1_homogeneous;
  std::optional<double> f1_heterogeneous;
  std::optional<double> delta;
  std::size_t support = 0;
};

/// Per held-out country F1 of both regimes over all of its rows.
std::vector<OutOfSample> out_of_sample_eval(const Predictor& homogeneous, const Predictor& heterogeneous,
                                            std::span<const AnnotationRecord> held_out,
                                            std::vector<std::string>* warnings = nullptr);

struct Evaluation {
  EvalReport report;
  std::vector<OutOfSample> out_of_sample;
  std::size_t train_homogeneous_rows = 0;
  std::size_t train_heterogeneous_rows = 0;
  std::size_t test_rows = 0;
  std::vector<std::string> warnings;
};

/// split, build_train_sets, fit both regimes, score, out-of-sample.
Evaluation run(std::span<const AnnotationRecord> records, std::span<const mrp::ConsistencyVerdict> verdicts,
               const SplitSpec& spec, const Strata* strata = nullptr,
               std::span<const AnnotationRecord> held_out = {});

void write_eval_csv(std::ostream& out, const EvalReport& report, const std::vector<std::string>& comments = {});
nlohmann::json to_json(const Evaluation& evaluation);

}  // namespace annotaudit::evaluate
