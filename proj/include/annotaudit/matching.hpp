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
#include "annotaudit/mrp.hpp"

namespace annotaudit::matching {

enum class CaliperMode { PropensityLogit, Mahalanobis };

struct MatchSpec {
  std::string treatment_language = "en";
  bool require_ambassador = true;
  double caliper = 0.2;
  CaliperMode caliper_mode = CaliperMode::PropensityLogit;
  int min_english_play_frequency = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

inline const std::vector<std::string>& covariate_names() {
  static const std::vector<std::string> names = {"age_group", "male", "play_frequency", "english_play_frequency"};
  return names;
}

/// One respondent with its matching covariates.
struct Unit {
  std::string respondent_id;
  bool treated = false;
  Eigen::Vector4d covariates = Eigen::Vector4d::Zero();
};

/// Eligible treated and control units among `records` (one respondent may
/// contribute many rows; the first row supplies the covariates). Treated units
/// answered in the treatment language and, by default, are ambassadors;
/// controls answered in any other language.
std::vector<Unit> eligible_units(std::span<const AnnotationRecord> records, const MatchSpec& spec);

double mahalanobis(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const Eigen::MatrixXd& s);

struct Pair {
  std::size_t pair_id = 0;
  std::string treated_id;
  std::string control_id;
  double distance = 0.0;
};

struct Balance {
  std::string covariate;
  double smd_before = 0.0;
  double smd_after = 0.0;
};

struct MatchedSample {
  std::vector<Pair> pairs;
  std::size_t unmatched_treated = 0;
  std::size_t treated_count = 0;
  std::size_t control_count = 0;
  std::vector<Balance> balance;
  bool propensity_fallback = false;  // propensity fit failed; raw Mahalanobis, no caliper
  std::string fallback_reason;
  double caliper_width = 0.0;
};

/// (mean_t - mean_c) / sqrt((var_t + var_c) / 2); zero when both the
/// difference and the pooled SD are zero.
double standardized_mean_difference(std::span<const double> treated, std::span<const double> control);
double standardized_mean_difference(double mean_treated, double mean_control, double pooled_sd);

/// Greedy one-to-one nearest-neighbour matching without replacement.
/// Throws NoEligibleUnits or SingularCovariance.
MatchedSample match(std::span<const Unit> units, const MatchSpec& spec);
MatchedSample match(std::span<const AnnotationRecord> records, const MatchSpec& spec);

std::vector<Balance> balance_table(const MatchedSample& sample);

struct LanguageEffect {
  std::size_t pairs = 0;
  double mean_treated = 0.0;
  double mean_control = 0.0;
  double mean_diff = 0.0;
  double diff_ci_low = 0.0;
  double diff_ci_high = 0.0;
  std::optional<double> odds_ratio;  // null when the logistic effect is undefined
  std::optional<double> or_ci_low;
  std::optional<double> or_ci_high;
  std::optional<double> p_value;
  std::string note;
};

/// Logistic regression of the outcome on treatment over matched units with
/// covariance clustered by pair. Throws InvalidArgument for fewer than two pairs.
LanguageEffect language_effect(const MatchedSample& sample, const std::map<std::string, bool>& outcomes);

struct ContextEffect {
  std::string country;
  std::string item_id;
  std::string label_id;
  std::optional<mrp::Classification> classification;
  LanguageEffect effect;
};

struct Sweep {
  std::vector<ContextEffect> contexts;
  std::size_t infeasible = 0;
  std::optional<double> share_significant_inconsistent;
  std::optional<double> share_significant_consistent;
  std::vector<std::string> notices;
  std::map<std::string, MatchedSample> samples;  // per country
};

/// Matches once per country (covariates do not vary across items) and
/// estimates the effect in every (country, item, label) context.
Sweep language_effect_sweep(std::span<const AnnotationRecord> records,
                            std::span<const mrp::ConsistencyVerdict> verdicts, const MatchSpec& spec,
                            double significance = 0.05);

void write_matches_csv(std::ostream& out, const std::map<std::string, MatchedSample>& samples,
                       const std::vector<std::string>& comments = {});
void write_balance_csv(std::ostream& out, const std::map<std::string, MatchedSample>& samples,
                       const std::vector<std::string>& comments = {});
void write_effects_csv(std::ostream& out, std::span<const ContextEffect> effects,
                       const std::vector<std::string>& comments = {});

}  // namespace annotaudit::matching
