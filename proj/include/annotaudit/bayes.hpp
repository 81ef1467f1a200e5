#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "annotaudit/dataset.hpp"
#include "annotaudit/hmc.hpp"
#include "json.hpp"

namespace annotaudit::bayes {

struct MrpModelSpec {
  double prior_coef_scale = 2.5;
  double prior_group_scale = 0.5;  // mean of the exponential prior on sigma_u
  int chains = 4;
  int warmup = 1000;
  int draws_per_chain = 1000;
  double target_accept = 0.99;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

/// Binomial counts per distinct (gender, age, country) pattern for one (item, label).
///
/// Fixed columns are the intercept followed by gender and age dummies; the
/// reference of each factor is its first observed level in declaration order.
struct MrpData {
  Eigen::MatrixXd x;
  Eigen::VectorXd successes;
  Eigen::VectorXd trials;
  std::vector<int> country_index;  // per row, into `countries`
  std::vector<std::string> countries;
  std::vector<Gender> genders;    // levels in the model, reference first
  std::vector<AgeGroup> ages;     // levels in the model, reference first
  std::vector<std::string> fixed_names;

  Eigen::Index fixed_count() const { return x.cols(); }
  Eigen::Index country_count() const { return static_cast<Eigen::Index>(countries.size()); }
  Eigen::Index dimension() const { return fixed_count() + country_count() + 1; }
};

/// Records must all belong to one (item, label). An empty `countries`
/// list means "countries observed in the records".
MrpData build_data(std::span<const AnnotationRecord> records, const std::vector<std::string>& countries = {});
/// Data with no rows but the full column layout, for prior checks.
MrpData empty_data(std::size_t fixed_columns, std::size_t countries);

/// Parameter vector: fixed effects, country effects, log sigma_u.
/// Returns the log posterior density and writes the exact gradient.
double log_posterior(const MrpModelSpec& spec, const MrpData& data, const Eigen::VectorXd& theta,
                     Eigen::VectorXd* gradient = nullptr);

struct PosteriorDraws {
  std::string item_id;
  std::string label_id;
  Eigen::MatrixXd draws;  // S x (p + C + 1)
  std::vector<std::string> column_names;
  Eigen::Index fixed_count = 0;
  std::vector<std::string> countries;
  std::vector<Gender> genders;
  std::vector<AgeGroup> ages;
  int chains = 0;
  int draws_per_chain = 0;
  int divergence_count = 0;
  std::vector<double> chain_acceptance;
  std::vector<double> chain_step_size;
  std::string engine;
  bool approximate = false;

  double sigma(Eigen::Index draw) const { return std::exp(draws(draw, draws.cols() - 1)); }
};

PosteriorDraws sample_hmc(const MrpModelSpec& spec, const MrpData& data);
/// Laplace fit: the log sigma_u marginal is maximized with an inner Newton
/// solve, then draws come from a Gaussian around the conditional mode.
PosteriorDraws laplace_fit(const MrpModelSpec& spec, const MrpData& data);

struct ParameterDiagnostics {
  std::string name;
  std::optional<double> rhat;  // omitted for a single chain
  double ess = 0.0;
  bool degenerate = false;
};

struct Diagnostics {
  std::vector<ParameterDiagnostics> parameters;
  bool single_chain = false;
  double max_rhat = 0.0;
  double min_ess = 0.0;
  /// False when any rhat exceeds the threshold or a parameter is degenerate.
  bool converged = true;
};

Diagnostics convergence_diagnostics(const PosteriorDraws& draws, double rhat_threshold = 1.05);

/// Rank-normalized split R-hat over equal-length chains (columns of `chains`).
double split_rhat(const std::vector<std::vector<double>>& chains);
/// Rank-normalized bulk effective sample size.
double bulk_ess(const std::vector<std::vector<double>>& chains);

/// Columnar CSV of draws, one row per draw.
void write_draws_csv(std::ostream& out, const PosteriorDraws& draws, const std::vector<std::string>& comments = {});
nlohmann::json summarize(const PosteriorDraws& draws, const Diagnostics& diagnostics);

}  // namespace annotaudit::bayes
