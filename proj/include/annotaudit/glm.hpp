#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace annotaudit::glm {

/// Raw covariates before dummy coding. Every column has `rows` entries.
struct FeatureTable {
  std::size_t rows = 0;
  std::vector<std::pair<std::string, std::vector<std::string>>> factors;
  std::vector<std::pair<std::string, std::vector<double>>> numerics;

  void add_factor(std::string name, std::vector<std::string> values);
  void add_numeric(std::string name, std::vector<double> values);
};

struct DesignMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> column_names;
  std::map<std::string, std::string> reference_levels;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  /// Pairs of column indices whose entries are identical.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> duplicate_columns() const;
};

struct FactorEncoding {
  std::string name;
  std::string reference;            // dropped level, lexicographically first
  std::vector<std::string> levels;  // non-reference levels, sorted
};

enum class UnseenLevel { Reference, Error };

/// Column layout: intercept, then each factor's non-reference dummies, then
/// numerics, all in the order they were added to the table.
class DesignSchema {
 public:
  static DesignSchema from_table(const FeatureTable& table);

  /// Throws UnknownLevel for unseen levels under UnseenLevel::Error; under
  /// UnseenLevel::Reference they encode as the reference and a warning is
  /// appended (once per distinct level).
  DesignMatrix encode(const FeatureTable& table, UnseenLevel policy = UnseenLevel::Error,
                      std::vector<std::string>* warnings = nullptr) const;

  std::size_t columns() const;
  std::vector<std::string> column_names() const;
  std::map<std::string, std::string> reference_levels() const;
  const std::vector<FactorEncoding>& factors() const { return factors_; }
  const std::vector<std::string>& numerics() const { return numerics_; }

  /// Column of a non-reference factor level; nullopt for the reference level.
  /// Throws UnknownLevel for levels never seen.
  std::optional<std::size_t> column_of(const std::string& factor, const std::string& level) const;
  std::size_t numeric_column(const std::string& name) const;

 private:
  std::vector<FactorEncoding> factors_;
  std::vector<std::string> numerics_;
};

struct IrlsOptions {
  int max_iterations = 100;
  double beta_tolerance = 1e-8;
  double loglik_tolerance = 1e-10;  // only consulted once steps are being halved
  double separation_bound = 1e4;
};

struct GlmFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;  // model-based inverse information unless replaced
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::vector<std::string> column_names;
  /// Per-iteration log-likelihood, starting at beta = 0.
  std::vector<double> loglik_trace;
};

/// Bernoulli outcomes; equivalent to fit_binomial with unit trials.
GlmFit fit_logistic(const DesignMatrix& x, const std::vector<bool>& y, const IrlsOptions& options = {});
/// Aggregated binomial outcomes: row i has `successes[i]` out of `trials[i]`.
GlmFit fit_binomial(const DesignMatrix& x, const Eigen::VectorXd& successes, const Eigen::VectorXd& trials,
                    const IrlsOptions& options = {});

double binomial_log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& successes,
                               const Eigen::VectorXd& trials, const Eigen::VectorXd& beta);
Eigen::VectorXd binomial_score(const Eigen::MatrixXd& x, const Eigen::VectorXd& successes,
                               const Eigen::VectorXd& trials, const Eigen::VectorXd& beta);

/// Sandwich A^-1 B A^-1 with per-cluster score outer products in B and the
/// G/(G-1) small-sample factor. Throws DegenerateClusters when G < 2.
Eigen::MatrixXd cluster_robust_cov(const DesignMatrix& x, const std::vector<bool>& y, const GlmFit& fit,
                                   std::span<const std::int64_t> cluster_ids);

struct WaldResult {
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

WaldResult wald_test(double estimate, double se);
/// Uses fit.covariance; throws ZeroVariance when the diagonal entry is not positive.
WaldResult wald_test(const GlmFit& fit, Eigen::Index coefficient);

/// [{name, estimate, se, z, p}, ...]
nlohmann::json coefficient_table(const GlmFit& fit);

double logistic(double eta);

}  // namespace annotaudit::glm
