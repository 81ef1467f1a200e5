#include "annotaudit/glm.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <set>
#include <unordered_map>

#include "annotaudit/error.hpp"
#include "annotaudit/stats.hpp"

namespace annotaudit::glm {

double logistic(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  double e = std::exp(eta);
  return e / (1.0 + e);
}

namespace {

// log(1 + exp(eta)) without overflow.
double log1p_exp(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

}  // namespace

void FeatureTable::add_factor(std::string name, std::vector<std::string> values) {
  if (factors.empty() && numerics.empty()) rows = values.size();
  if (values.size() != rows) throw Error(ErrorCode::InvalidArgument, "factor '" + name + "' has wrong length");
  factors.emplace_back(std::move(name), std::move(values));
}

void FeatureTable::add_numeric(std::string name, std::vector<double> values) {
  if (factors.empty() && numerics.empty()) rows = values.size();
  if (values.size() != rows) throw Error(ErrorCode::InvalidArgument, "numeric '" + name + "' has wrong length");
  numerics.emplace_back(std::move(name), std::move(values));
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> DesignMatrix::duplicate_columns() const {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> duplicates;
  std::unordered_map<std::uint64_t, std::vector<Eigen::Index>> buckets;
  for (Eigen::Index c = 0; c < cols(); ++c) {
    std::uint64_t h = 1469598103934665603ULL;
    for (Eigen::Index r = 0; r < rows(); ++r) {
      double v = values(r, c);
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      h = (h ^ bits) * 1099511628211ULL;
    }
    auto& bucket = buckets[h];
    for (Eigen::Index other : bucket) {
      if (values.col(other) == values.col(c)) duplicates.emplace_back(other, c);
    }
    bucket.push_back(c);
  }
  return duplicates;
}

DesignSchema DesignSchema::from_table(const FeatureTable& table) {
  DesignSchema schema;
  for (const auto& [name, values] : table.factors) {
    std::set<std::string> levels(values.begin(), values.end());
    FactorEncoding encoding;
    encoding.name = name;
    if (!levels.empty()) {
      encoding.reference = *levels.begin();
      encoding.levels.assign(std::next(levels.begin()), levels.end());
    }
    schema.factors_.push_back(std::move(encoding));
  }
  for (const auto& [name, values] : table.numerics) schema.numerics_.push_back(name);
  return schema;
}

std::size_t DesignSchema::columns() const {
  std::size_t p = 1 + numerics_.size();
  for (const auto& f : factors_) p += f.levels.size();
  return p;
}

std::vector<std::string> DesignSchema::column_names() const {
  std::vector<std::string> names = {"(intercept)"};
  for (const auto& f : factors_) {
    for (const auto& level : f.levels) names.push_back(f.name + ":" + level);
  }
  for (const auto& n : numerics_) names.push_back(n);
  return names;
}

std::map<std::string, std::string> DesignSchema::reference_levels() const {
  std::map<std::string, std::string> refs;
  for (const auto& f : factors_) refs[f.name] = f.reference;
  return refs;
}

std::optional<std::size_t> DesignSchema::column_of(const std::string& factor, const std::string& level) const {
  std::size_t offset = 1;
  for (const auto& f : factors_) {
    if (f.name == factor) {
      if (level == f.reference) return std::nullopt;
      auto it = std::lower_bound(f.levels.begin(), f.levels.end(), level);
      if (it == f.levels.end() || *it != level) {
        throw Error(ErrorCode::UnknownLevel, "level '" + level + "' of factor '" + factor + "' not in model");
      }
      return offset + static_cast<std::size_t>(it - f.levels.begin());
    }
    offset += f.levels.size();
  }
  throw Error(ErrorCode::UnknownLevel, "factor '" + factor + "' not in model");
}

std::size_t DesignSchema::numeric_column(const std::string& name) const {
  std::size_t offset = 1;
  for (const auto& f : factors_) offset += f.levels.size();
  for (std::size_t i = 0; i < numerics_.size(); ++i) {
    if (numerics_[i] == name) return offset + i;
  }
  throw Error(ErrorCode::UnknownLevel, "numeric covariate '" + name + "' not in model");
}

DesignMatrix DesignSchema::encode(const FeatureTable& table, UnseenLevel policy,
                                  std::vector<std::string>* warnings) const {
  DesignMatrix design;
  const auto n = static_cast<Eigen::Index>(table.rows);
  design.values = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(columns()));
  design.values.col(0).setOnes();
  design.column_names = column_names();
  design.reference_levels = reference_levels();

  Eigen::Index offset = 1;
  for (const auto& f : factors_) {
    auto it = std::find_if(table.factors.begin(), table.factors.end(), [&](const auto& c) { return c.first == f.name; });
    if (it == table.factors.end()) throw Error(ErrorCode::InvalidArgument, "table lacks factor '" + f.name + "'");
    std::set<std::string> warned;
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto& level = it->second[static_cast<std::size_t>(r)];
      if (level == f.reference) continue;
      auto pos = std::lower_bound(f.levels.begin(), f.levels.end(), level);
      if (pos == f.levels.end() || *pos != level) {
        if (policy == UnseenLevel::Error) {
          throw Error(ErrorCode::UnknownLevel, "level '" + level + "' of factor '" + f.name + "' not in model");
        }
        if (warnings && warned.insert(level).second) {
          warnings->push_back("unseen level '" + level + "' of '" + f.name + "' mapped to reference '" + f.reference + "'");
        }
        continue;
      }
      design.values(r, offset + (pos - f.levels.begin())) = 1.0;
    }
    offset += static_cast<Eigen::Index>(f.levels.size());
  }
  for (const auto& name : numerics_) {
    auto it = std::find_if(table.numerics.begin(), table.numerics.end(), [&](const auto& c) { return c.first == name; });
    if (it == table.numerics.end()) throw Error(ErrorCode::InvalidArgument, "table lacks numeric '" + name + "'");
    for (Eigen::Index r = 0; r < n; ++r) design.values(r, offset) = it->second[static_cast<std::size_t>(r)];
    ++offset;
  }
  return design;
}

double binomial_log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& successes,
                               const Eigen::VectorXd& trials, const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = x * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += successes[i] * eta[i] - trials[i] * log1p_exp(eta[i]);
  return ll;
}

Eigen::VectorXd binomial_score(const Eigen::MatrixXd& x, const Eigen::VectorXd& successes,
                               const Eigen::VectorXd& trials, const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = x * beta;
  Eigen::VectorXd residual(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) residual[i] = successes[i] - trials[i] * logistic(eta[i]);
  return x.transpose() * residual;
}

namespace {

Eigen::MatrixXd information(const Eigen::MatrixXd& x, const Eigen::VectorXd& trials, const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = x * beta;
  Eigen::VectorXd w(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    double mu = logistic(eta[i]);
    w[i] = trials[i] * mu * (1.0 - mu);
  }
  return x.transpose() * w.asDiagonal() * x;
}

// True when every row's fitted mean sits on its observed proportion at 0 or 1.
bool probabilities_pinned(const Eigen::MatrixXd& x, const Eigen::VectorXd& successes, const Eigen::VectorXd& trials,
                          const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = x * beta;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (trials[i] <= 0) continue;
    double observed = successes[i] / trials[i];
    if (observed > 0.0 && observed < 1.0) return false;
    if (std::fabs(observed - logistic(eta[i])) > 1e-6) return false;
  }
  return true;
}

}  // namespace

GlmFit fit_binomial(const DesignMatrix& x, const Eigen::VectorXd& successes, const Eigen::VectorXd& trials,
                    const IrlsOptions& options) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (successes.size() != n || trials.size() != n) throw Error(ErrorCode::InvalidArgument, "outcome length mismatch");
  double total_trials = trials.sum();
  double total_successes = successes.sum();
  if (total_trials < static_cast<double>(p)) {
    throw Error(ErrorCode::InvalidArgument, "fewer observations than coefficients");
  }
  if (total_successes <= 0.0 || total_successes >= total_trials) {
    throw Error(ErrorCode::NoVariation, "outcome is constant");
  }
  if (auto dups = x.duplicate_columns(); !dups.empty()) {
    throw Error(ErrorCode::Singular, "identical design columns '" + x.column_names.at(dups[0].first) + "' and '" +
                                         x.column_names.at(dups[0].second) + "'");
  }

  GlmFit fit;
  fit.column_names = x.column_names;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = binomial_log_likelihood(x.values, successes, trials, beta);
  fit.loglik_trace.push_back(ll);

  {
    Eigen::MatrixXd info = information(x.values, trials, beta);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(info);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s[s.size() - 1] <= 1e-12 * s[0]) {
      throw Error(ErrorCode::Singular, "weighted normal equations are rank-deficient");
    }
  }

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    fit.iterations = iter;
    Eigen::MatrixXd info = information(x.values, trials, beta);
    Eigen::VectorXd score = binomial_score(x.values, successes, trials, beta);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-300) {
      if (probabilities_pinned(x.values, successes, trials, beta)) {
        throw Error(ErrorCode::Separation, "fitted probabilities pinned at 0/1");
      }
      throw Error(ErrorCode::Singular, "information matrix lost definiteness at iteration " + std::to_string(iter));
    }
    Eigen::VectorXd step = ldlt.solve(score);

    // Step-halving keeps the log-likelihood non-decreasing.
    double scale = 1.0;
    Eigen::VectorXd candidate = beta + step;
    double candidate_ll = binomial_log_likelihood(x.values, successes, trials, candidate);
    // At the optimum the full step can evaluate an ulp below the current value;
    // such a tie is accepted when it reduces the gradient.
    if (candidate_ll < ll && ll - candidate_ll <= 1e-13 * std::fabs(ll) &&
        binomial_score(x.values, successes, trials, candidate).norm() < score.norm()) {
      candidate_ll = ll;
    }
    for (int halving = 0; halving < 30 && !(candidate_ll >= ll); ++halving) {
      scale *= 0.5;
      candidate = beta + scale * step;
      candidate_ll = binomial_log_likelihood(x.values, successes, trials, candidate);
    }
    if (!(candidate_ll >= ll)) {
      candidate = beta;
      candidate_ll = ll;
    }
    double max_change = (candidate - beta).cwiseAbs().maxCoeff();
    double relative = std::fabs(candidate_ll - ll) / (std::fabs(ll) + 1e-300);
    beta = candidate;
    ll = candidate_ll;
    fit.loglik_trace.push_back(ll);

    if (beta.cwiseAbs().maxCoeff() > options.separation_bound) {
      throw Error(ErrorCode::Separation, "coefficients diverging (|beta| > bound)");
    }
    // The log-likelihood is flat to second order near the optimum, so its
    // change only signals convergence when Newton steps have started to stall.
    if (max_change < options.beta_tolerance || (scale < 1.0 && relative < options.loglik_tolerance)) {
      fit.converged = true;
      break;
    }
  }

  if (probabilities_pinned(x.values, successes, trials, beta)) {
    throw Error(ErrorCode::Separation, "complete separation: fitted probabilities pinned at 0/1");
  }

  fit.coefficients = beta;
  fit.log_likelihood = ll;
  fit.gradient_norm = binomial_score(x.values, successes, trials, beta).norm();
  Eigen::MatrixXd info = information(x.values, trials, beta);
  fit.covariance = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose()).eval();
  return fit;
}

GlmFit fit_logistic(const DesignMatrix& x, const std::vector<bool>& y, const IrlsOptions& options) {
  if (static_cast<Eigen::Index>(y.size()) != x.rows()) throw Error(ErrorCode::InvalidArgument, "y length mismatch");
  Eigen::VectorXd successes(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) successes[i] = y[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  return fit_binomial(x, successes, Eigen::VectorXd::Ones(x.rows()), options);
}

Eigen::MatrixXd cluster_robust_cov(const DesignMatrix& x, const std::vector<bool>& y, const GlmFit& fit,
                                   std::span<const std::int64_t> cluster_ids) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (static_cast<Eigen::Index>(cluster_ids.size()) != n || static_cast<Eigen::Index>(y.size()) != n) {
    throw Error(ErrorCode::InvalidArgument, "cluster ids / outcomes must have one entry per row");
  }
  std::map<std::int64_t, Eigen::VectorXd> scores;
  for (Eigen::Index i = 0; i < n; ++i) {
    double mu = logistic(x.values.row(i).dot(fit.coefficients));
    double residual = (y[static_cast<std::size_t>(i)] ? 1.0 : 0.0) - mu;
    auto [it, inserted] = scores.try_emplace(cluster_ids[static_cast<std::size_t>(i)], Eigen::VectorXd::Zero(p));
    it->second += x.values.row(i).transpose() * residual;
  }
  const auto clusters = static_cast<double>(scores.size());
  if (scores.size() < 2) throw Error(ErrorCode::DegenerateClusters, "need at least two clusters");

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  for (const auto& [id, s] : scores) meat += s * s.transpose();
  Eigen::MatrixXd bread = information(x.values, Eigen::VectorXd::Ones(n), fit.coefficients)
                              .ldlt()
                              .solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd v = bread * meat * bread * (clusters / (clusters - 1.0));
  return 0.5 * (v + v.transpose());
}

WaldResult wald_test(double estimate, double se) {
  if (!(se > 0.0) || !std::isfinite(se)) throw Error(ErrorCode::ZeroVariance, "standard error must be positive");
  WaldResult w;
  w.estimate = estimate;
  w.se = se;
  w.z = estimate / se;
  w.p_value = stats::two_sided_p(w.z);
  w.ci_low = estimate - 1.96 * se;
  w.ci_high = estimate + 1.96 * se;
  return w;
}

WaldResult wald_test(const GlmFit& fit, Eigen::Index coefficient) {
  double variance = fit.covariance(coefficient, coefficient);
  if (!(variance > 0.0)) throw Error(ErrorCode::ZeroVariance, "non-positive variance for coefficient");
  return wald_test(fit.coefficients[coefficient], std::sqrt(variance));
}

nlohmann::json coefficient_table(const GlmFit& fit) {
  nlohmann::json table = nlohmann::json::array();
  for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j) {
    nlohmann::json row;
    row["name"] = j < static_cast<Eigen::Index>(fit.column_names.size()) ? fit.column_names[static_cast<std::size_t>(j)]
                                                                        : "b" + std::to_string(j);
    row["estimate"] = fit.coefficients[j];
    double variance = fit.covariance(j, j);
    if (variance > 0.0) {
      auto w = wald_test(fit.coefficients[j], std::sqrt(variance));
      row["se"] = w.se;
      row["z"] = w.z;
      row["p"] = w.p_value;
    } else {
      row["se"] = nullptr;
      row["z"] = nullptr;
      row["p"] = nullptr;
    }
    table.push_back(row);
  }
  return table;
}

}  // namespace annotaudit::glm
