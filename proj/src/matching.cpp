#include "annotaudit/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <unordered_set>

#include "annotaudit/csv.hpp"
#include "annotaudit/error.hpp"
#include "annotaudit/glm.hpp"
#include "annotaudit/stats.hpp"

namespace annotaudit::matching {

void MatchSpec::validate() const {
  if (!(caliper > 0.0)) throw Error(ErrorCode::InvalidArgument, "caliper must be positive");
  if (min_english_play_frequency < 0 || min_english_play_frequency > 5) {
    throw Error(ErrorCode::InvalidArgument, "eligibility threshold must lie in 0..5");
  }
}

std::vector<Unit> eligible_units(std::span<const AnnotationRecord> records, const MatchSpec& spec) {
  std::vector<Unit> units;
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.respondent_id).second) continue;
    if (r.english_play_frequency < spec.min_english_play_frequency) continue;
    const bool english = r.survey_language == spec.treatment_language;
    const bool treated = english && (r.ambassador || !spec.require_ambassador);
    if (english && !treated) continue;
    Unit u;
    u.respondent_id = r.respondent_id;
    u.treated = treated;
    u.covariates << age_code(r.age_group), r.gender == Gender::Male ? 1.0 : 0.0, r.play_frequency,
        r.english_play_frequency;
    units.push_back(std::move(u));
  }
  std::sort(units.begin(), units.end(), [](const Unit& a, const Unit& b) { return a.respondent_id < b.respondent_id; });
  return units;
}

double mahalanobis(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const Eigen::MatrixXd& s) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw Error(ErrorCode::SingularCovariance, "covariance matrix is not positive definite");
  }
  Eigen::VectorXd d = u - v;
  double q = d.dot(ldlt.solve(d));
  return std::sqrt(std::max(0.0, q));
}

double standardized_mean_difference(double mean_treated, double mean_control, double pooled_sd) {
  const double diff = mean_treated - mean_control;
  if (pooled_sd > 0.0) return diff / pooled_sd;
  if (diff == 0.0) return 0.0;
  return diff > 0 ? INFINITY : -INFINITY;
}

double standardized_mean_difference(std::span<const double> treated, std::span<const double> control) {
  double pooled = std::sqrt(0.5 * (stats::variance(treated) + stats::variance(control)));
  return standardized_mean_difference(stats::mean(treated), stats::mean(control), pooled);
}

namespace {

Eigen::MatrixXd pooled_within_covariance(std::span<const Unit> units) {
  Eigen::Vector4d mean_t = Eigen::Vector4d::Zero(), mean_c = Eigen::Vector4d::Zero();
  double n_t = 0, n_c = 0;
  for (const auto& u : units) {
    if (u.treated) {
      mean_t += u.covariates;
      ++n_t;
    } else {
      mean_c += u.covariates;
      ++n_c;
    }
  }
  mean_t /= std::max(1.0, n_t);
  mean_c /= std::max(1.0, n_c);
  Eigen::Matrix4d s = Eigen::Matrix4d::Zero();
  for (const auto& u : units) {
    Eigen::Vector4d d = u.covariates - (u.treated ? mean_t : mean_c);
    s += d * d.transpose();
  }
  const double dof = n_t + n_c - 2.0;
  if (dof > 0) s /= dof;
  return s;
}

// Adds a small ridge when the covariance is (near) singular.
Eigen::MatrixXd regularize(Eigen::MatrixXd s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  const double max_ev = eig.eigenvalues().maxCoeff();
  const double min_ev = eig.eigenvalues().minCoeff();
  if (!(min_ev > 1e-12 * std::max(1.0, max_ev))) s += 1e-8 * Eigen::MatrixXd::Identity(s.rows(), s.cols());
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularCovariance, "covariance singular after ridge");
  return s;
}

std::vector<Balance> compute_balance(std::span<const Unit> units, const std::vector<Pair>& pairs) {
  std::map<std::string, const Unit*> by_id;
  for (const auto& u : units) by_id[u.respondent_id] = &u;
  std::vector<Balance> out;
  for (std::size_t k = 0; k < covariate_names().size(); ++k) {
    std::vector<double> t, c, mt, mc;
    for (const auto& u : units) (u.treated ? t : c).push_back(u.covariates[static_cast<Eigen::Index>(k)]);
    for (const auto& p : pairs) {
      mt.push_back(by_id.at(p.treated_id)->covariates[static_cast<Eigen::Index>(k)]);
      mc.push_back(by_id.at(p.control_id)->covariates[static_cast<Eigen::Index>(k)]);
    }
    const double pooled = std::sqrt(0.5 * (stats::variance(t) + stats::variance(c)));
    Balance b;
    b.covariate = covariate_names()[k];
    b.smd_before = standardized_mean_difference(stats::mean(t), stats::mean(c), pooled);
    b.smd_after = pairs.empty() ? NAN : standardized_mean_difference(stats::mean(mt), stats::mean(mc), pooled);
    out.push_back(b);
  }
  return out;
}

}  // namespace

MatchedSample match(std::span<const Unit> units, const MatchSpec& spec) {
  spec.validate();
  std::vector<std::size_t> treated, controls;
  for (std::size_t i = 0; i < units.size(); ++i) (units[i].treated ? treated : controls).push_back(i);
  if (treated.empty() || controls.empty()) {
    throw Error(ErrorCode::NoEligibleUnits, "need at least one eligible treated and one eligible control unit");
  }

  MatchedSample sample;
  sample.treated_count = treated.size();
  sample.control_count = controls.size();
  const Eigen::MatrixXd s = regularize(pooled_within_covariance(units));
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  auto distance = [&](const Unit& a, const Unit& b) {
    Eigen::Vector4d d = a.covariates - b.covariates;
    return std::sqrt(std::max(0.0, d.dot(ldlt.solve(d))));
  };

  // Propensity logits from a logistic regression on the non-constant covariates.
  std::vector<double> logit(units.size(), 0.0);
  bool use_propensity = spec.caliper_mode == CaliperMode::PropensityLogit;
  if (use_propensity) {
    try {
      std::vector<Eigen::Index> columns;
      for (Eigen::Index k = 0; k < 4; ++k) {
        double first = units.front().covariates[k];
        bool varies = std::any_of(units.begin(), units.end(), [&](const Unit& u) { return u.covariates[k] != first; });
        if (varies) columns.push_back(k);
      }
      glm::DesignMatrix x;
      x.values.resize(static_cast<Eigen::Index>(units.size()), static_cast<Eigen::Index>(columns.size()) + 1);
      x.column_names = {"(intercept)"};
      for (auto k : columns) x.column_names.push_back(covariate_names()[static_cast<std::size_t>(k)]);
      std::vector<bool> y;
      for (std::size_t i = 0; i < units.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        x.values(r, 0) = 1.0;
        for (std::size_t j = 0; j < columns.size(); ++j) {
          x.values(r, static_cast<Eigen::Index>(j) + 1) = units[i].covariates[columns[j]];
        }
        y.push_back(units[i].treated);
      }
      auto fit = glm::fit_logistic(x, y);
      Eigen::VectorXd eta = x.values * fit.coefficients;
      for (std::size_t i = 0; i < units.size(); ++i) logit[i] = eta[static_cast<Eigen::Index>(i)];
      sample.caliper_width = spec.caliper * stats::sd(logit);
    } catch (const Error& e) {
      use_propensity = false;
      sample.propensity_fallback = true;
      sample.fallback_reason = e.what();
    }
  } else {
    sample.caliper_width = spec.caliper;
  }

  std::stable_sort(treated.begin(), treated.end(),
                   [&](std::size_t a, std::size_t b) { return logit[a] > logit[b]; });
  std::mt19937_64 rng(spec.seed);
  std::shuffle(controls.begin(), controls.end(), rng);

  std::vector<bool> used(units.size(), false);
  for (std::size_t t : treated) {
    std::optional<std::size_t> best;
    double best_distance = INFINITY;
    for (std::size_t c : controls) {
      if (used[c]) continue;
      if (use_propensity && std::fabs(logit[t] - logit[c]) > sample.caliper_width) continue;
      double d = distance(units[t], units[c]);
      if (spec.caliper_mode == CaliperMode::Mahalanobis && !sample.propensity_fallback && d > spec.caliper) continue;
      if (d < best_distance) {
        best_distance = d;
        best = c;
      }
    }
    if (!best) {
      ++sample.unmatched_treated;
      continue;
    }
    used[*best] = true;
    sample.pairs.push_back({sample.pairs.size(), units[t].respondent_id, units[*best].respondent_id, best_distance});
  }

  std::set<std::string> ids;
  for (const auto& p : sample.pairs) {
    if (!ids.insert(p.treated_id).second || !ids.insert(p.control_id).second) {
      throw Error(ErrorCode::InvalidArgument, "respondent matched twice");
    }
  }
  sample.balance = compute_balance(units, sample.pairs);
  return sample;
}

MatchedSample match(std::span<const AnnotationRecord> records, const MatchSpec& spec) {
  auto units = eligible_units(records, spec);
  return match(units, spec);
}

std::vector<Balance> balance_table(const MatchedSample& sample) { return sample.balance; }

LanguageEffect language_effect(const MatchedSample& sample, const std::map<std::string, bool>& outcomes) {
  std::vector<std::pair<bool, bool>> pairs;
  for (const auto& p : sample.pairs) {
    auto t = outcomes.find(p.treated_id);
    auto c = outcomes.find(p.control_id);
    if (t == outcomes.end() || c == outcomes.end()) continue;
    pairs.emplace_back(t->second, c->second);
  }
  if (pairs.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two matched pairs with outcomes");

  LanguageEffect e;
  e.pairs = pairs.size();
  std::vector<double> yt, yc, d;
  for (auto [t, c] : pairs) {
    yt.push_back(t);
    yc.push_back(c);
    d.push_back(static_cast<double>(t) - static_cast<double>(c));
  }
  e.mean_treated = stats::mean(yt);
  e.mean_control = stats::mean(yc);
  e.mean_diff = e.mean_treated - e.mean_control;
  const double se = stats::sd(d) / std::sqrt(static_cast<double>(pairs.size()));
  e.diff_ci_low = e.mean_diff - 1.96 * se;
  e.diff_ci_high = e.mean_diff + 1.96 * se;

  const auto n = static_cast<Eigen::Index>(2 * pairs.size());
  glm::DesignMatrix x;
  x.values.resize(n, 2);
  x.column_names = {"(intercept)", "treated"};
  std::vector<bool> y;
  std::vector<std::int64_t> clusters;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(2 * i);
    x.values.row(r) << 1.0, 1.0;
    x.values.row(r + 1) << 1.0, 0.0;
    y.push_back(pairs[i].first);
    y.push_back(pairs[i].second);
    clusters.push_back(static_cast<std::int64_t>(i));
    clusters.push_back(static_cast<std::int64_t>(i));
  }
  try {
    auto fit = glm::fit_logistic(x, y);
    fit.covariance = glm::cluster_robust_cov(x, y, fit, clusters);
    auto w = glm::wald_test(fit, 1);
    e.odds_ratio = std::exp(w.estimate);
    e.or_ci_low = std::exp(w.ci_low);
    e.or_ci_high = std::exp(w.ci_high);
    e.p_value = w.p_value;
  } catch (const Error& err) {
    switch (err.code()) {
      case ErrorCode::NoVariation:
        e.note = "no outcome variation";
        break;
      case ErrorCode::Separation:
        e.note = "separation: odds ratio undefined";
        break;
      default:
        e.note = err.what();
    }
  }
  return e;
}

Sweep language_effect_sweep(std::span<const AnnotationRecord> records,
                            std::span<const mrp::ConsistencyVerdict> verdicts, const MatchSpec& spec,
                            double significance) {
  std::map<std::pair<std::string, std::string>, mrp::Classification> classes;
  for (const auto& v : verdicts) classes[{v.item_id, v.label_id}] = v.classification;

  std::map<std::string, std::vector<AnnotationRecord>> by_country;
  for (const auto& r : records) by_country[r.country].push_back(r);

  Sweep sweep;
  std::size_t sig_inc = 0, tot_inc = 0, sig_con = 0, tot_con = 0;
  for (const auto& [country, rows] : by_country) {
    std::map<std::pair<std::string, std::string>, std::map<std::string, bool>> outcomes;
    for (const auto& r : rows) outcomes[{r.item_id, r.label_id}][r.respondent_id] = r.annotated;

    MatchSpec local = spec;
    local.seed = stats::mix_seed(spec.seed, stats::hash_string(country));
    MatchedSample sample;
    try {
      sample = match(std::span<const AnnotationRecord>(rows), local);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoEligibleUnits && e.code() != ErrorCode::SingularCovariance) throw;
      sweep.infeasible += outcomes.size();
      continue;
    }
    for (const auto& [key, y] : outcomes) {
      ContextEffect ctx;
      ctx.country = country;
      ctx.item_id = key.first;
      ctx.label_id = key.second;
      if (auto it = classes.find(key); it != classes.end()) ctx.classification = it->second;
      try {
        ctx.effect = language_effect(sample, y);
      } catch (const Error&) {
        ++sweep.infeasible;
        continue;
      }
      if (ctx.classification && ctx.effect.p_value) {
        bool significant = *ctx.effect.p_value < significance;
        if (*ctx.classification == mrp::Classification::Inconsistent) {
          ++tot_inc;
          sig_inc += significant;
        } else {
          ++tot_con;
          sig_con += significant;
        }
      }
      sweep.contexts.push_back(std::move(ctx));
    }
    sweep.samples[country] = std::move(sample);
  }
  if (tot_inc > 0) sweep.share_significant_inconsistent = static_cast<double>(sig_inc) / static_cast<double>(tot_inc);
  if (tot_con > 0) sweep.share_significant_consistent = static_cast<double>(sig_con) / static_cast<double>(tot_con);
  if (sweep.contexts.empty()) sweep.notices.push_back("no feasible matching context");
  return sweep;
}

namespace {
std::string opt(const std::optional<double>& v) { return v ? csv::format_double(*v) : "NA"; }
}  // namespace

void write_matches_csv(std::ostream& out, const std::map<std::string, MatchedSample>& samples,
                       const std::vector<std::string>& comments) {
  csv::Writer writer(out);
  for (const auto& c : comments) writer.comment(c);
  writer.row({"country", "pair_id", "treated_id", "control_id", "distance"});
  for (const auto& [country, s] : samples) {
    for (const auto& p : s.pairs) {
      writer.row({country, std::to_string(p.pair_id), p.treated_id, p.control_id, csv::format_double(p.distance)});
    }
  }
}

void write_balance_csv(std::ostream& out, const std::map<std::string, MatchedSample>& samples,
                       const std::vector<std::string>& comments) {
  csv::Writer writer(out);
  for (const auto& c : comments) writer.comment(c);
  writer.row({"country", "covariate", "smd_before", "smd_after", "pairs", "unmatched_treated", "propensity_fallback"});
  for (const auto& [country, s] : samples) {
    for (const auto& b : s.balance) {
      writer.row({country, b.covariate, csv::format_double(b.smd_before), csv::format_double(b.smd_after),
                  std::to_string(s.pairs.size()), std::to_string(s.unmatched_treated),
                  s.propensity_fallback ? "true" : "false"});
    }
  }
}

void write_effects_csv(std::ostream& out, std::span<const ContextEffect> effects,
                       const std::vector<std::string>& comments) {
  csv::Writer writer(out);
  for (const auto& c : comments) writer.comment(c);
  writer.row({"country", "item_id", "label_id", "classification", "pairs", "mean_treated", "mean_control", "mean_diff",
              "diff_ci_low", "diff_ci_high", "odds_ratio", "or_ci_low", "or_ci_high", "p_value", "note"});
  for (const auto& c : effects) {
    const auto& e = c.effect;
    writer.row({c.country, c.item_id, c.label_id,
                c.classification ? std::string(mrp::to_string(*c.classification)) : "NA", std::to_string(e.pairs),
                csv::format_double(e.mean_treated), csv::format_double(e.mean_control), csv::format_double(e.mean_diff),
                csv::format_double(e.diff_ci_low), csv::format_double(e.diff_ci_high), opt(e.odds_ratio),
                opt(e.or_ci_low), opt(e.or_ci_high), opt(e.p_value), e.note});
  }
}

}  // namespace annotaudit::matching
