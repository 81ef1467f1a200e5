#include "annotaudit/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <tuple>

#include <boost/math/tools/minima.hpp>

#include "annotaudit/csv.hpp"
#include "annotaudit/error.hpp"
#include "annotaudit/stats.hpp"

namespace annotaudit::bayes {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double log1p_exp(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }
double inv_logit(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  double e = std::exp(eta);
  return e / (1.0 + e);
}

}  // namespace

void MrpModelSpec::validate() const {
  if (chains < 1) throw Error(ErrorCode::InvalidArgument, "chains must be >= 1");
  if (warmup < 0 || draws_per_chain < 1) throw Error(ErrorCode::InvalidArgument, "bad warmup/draw counts");
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "target_accept must lie in (0, 1)");
  }
  if (!(prior_coef_scale > 0.0) || !(prior_group_scale > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "prior scales must be positive");
  }
}

MrpData build_data(std::span<const AnnotationRecord> records, const std::vector<std::string>& countries) {
  MrpData data;
  data.countries = countries.empty() ? distinct_countries(records) : countries;
  std::map<std::string, int> country_pos;
  for (std::size_t i = 0; i < data.countries.size(); ++i) country_pos[data.countries[i]] = static_cast<int>(i);

  std::set<Gender> genders;
  std::set<AgeGroup> ages;
  std::map<std::tuple<Gender, AgeGroup, int>, std::pair<double, double>> patterns;
  for (const auto& r : records) {
    auto it = country_pos.find(r.country);
    if (it == country_pos.end()) throw Error(ErrorCode::UnknownLevel, "country '" + r.country + "' not in model");
    genders.insert(r.gender);
    ages.insert(r.age_group);
    auto& counts = patterns[{r.gender, r.age_group, it->second}];
    counts.first += r.annotated ? 1.0 : 0.0;
    counts.second += 1.0;
  }
  data.genders.assign(genders.begin(), genders.end());
  data.ages.assign(ages.begin(), ages.end());

  data.fixed_names.push_back("(intercept)");
  for (std::size_t g = 1; g < data.genders.size(); ++g) {
    data.fixed_names.push_back("gender:" + std::string(to_string(data.genders[g])));
  }
  for (std::size_t a = 1; a < data.ages.size(); ++a) {
    data.fixed_names.push_back("age_group:" + std::string(to_string(data.ages[a])));
  }

  const auto n = static_cast<Eigen::Index>(patterns.size());
  const auto p = static_cast<Eigen::Index>(data.fixed_names.size());
  data.x = Eigen::MatrixXd::Zero(n, p);
  data.successes.resize(n);
  data.trials.resize(n);
  Eigen::Index row = 0;
  for (const auto& [key, counts] : patterns) {
    const auto& [gender, age, country] = key;
    data.x(row, 0) = 1.0;
    auto g = std::find(data.genders.begin(), data.genders.end(), gender) - data.genders.begin();
    if (g > 0) data.x(row, g) = 1.0;
    auto a = std::find(data.ages.begin(), data.ages.end(), age) - data.ages.begin();
    if (a > 0) data.x(row, static_cast<Eigen::Index>(data.genders.size()) - 1 + a) = 1.0;
    data.successes[row] = counts.first;
    data.trials[row] = counts.second;
    data.country_index.push_back(country);
    ++row;
  }
  return data;
}

MrpData empty_data(std::size_t fixed_columns, std::size_t countries) {
  MrpData data;
  data.x = Eigen::MatrixXd::Zero(0, static_cast<Eigen::Index>(fixed_columns));
  data.successes.resize(0);
  data.trials.resize(0);
  for (std::size_t j = 0; j < fixed_columns; ++j) data.fixed_names.push_back(j == 0 ? "(intercept)" : "b" + std::to_string(j));
  for (std::size_t c = 0; c < countries; ++c) data.countries.push_back("c" + std::to_string(c));
  return data;
}

double log_posterior(const MrpModelSpec& spec, const MrpData& data, const Eigen::VectorXd& theta,
                     Eigen::VectorXd* gradient) {
  const Eigen::Index p = data.fixed_count();
  const Eigen::Index c = data.country_count();
  if (theta.size() != p + c + 1) throw Error(ErrorCode::InvalidArgument, "parameter vector has wrong length");
  if (!theta.allFinite()) throw Error(ErrorCode::NonFinite, "parameter vector contains non-finite values");

  const auto beta = theta.head(p);
  const auto u = theta.segment(p, c);
  const double tau = theta[p + c];
  const double sigma = std::exp(tau);
  const double s2 = spec.prior_coef_scale * spec.prior_coef_scale;
  const double rate = 1.0 / spec.prior_group_scale;

  if (gradient) gradient->setZero(theta.size());

  double value = 0.0;
  Eigen::VectorXd eta = data.x * beta;
  Eigen::VectorXd residual(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const int g = data.country_index[static_cast<std::size_t>(i)];
    eta[i] += u[g];
    value += data.successes[i] * eta[i] - data.trials[i] * log1p_exp(eta[i]);
    residual[i] = data.successes[i] - data.trials[i] * inv_logit(eta[i]);
  }

  value += -0.5 * static_cast<double>(p) * (kLog2Pi + std::log(s2)) - 0.5 * beta.squaredNorm() / s2;
  const double u2 = u.squaredNorm();
  value += -0.5 * static_cast<double>(c) * kLog2Pi - static_cast<double>(c) * tau - 0.5 * u2 / (sigma * sigma);
  value += std::log(rate) - rate * sigma + tau;

  if (gradient) {
    auto& g = *gradient;
    g.head(p) = data.x.transpose() * residual - beta / s2;
    for (Eigen::Index i = 0; i < residual.size(); ++i) g[p + data.country_index[static_cast<std::size_t>(i)]] += residual[i];
    g.segment(p, c) -= u / (sigma * sigma);
    g[p + c] = -static_cast<double>(c) + u2 / (sigma * sigma) - rate * sigma + 1.0;
  }
  if (!std::isfinite(value)) throw Error(ErrorCode::NonFinite, "log posterior is not finite");
  return value;
}

namespace {

std::vector<std::string> column_names_for(const MrpData& data) {
  std::vector<std::string> names = data.fixed_names;
  for (const auto& country : data.countries) names.push_back("u[" + country + "]");
  names.push_back("log_sigma_u");
  return names;
}

PosteriorDraws empty_draws(const MrpModelSpec& spec, const MrpData& data, std::string engine) {
  PosteriorDraws out;
  out.column_names = column_names_for(data);
  out.fixed_count = data.fixed_count();
  out.countries = data.countries;
  out.genders = data.genders;
  out.ages = data.ages;
  out.chains = spec.chains;
  out.draws_per_chain = spec.draws_per_chain;
  out.engine = std::move(engine);
  out.draws.resize(static_cast<Eigen::Index>(spec.chains) * spec.draws_per_chain, data.dimension());
  return out;
}

}  // namespace

PosteriorDraws sample_hmc(const MrpModelSpec& spec, const MrpData& data) {
  spec.validate();
  PosteriorDraws out = empty_draws(spec, data, "hmc");
  const Eigen::Index dim = data.dimension();

  hmc::SamplerOptions options;
  options.warmup = spec.warmup;
  options.draws = spec.draws_per_chain;
  options.target_accept = spec.target_accept;

  hmc::LogDensity density = [&](const Eigen::VectorXd& q, Eigen::VectorXd& grad) -> double {
    if (!q.allFinite()) return -std::numeric_limits<double>::infinity();
    try {
      return log_posterior(spec, data, q, &grad);
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  double accept_sum = 0.0;
  int total_draws = 0;
  int divergent_draws = 0;
  for (int chain = 0; chain < spec.chains; ++chain) {
    std::mt19937_64 init_rng(stats::mix_seed(spec.seed, 2 * static_cast<std::uint64_t>(chain) + 1));
    std::uniform_real_distribution<double> jitter(-0.1, 0.1);
    Eigen::VectorXd init = Eigen::VectorXd::Zero(dim);
    init[dim - 1] = std::log(spec.prior_group_scale);
    for (Eigen::Index j = 0; j < dim; ++j) init[j] += jitter(init_rng);
    Eigen::VectorXd scratch(dim);
    if (!std::isfinite(density(init, scratch))) {
      throw Error(ErrorCode::NonFinite, "log posterior not finite at the initial point");
    }

    auto result = hmc::run_chain(density, init, options, stats::mix_seed(spec.seed, 2 * static_cast<std::uint64_t>(chain)));
    out.draws.middleRows(static_cast<Eigen::Index>(chain) * spec.draws_per_chain, spec.draws_per_chain) = result.draws;
    out.divergence_count += result.divergences;
    out.chain_acceptance.push_back(result.mean_accept);
    out.chain_step_size.push_back(result.step_size);
    for (double a : result.accept_stats) accept_sum += a;
    total_draws += spec.draws_per_chain;
    divergent_draws += result.divergences;
  }
  if (divergent_draws == total_draws) throw Error(ErrorCode::AllDivergent, "every transition diverged");
  if (accept_sum / total_draws < 0.5) {
    throw Error(ErrorCode::AdaptationFailure,
                "mean acceptance " + std::to_string(accept_sum / total_draws) + " after warmup is below 0.5");
  }
  return out;
}

namespace {

// Conditional posterior of z = (beta, u) given tau, and its Gaussian approximation.
struct ConditionalMode {
  Eigen::VectorXd z;
  Eigen::MatrixXd precision;  // negative Hessian at z
  double log_density = 0.0;   // beta/u terms only (likelihood + priors), normalized priors
};

double conditional_log_density(const MrpModelSpec& spec, const MrpData& data, const Eigen::VectorXd& z, double tau,
                               Eigen::VectorXd* gradient, Eigen::MatrixXd* precision) {
  const Eigen::Index p = data.fixed_count();
  const Eigen::Index c = data.country_count();
  Eigen::VectorXd theta(p + c + 1);
  theta << z, tau;
  Eigen::VectorXd full_grad;
  double value = log_posterior(spec, data, theta, gradient ? &full_grad : nullptr);
  const double sigma = std::exp(tau);
  const double rate = 1.0 / spec.prior_group_scale;
  value -= std::log(rate) - rate * sigma + tau;  // keep only the terms that involve z
  if (gradient) *gradient = full_grad.head(p + c);
  if (precision) {
    const double s2 = spec.prior_coef_scale * spec.prior_coef_scale;
    precision->setZero(p + c, p + c);
    auto& h = *precision;
    for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
      const int g = data.country_index[static_cast<std::size_t>(i)];
      double eta = data.x.row(i).dot(z.head(p)) + z[p + g];
      double mu = inv_logit(eta);
      double w = data.trials[i] * mu * (1.0 - mu);
      Eigen::VectorXd row(p + c);
      row.setZero();
      row.head(p) = data.x.row(i).transpose();
      row[p + g] = 1.0;
      h.noalias() += w * row * row.transpose();
    }
    for (Eigen::Index j = 0; j < p; ++j) h(j, j) += 1.0 / s2;
    for (Eigen::Index j = 0; j < c; ++j) h(p + j, p + j) += 1.0 / (sigma * sigma);
  }
  return value;
}

ConditionalMode find_mode(const MrpModelSpec& spec, const MrpData& data, double tau, Eigen::VectorXd start) {
  ConditionalMode mode;
  mode.z = std::move(start);
  Eigen::VectorXd grad;
  Eigen::MatrixXd precision;
  double value = conditional_log_density(spec, data, mode.z, tau, &grad, &precision);
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::HessianNotPD, "conditional Hessian not negative definite");
    Eigen::VectorXd step = llt.solve(grad);
    double scale = 1.0;
    Eigen::VectorXd candidate = mode.z + step;
    double candidate_value = conditional_log_density(spec, data, candidate, tau, nullptr, nullptr);
    for (int h = 0; h < 30 && !(candidate_value >= value); ++h) {
      scale *= 0.5;
      candidate = mode.z + scale * step;
      candidate_value = conditional_log_density(spec, data, candidate, tau, nullptr, nullptr);
    }
    if (!(candidate_value >= value)) break;
    double change = (candidate - mode.z).cwiseAbs().maxCoeff();
    mode.z = candidate;
    value = conditional_log_density(spec, data, mode.z, tau, &grad, &precision);
    if (change < 1e-10) break;
  }
  mode.precision = precision;
  mode.log_density = value;
  return mode;
}

}  // namespace

PosteriorDraws laplace_fit(const MrpModelSpec& spec, const MrpData& data) {
  spec.validate();
  PosteriorDraws out = empty_draws(spec, data, "laplace");
  out.approximate = true;
  const Eigen::Index p = data.fixed_count();
  const Eigen::Index c = data.country_count();
  const Eigen::Index d = p + c;
  const double rate = 1.0 / spec.prior_group_scale;

  Eigen::VectorXd warm = Eigen::VectorXd::Zero(d);
  // Laplace-approximated log marginal density of tau = log sigma_u.
  auto marginal = [&](double tau) {
    ConditionalMode mode = find_mode(spec, data, tau, warm);
    Eigen::LLT<Eigen::MatrixXd> llt(mode.precision);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::HessianNotPD, "precision not positive definite");
    double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    warm = mode.z;
    return mode.log_density + 0.5 * static_cast<double>(d) * kLog2Pi - 0.5 * log_det + std::log(rate) -
           rate * std::exp(tau) + tau;
  };

  const double lo = std::log(1e-3);
  const double hi = std::log(10.0);
  auto [tau_hat, neg_best] =
      boost::math::tools::brent_find_minima([&](double t) { return -marginal(t); }, lo, hi, 40);
  (void)neg_best;
  const double h = 1e-3;
  double curvature = (marginal(tau_hat + h) - 2.0 * marginal(tau_hat) + marginal(tau_hat - h)) / (h * h);
  if (!(curvature < 0.0) || !std::isfinite(curvature)) {
    throw Error(ErrorCode::HessianNotPD, "log sigma_u marginal has no curvature at its maximum");
  }
  const double tau_sd = std::sqrt(-1.0 / curvature);

  // Draws for tau come from a stratified grid of its Gaussian approximation;
  // each grid point carries its own conditional Gaussian for (beta, u).
  const int grid = 20;
  std::vector<double> taus(grid);
  std::vector<Eigen::VectorXd> modes(grid);
  std::vector<Eigen::MatrixXd> factors(grid);
  for (int k = 0; k < grid; ++k) {
    taus[static_cast<std::size_t>(k)] = tau_hat + tau_sd * stats::normal_quantile((k + 0.5) / grid);
    ConditionalMode mode = find_mode(spec, data, taus[static_cast<std::size_t>(k)], warm);
    Eigen::LLT<Eigen::MatrixXd> llt(mode.precision);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::HessianNotPD, "precision not positive definite");
    modes[static_cast<std::size_t>(k)] = mode.z;
    factors[static_cast<std::size_t>(k)] = llt.matrixU();
  }

  std::mt19937_64 rng(stats::mix_seed(spec.seed, 0x4c41504cULL));
  std::normal_distribution<double> normal;
  const Eigen::Index total = out.draws.rows();
  Eigen::VectorXd eps(d);
  for (Eigen::Index s = 0; s < total; ++s) {
    const auto k = static_cast<std::size_t>(s % grid);
    for (Eigen::Index j = 0; j < d; ++j) eps[j] = normal(rng);
    // precision = U^T U, so U^{-1} eps has covariance precision^{-1}.
    Eigen::VectorXd z = modes[k] + factors[k].triangularView<Eigen::Upper>().solve(eps);
    out.draws.row(s).head(d) = z.transpose();
    out.draws(s, d) = taus[k];
  }
  out.chain_acceptance.assign(static_cast<std::size_t>(spec.chains), 1.0);
  out.chain_step_size.assign(static_cast<std::size_t>(spec.chains), 0.0);
  return out;
}

namespace {

std::vector<std::vector<double>> split_chains(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  for (const auto& chain : chains) {
    const std::size_t half = chain.size() / 2;
    if (half == 0) continue;
    halves.emplace_back(chain.begin(), chain.begin() + static_cast<std::ptrdiff_t>(half));
    halves.emplace_back(chain.end() - static_cast<std::ptrdiff_t>(half), chain.end());
  }
  return halves;
}

std::vector<std::vector<double>> rank_normalize(const std::vector<std::vector<double>>& chains) {
  std::vector<double> pooled;
  for (const auto& chain : chains) pooled.insert(pooled.end(), chain.begin(), chain.end());
  auto ranks = stats::average_ranks(pooled);
  const double s = static_cast<double>(pooled.size());
  std::vector<std::vector<double>> out;
  std::size_t pos = 0;
  for (const auto& chain : chains) {
    std::vector<double> z(chain.size());
    for (auto& v : z) v = stats::normal_quantile((ranks[pos++] - 0.375) / (s + 0.25));
    out.push_back(std::move(z));
  }
  return out;
}

double classic_rhat(const std::vector<std::vector<double>>& chains) {
  const double m = static_cast<double>(chains.size());
  const double n = static_cast<double>(chains.front().size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& chain : chains) {
    means.push_back(stats::mean(chain));
    w += stats::variance(chain);
  }
  w /= m;
  const double b = n * stats::variance(means);
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

bool constant(const std::vector<std::vector<double>>& chains) {
  for (const auto& chain : chains) {
    for (double v : chain) {
      if (v != chains.front().front()) return false;
    }
  }
  return true;
}

double ess_of(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  if (n < 4) return static_cast<double>(m * n);
  std::vector<double> means(m);
  std::vector<double> variances(m);
  for (std::size_t k = 0; k < m; ++k) {
    means[k] = stats::mean(chains[k]);
    variances[k] = stats::variance(chains[k]);
  }
  const double w = stats::mean(variances);
  const double nn = static_cast<double>(n);
  const double var_plus = (nn - 1.0) / nn * w + (m > 1 ? stats::variance(means) : 0.0);

  auto rho = [&](std::size_t lag) {
    double acov = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      double sum = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) sum += (chains[k][i] - means[k]) * (chains[k][i + lag] - means[k]);
      acov += sum / nn;
    }
    acov /= static_cast<double>(m);
    return 1.0 - (w - acov) / var_plus;
  };

  // Geyer's initial monotone sequence over pairs of autocorrelations.
  double tau = -1.0;
  double previous = INFINITY;
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    double pair = (t == 0 ? 1.0 : rho(t)) + rho(t + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, previous);
    previous = pair;
    tau += 2.0 * pair;
  }
  const double total = static_cast<double>(m) * nn;
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

}  // namespace

double split_rhat(const std::vector<std::vector<double>>& chains) {
  auto halves = split_chains(chains);
  if (halves.size() < 2) return NAN;
  double bulk = classic_rhat(rank_normalize(halves));
  std::vector<double> pooled;
  for (const auto& h : halves) pooled.insert(pooled.end(), h.begin(), h.end());
  const double med = stats::median(pooled);
  auto folded = halves;
  for (auto& h : folded) {
    for (auto& v : h) v = std::fabs(v - med);
  }
  double tail = classic_rhat(rank_normalize(folded));
  return std::max(bulk, tail);
}

double bulk_ess(const std::vector<std::vector<double>>& chains) {
  auto halves = split_chains(chains);
  if (halves.empty()) return 0.0;
  return ess_of(rank_normalize(halves));
}

Diagnostics convergence_diagnostics(const PosteriorDraws& draws, double rhat_threshold) {
  Diagnostics out;
  out.single_chain = draws.chains < 2;
  out.max_rhat = 0.0;
  out.min_ess = INFINITY;
  for (Eigen::Index j = 0; j < draws.draws.cols(); ++j) {
    std::vector<std::vector<double>> chains(static_cast<std::size_t>(draws.chains));
    for (int c = 0; c < draws.chains; ++c) {
      auto& chain = chains[static_cast<std::size_t>(c)];
      chain.resize(static_cast<std::size_t>(draws.draws_per_chain));
      for (int i = 0; i < draws.draws_per_chain; ++i) {
        chain[static_cast<std::size_t>(i)] = draws.draws(static_cast<Eigen::Index>(c) * draws.draws_per_chain + i, j);
      }
    }
    ParameterDiagnostics param;
    param.name = j < static_cast<Eigen::Index>(draws.column_names.size()) ? draws.column_names[static_cast<std::size_t>(j)]
                                                                          : "theta" + std::to_string(j);
    if (constant(chains)) {
      param.degenerate = true;
      param.ess = NAN;
      out.converged = false;
    } else {
      param.ess = bulk_ess(chains);
      out.min_ess = std::min(out.min_ess, param.ess);
      if (!out.single_chain) {
        param.rhat = split_rhat(chains);
        out.max_rhat = std::max(out.max_rhat, *param.rhat);
        if (!(*param.rhat <= rhat_threshold)) out.converged = false;
      }
    }
    out.parameters.push_back(std::move(param));
  }
  if (!std::isfinite(out.min_ess)) out.min_ess = 0.0;
  return out;
}

void write_draws_csv(std::ostream& out, const PosteriorDraws& draws, const std::vector<std::string>& comments) {
  csv::Writer writer(out);
  for (const auto& c : comments) writer.comment(c);
  writer.comment("item_id=" + draws.item_id + " label_id=" + draws.label_id + " engine=" + draws.engine +
                 (draws.approximate ? " approximate=true" : ""));
  std::vector<std::string> header = {"chain", "draw"};
  header.insert(header.end(), draws.column_names.begin(), draws.column_names.end());
  writer.row(header);
  std::vector<std::string> fields;
  for (Eigen::Index s = 0; s < draws.draws.rows(); ++s) {
    fields.clear();
    fields.push_back(std::to_string(s / draws.draws_per_chain));
    fields.push_back(std::to_string(s % draws.draws_per_chain));
    for (Eigen::Index j = 0; j < draws.draws.cols(); ++j) fields.push_back(csv::format_double(draws.draws(s, j)));
    writer.row(fields);
  }
}

nlohmann::json summarize(const PosteriorDraws& draws, const Diagnostics& diagnostics) {
  nlohmann::json params = nlohmann::json::array();
  for (Eigen::Index j = 0; j < draws.draws.cols(); ++j) {
    std::vector<double> column(draws.draws.col(j).data(), draws.draws.col(j).data() + draws.draws.rows());
    nlohmann::json entry;
    entry["name"] = draws.column_names[static_cast<std::size_t>(j)];
    entry["mean"] = stats::mean(column);
    entry["sd"] = stats::sd(column);
    entry["q05"] = stats::quantile(column, 0.05);
    entry["q50"] = stats::quantile(column, 0.5);
    entry["q95"] = stats::quantile(column, 0.95);
    const auto& d = diagnostics.parameters[static_cast<std::size_t>(j)];
    entry["rhat"] = d.rhat ? nlohmann::json(*d.rhat) : nlohmann::json(nullptr);
    entry["ess"] = std::isfinite(d.ess) ? nlohmann::json(d.ess) : nlohmann::json(nullptr);
    entry["degenerate"] = d.degenerate;
    params.push_back(entry);
  }
  return {{"item_id", draws.item_id},
          {"label_id", draws.label_id},
          {"engine", draws.engine},
          {"approximate", draws.approximate},
          {"chains", draws.chains},
          {"draws_per_chain", draws.draws_per_chain},
          {"divergences", draws.divergence_count},
          {"chain_acceptance", draws.chain_acceptance},
          {"converged", diagnostics.converged},
          {"parameters", params}};
}

}  // namespace annotaudit::bayes
