#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "annotaudit/bayes.hpp"
#include "annotaudit/error.hpp"
#include "annotaudit/glm.hpp"
#include "annotaudit/hmc.hpp"
#include "annotaudit/stats.hpp"

using namespace annotaudit;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// One (item, label) context with country and demographic effects on the logit scale.
std::vector<AnnotationRecord> simulate(std::uint64_t seed, int respondents, const std::vector<std::string>& countries,
                                       const std::vector<double>& country_effect, double intercept = -0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<AnnotationRecord> out;
  for (int i = 0; i < respondents; ++i) {
    AnnotationRecord r;
    r.respondent_id = "r" + std::to_string(i);
    std::size_t c = static_cast<std::size_t>(i) % countries.size();
    r.country = countries[c];
    r.gender = u(rng) < 0.5 ? Gender::Female : Gender::Male;
    r.age_group = kAgeGroups[static_cast<std::size_t>(u(rng) * 5) % 5];
    r.item_id = "i";
    r.label_id = "l";
    double eta = intercept + country_effect[c] + (r.gender == Gender::Male ? 0.4 : 0.0) - 0.15 * age_code(r.age_group);
    r.annotated = u(rng) < glm::logistic(eta);
    out.push_back(r);
  }
  return out;
}

double normal_logpdf(double x, double sd) { return -0.5 * kLog2Pi - std::log(sd) - 0.5 * x * x / (sd * sd); }

bayes::MrpModelSpec quick_spec(std::uint64_t seed = 1) {
  bayes::MrpModelSpec spec;
  spec.chains = 2;
  spec.warmup = 300;
  spec.draws_per_chain = 300;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST(Bayes, PriorOnlyValueMatchesDensity) {
  bayes::MrpModelSpec spec;
  auto data = bayes::empty_data(3, 4);
  ASSERT_EQ(data.dimension(), 8);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::VectorXd theta(8);
    for (int j = 0; j < 8; ++j) theta[j] = 0.5 * z(rng);
    double sigma = std::exp(theta[7]);
    double want = 0.0;
    for (int j = 0; j < 3; ++j) want += normal_logpdf(theta[j], 2.5);
    for (int j = 3; j < 7; ++j) want += normal_logpdf(theta[j], sigma);
    want += std::log(2.0) - 2.0 * sigma + theta[7];  // Exponential(mean 0.5) plus log-Jacobian
    EXPECT_NEAR(bayes::log_posterior(spec, data, theta), want, 1e-10);
  }
}

TEST(Bayes, GradientMatchesFiniteDifferences) {
  auto records = simulate(3, 400, {"A", "B", "C"}, {0.3, -0.2, 0.0});
  auto data = bayes::build_data(records);
  bayes::MrpModelSpec spec;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0.0, 0.5);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd theta(data.dimension());
    for (Eigen::Index j = 0; j < theta.size(); ++j) theta[j] = z(rng);
    Eigen::VectorXd g;
    bayes::log_posterior(spec, data, theta, &g);
    Eigen::VectorXd fd(theta.size());
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      Eigen::VectorXd up = theta, dn = theta;
      up[j] += 1e-5;
      dn[j] -= 1e-5;
      fd[j] = (bayes::log_posterior(spec, data, up) - bayes::log_posterior(spec, data, dn)) / 2e-5;
    }
    EXPECT_LT((g - fd).norm() / g.norm(), 1e-6);
  }
}

TEST(Bayes, OutcomeFlipSymmetry) {
  auto records = simulate(5, 200, {"A", "B"}, {0.5, -0.5});
  auto data = bayes::build_data(records);
  auto flipped = data;
  flipped.successes = data.trials - data.successes;
  bayes::MrpModelSpec spec;
  Eigen::VectorXd theta(data.dimension());
  theta.setLinSpaced(-0.4, 0.6);
  Eigen::VectorXd neg = -theta;
  neg[neg.size() - 1] = theta[theta.size() - 1];  // log sigma_u is not flipped
  EXPECT_NEAR(bayes::log_posterior(spec, data, theta), bayes::log_posterior(spec, flipped, neg), 1e-9);
}

TEST(Bayes, NonFiniteInputRejected) {
  auto data = bayes::empty_data(1, 2);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(4);
  theta[1] = std::nan("");
  try {
    bayes::log_posterior(bayes::MrpModelSpec{}, data, theta);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFinite);
  }
}

TEST(Bayes, SpecValidation) {
  bayes::MrpModelSpec spec;
  spec.chains = 0;
  EXPECT_THROW(spec.validate(), Error);
  spec = {};
  spec.target_accept = 1.0;
  EXPECT_THROW(spec.validate(), Error);
  spec = {};
  spec.prior_group_scale = 0.0;
  EXPECT_THROW(spec.validate(), Error);
  EXPECT_NO_THROW(bayes::MrpModelSpec{}.validate());
}

TEST(Bayes, BuildDataAggregatesPatterns) {
  auto records = simulate(6, 300, {"B", "A"}, {0.0, 0.0});
  auto data = bayes::build_data(records);
  EXPECT_EQ(data.countries, (std::vector<std::string>{"A", "B"}));
  EXPECT_NEAR(data.trials.sum(), 300.0, 1e-12);
  double yes = 0;
  for (const auto& r : records) yes += r.annotated;
  EXPECT_NEAR(data.successes.sum(), yes, 1e-12);
  EXPECT_LE(data.x.rows(), 2 * 2 * 5);
  EXPECT_TRUE((data.x.col(0).array() == 1.0).all());
}

TEST(Hmc, StandardNormalCalibration) {
  hmc::LogDensity target = [](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
    g = -q;
    return -0.5 * q.squaredNorm();
  };
  hmc::SamplerOptions opt;
  opt.warmup = 1000;
  opt.draws = 3000;
  auto chain = hmc::run_chain(target, Eigen::VectorXd::Zero(1), opt, 123);
  std::vector<double> d(chain.draws.data(), chain.draws.data() + chain.draws.rows());
  double ess = bayes::bulk_ess({d});
  double sd = stats::sd(d);
  EXPECT_LE(std::abs(stats::mean(d)), 3 * sd / std::sqrt(ess));
  EXPECT_NEAR(sd, 1.0, 0.1);
  EXPECT_GE(chain.mean_accept, opt.target_accept - 0.07);
  EXPECT_LE(chain.mean_accept, 1.0);
  EXPECT_EQ(chain.draws.rows(), 3000);
}

TEST(Hmc, EnergyErrorShrinksWithStepSize) {
  hmc::LogDensity target = [](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
    g = -Eigen::Vector2d(1.0, 4.0).cwiseProduct(q);
    return -0.5 * (q[0] * q[0] + 4.0 * q[1] * q[1]);
  };
  Eigen::VectorXd q(2), p(2);
  q << 0.7, -0.3;
  p << 0.2, 1.1;
  double e1 = hmc::energy_error(target, q, p, 0.2, 5);
  double e2 = hmc::energy_error(target, q, p, 0.1, 10);
  double e3 = hmc::energy_error(target, q, p, 0.05, 20);
  EXPECT_GT(e1, e2);
  EXPECT_GT(e2, e3);
  EXPECT_LT(e3, 1e-2);
}

TEST(Hmc, DualAveragingTracksTarget) {
  hmc::DualAveraging da(1.0, 0.8);
  double step = 1.0;
  // Acceptance falls with step size; the fixed point is step = 0.25.
  for (int i = 0; i < 2000; ++i) step = da.update(std::clamp(1.0 - 0.8 * step, 0.0, 1.0));
  EXPECT_NEAR(da.final_step(), 0.25, 0.03);
}

TEST(Bayes, HmcDeterministicGivenSeed) {
  auto records = simulate(7, 300, {"A", "B", "C"}, {0.4, 0.0, -0.4});
  auto data = bayes::build_data(records);
  auto a = bayes::sample_hmc(quick_spec(9), data);
  auto b = bayes::sample_hmc(quick_spec(9), data);
  EXPECT_EQ(a.draws.rows(), 600);
  EXPECT_TRUE(a.draws == b.draws);
  auto c = bayes::sample_hmc(quick_spec(10), data);
  EXPECT_FALSE(a.draws == c.draws);
  for (Eigen::Index s = 0; s < a.draws.rows(); ++s) EXPECT_GT(a.sigma(s), 0.0);
}

TEST(Bayes, LargeSampleHmcAgreesWithMle) {
  // Plain logistic likelihood, so the IRLS fit is the Bernstein-von Mises centre.
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 2000;
  glm::DesignMatrix x;
  x.values.resize(n, 2);
  x.column_names = {"(intercept)", "x"};
  std::vector<bool> y(n);
  Eigen::VectorXd s(n), t = Eigen::VectorXd::Ones(n);
  for (int i = 0; i < n; ++i) {
    x.values.row(i) << 1.0, z(rng);
    y[static_cast<std::size_t>(i)] = u(rng) < glm::logistic(0.3 + 1.5 * x.values(i, 1));
    s[i] = y[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  }
  auto mle = glm::fit_logistic(x, y);
  hmc::LogDensity target = [&](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
    g = glm::binomial_score(x.values, s, t, q);
    return glm::binomial_log_likelihood(x.values, s, t, q);
  };
  hmc::SamplerOptions opt;
  opt.warmup = 500;
  opt.draws = 800;
  auto chain = hmc::run_chain(target, Eigen::VectorXd::Zero(2), opt, 4);
  for (int j = 0; j < 2; ++j) {
    std::vector<double> d(chain.draws.col(j).data(), chain.draws.col(j).data() + chain.draws.rows());
    EXPECT_LE(std::abs(stats::mean(d) - mle.coefficients[j]), 3 * stats::sd(d));
  }
}

TEST(Bayes, PriorOnlySigmaMeanMatchesPrior) {
  auto data = bayes::empty_data(1, 1);
  bayes::MrpModelSpec spec;
  spec.chains = 4;
  spec.warmup = 1000;
  spec.draws_per_chain = 1000;
  spec.seed = 3;
  auto draws = bayes::sample_hmc(spec, data);
  std::vector<std::vector<double>> chains(4);
  std::vector<double> all;
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < 1000; ++i) {
      double v = draws.sigma(c * 1000 + i);
      chains[static_cast<std::size_t>(c)].push_back(v);
      all.push_back(v);
    }
  }
  double ess = bayes::bulk_ess(chains);
  double mcse = stats::sd(all) / std::sqrt(ess);
  // Direct draws from the exponential prior have mean 0.5 and SD 0.5.
  EXPECT_NEAR(stats::mean(all), 0.5, std::max(4 * mcse, 0.03));
}

TEST(Bayes, LaplaceConstantOutcomeStaysFinite) {
  auto records = simulate(8, 200, {"A", "B"}, {0.0, 0.0});
  for (auto& r : records) r.annotated = true;
  auto data = bayes::build_data(records);
  auto draws = bayes::laplace_fit(quick_spec(), data);
  EXPECT_TRUE(draws.approximate);
  EXPECT_TRUE(draws.draws.allFinite());
  EXPECT_GT(draws.draws.col(0).mean(), 2.0);  // strongly positive intercept, held back by the prior
}

TEST(Bayes, LaplaceCloseToHmc) {
  auto records = simulate(12, 3000, {"A", "B", "C", "D"}, {0.5, 0.1, -0.2, -0.5});
  auto data = bayes::build_data(records);
  auto spec = quick_spec(5);
  spec.chains = 2;
  spec.warmup = 500;
  spec.draws_per_chain = 500;
  auto h = bayes::sample_hmc(spec, data);
  auto l = bayes::laplace_fit(spec, data);
  // Probability of the reference cell in each country.
  for (Eigen::Index c = 0; c < data.country_count(); ++c) {
    double ph = 0, pl = 0;
    for (Eigen::Index s = 0; s < h.draws.rows(); ++s) ph += glm::logistic(h.draws(s, 0) + h.draws(s, data.fixed_count() + c));
    for (Eigen::Index s = 0; s < l.draws.rows(); ++s) pl += glm::logistic(l.draws(s, 0) + l.draws(s, data.fixed_count() + c));
    EXPECT_NEAR(ph / double(h.draws.rows()), pl / double(l.draws.rows()), 0.05);
  }
}

TEST(Diagnostics, IidChainsConverge) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<std::vector<double>> chains(4, std::vector<double>(1000));
  for (auto& c : chains) {
    for (auto& v : c) v = z(rng);
  }
  double r = bayes::split_rhat(chains);
  EXPECT_GE(r, 0.99);
  EXPECT_LE(r, 1.01);
  EXPECT_GT(bayes::bulk_ess(chains), 2000.0);

  for (auto& v : chains[2]) v += 5.0;
  EXPECT_GT(bayes::split_rhat(chains), 1.2);
}

TEST(Diagnostics, ShiftedChainAndConstantColumnFlagged) {
  bayes::PosteriorDraws draws;
  draws.chains = 4;
  draws.draws_per_chain = 500;
  draws.draws = Eigen::MatrixXd::Zero(2000, 2);
  draws.column_names = {"a", "b"};
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z(0.0, 1.0);
  for (Eigen::Index s = 0; s < 2000; ++s) draws.draws(s, 0) = z(rng) + (s >= 1500 ? 5.0 : 0.0);
  auto diag = bayes::convergence_diagnostics(draws);
  EXPECT_FALSE(diag.converged);
  EXPECT_GT(*diag.parameters[0].rhat, 1.2);
  EXPECT_TRUE(diag.parameters[1].degenerate);

  draws.chains = 1;
  draws.draws_per_chain = 2000;
  auto single = bayes::convergence_diagnostics(draws);
  EXPECT_TRUE(single.single_chain);
  EXPECT_FALSE(single.parameters[0].rhat.has_value());
}
