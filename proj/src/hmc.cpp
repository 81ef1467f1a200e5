#include "annotaudit/hmc.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace annotaudit::hmc {

DualAveraging::DualAveraging(double initial_step, double target) : target_(target) { restart(initial_step); }

void DualAveraging::restart(double initial_step) {
  mu_ = std::log(10.0 * initial_step);
  h_bar_ = 0.0;
  log_step_bar_ = 0.0;
  log_step_ = std::log(initial_step);
  count_ = 0;
}

double DualAveraging::update(double accept_stat) {
  ++count_;
  const double m = count_;
  const double eta = 1.0 / (m + kT0);
  h_bar_ = (1.0 - eta) * h_bar_ + eta * (target_ - accept_stat);
  log_step_ = mu_ - std::sqrt(m) / kGamma * h_bar_;
  const double weight = std::pow(m, -kKappa);
  log_step_bar_ = weight * log_step_ + (1.0 - weight) * log_step_bar_;
  return std::exp(log_step_);
}

double DualAveraging::final_step() const { return std::exp(count_ > 0 ? log_step_bar_ : log_step_); }

namespace {

struct State {
  Eigen::VectorXd q;
  Eigen::VectorXd grad;
  double log_density = 0.0;
};

double kinetic(const Eigen::VectorXd& p, const Eigen::VectorXd& inverse_metric) {
  return 0.5 * p.cwiseProduct(p).dot(inverse_metric);
}

// Returns false when the density became non-finite along the way.
bool leapfrog(const LogDensity& f, State& s, Eigen::VectorXd& p, const Eigen::VectorXd& inverse_metric, double step,
              int steps) {
  p += 0.5 * step * s.grad;
  for (int i = 0; i < steps; ++i) {
    s.q += step * inverse_metric.cwiseProduct(p);
    s.log_density = f(s.q, s.grad);
    if (!std::isfinite(s.log_density)) return false;
    if (i + 1 < steps) p += step * s.grad;
  }
  p += 0.5 * step * s.grad;
  return true;
}

Eigen::VectorXd draw_momentum(std::mt19937_64& rng, const Eigen::VectorXd& inverse_metric) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd p(inverse_metric.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = normal(rng) / std::sqrt(inverse_metric[i]);
  return p;
}

double initial_step_size(const LogDensity& f, const State& start, const Eigen::VectorXd& inverse_metric,
                         std::mt19937_64& rng) {
  double step = 1.0;
  auto accept_ratio = [&](double eps) {
    State s = start;
    Eigen::VectorXd p = draw_momentum(rng, inverse_metric);
    double h0 = -s.log_density + kinetic(p, inverse_metric);
    if (!leapfrog(f, s, p, inverse_metric, eps, 1)) return 0.0;
    double h1 = -s.log_density + kinetic(p, inverse_metric);
    double delta = h0 - h1;
    return std::isfinite(delta) ? std::exp(std::min(0.0, delta)) : 0.0;
  };
  double ratio = accept_ratio(step);
  const int direction = ratio > 0.8 ? 1 : -1;
  for (int i = 0; i < 100; ++i) {
    if (direction == 1 && !(ratio > 0.8)) break;
    if (direction == -1 && !(ratio < 0.8)) break;
    step = direction == 1 ? step * 2.0 : step * 0.5;
    ratio = accept_ratio(step);
  }
  return std::clamp(step, 1e-8, 1e3);
}

// Ends of slow metric-adaptation windows, as iteration indices (exclusive).
std::vector<int> window_ends(int warmup) {
  int init_buffer = 75;
  int term_buffer = 50;
  int window = 25;
  if (init_buffer + term_buffer + window > warmup) {
    init_buffer = static_cast<int>(0.15 * warmup);
    term_buffer = static_cast<int>(0.1 * warmup);
    window = warmup - init_buffer - term_buffer;
  }
  std::vector<int> ends;
  if (window <= 0) return ends;
  const int slow_end = warmup - term_buffer;
  int start = init_buffer;
  while (start < slow_end) {
    int end = start + window;
    // Stretch the last window so no short window is left over.
    if (end + 2 * window > slow_end) end = slow_end;
    ends.push_back(end);
    start = end;
    window *= 2;
  }
  return ends;
}

}  // namespace

double energy_error(const LogDensity& f, const Eigen::VectorXd& q, const Eigen::VectorXd& p0, double step,
                    int steps) {
  const Eigen::VectorXd unit = Eigen::VectorXd::Ones(q.size());
  State s{q, Eigen::VectorXd::Zero(q.size()), 0.0};
  s.log_density = f(s.q, s.grad);
  Eigen::VectorXd p = p0;
  double h0 = -s.log_density + kinetic(p, unit);
  leapfrog(f, s, p, unit, step, steps);
  return std::fabs(-s.log_density + kinetic(p, unit) - h0);
}

ChainResult run_chain(const LogDensity& f, Eigen::VectorXd initial, const SamplerOptions& options,
                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Eigen::Index dim = initial.size();

  State current{std::move(initial), Eigen::VectorXd::Zero(dim), 0.0};
  current.log_density = f(current.q, current.grad);

  Eigen::VectorXd inverse_metric = Eigen::VectorXd::Ones(dim);
  double step = initial_step_size(f, current, inverse_metric, rng);
  DualAveraging adapter(step, options.target_accept);

  const std::vector<int> ends = options.adapt_metric ? window_ends(options.warmup) : std::vector<int>{};
  std::size_t next_window = 0;
  int window_start = ends.empty() ? 0 : (options.warmup >= 150 ? 75 : static_cast<int>(0.15 * options.warmup));
  Eigen::VectorXd window_mean = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd window_m2 = Eigen::VectorXd::Zero(dim);
  int window_count = 0;

  ChainResult result;
  result.draws.resize(options.draws, dim);
  result.accept_stats.reserve(static_cast<std::size_t>(options.draws));
  result.divergent.reserve(static_cast<std::size_t>(options.draws));

  const int total = options.warmup + options.draws;
  for (int iter = 0; iter < total; ++iter) {
    const bool warming = iter < options.warmup;
    const int steps =
        std::clamp(static_cast<int>(std::ceil(options.trajectory_length / step)), 1, options.max_leapfrog);

    State proposal = current;
    Eigen::VectorXd p = draw_momentum(rng, inverse_metric);
    const double h0 = -current.log_density + kinetic(p, inverse_metric);
    bool finite = leapfrog(f, proposal, p, inverse_metric, step, steps);
    double h1 = finite ? -proposal.log_density + kinetic(p, inverse_metric) : INFINITY;
    double delta = h0 - h1;
    bool divergent = !std::isfinite(delta) || -delta > options.max_energy_error;
    double accept = divergent ? 0.0 : std::exp(std::min(0.0, delta));
    if (!divergent && uniform(rng) < accept) current = std::move(proposal);

    if (warming) {
      step = adapter.update(accept);
      if (next_window < ends.size() && iter >= window_start) {
        ++window_count;
        Eigen::VectorXd d = current.q - window_mean;
        window_mean += d / window_count;
        window_m2 += d.cwiseProduct(current.q - window_mean);
        if (iter + 1 == ends[next_window]) {
          const double n = window_count;
          Eigen::VectorXd var = window_m2 / std::max(1.0, n - 1.0);
          inverse_metric = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
          step = initial_step_size(f, current, inverse_metric, rng);
          adapter.restart(step);
          window_mean.setZero();
          window_m2.setZero();
          window_count = 0;
          ++next_window;
        }
      }
      if (iter + 1 == options.warmup) step = adapter.final_step();
    } else {
      const auto row = iter - options.warmup;
      result.draws.row(row) = current.q.transpose();
      result.accept_stats.push_back(accept);
      result.divergent.push_back(divergent);
      if (divergent) ++result.divergences;
    }
  }

  if (options.warmup == 0) step = adapter.final_step();
  double sum = 0.0;
  for (double a : result.accept_stats) sum += a;
  result.mean_accept = result.accept_stats.empty() ? 0.0 : sum / static_cast<double>(result.accept_stats.size());
  result.step_size = step;
  result.leapfrog_steps =
      std::clamp(static_cast<int>(std::ceil(options.trajectory_length / step)), 1, options.max_leapfrog);
  result.inverse_metric = inverse_metric;
  return result;
}

}  // namespace annotaudit::hmc
