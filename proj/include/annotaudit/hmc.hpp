#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace annotaudit::hmc {

// Log density; writes the gradient into `grad` (already sized).
using LogDensity = std::function<double(const Eigen::VectorXd& q, Eigen::VectorXd& grad)>;

struct SamplerOptions {
  int warmup = 1000;
  int draws = 1000;
  double target_accept = 0.99;
  double trajectory_length = 1.0;
  int max_leapfrog = 1024;
  double max_energy_error = 1000.0;
  bool adapt_metric = true;
};

struct ChainResult {
  Eigen::MatrixXd draws;  // draws x dim, post-warmup only
  std::vector<double> accept_stats;
  std::vector<bool> divergent;
  int divergences = 0;
  double mean_accept = 0.0;
  double step_size = 0.0;
  int leapfrog_steps = 0;
  Eigen::VectorXd inverse_metric;
};

ChainResult run_chain(const LogDensity& log_density, Eigen::VectorXd initial, const SamplerOptions& options,
                      std::uint64_t seed);

/// Absolute change in the Hamiltonian after `steps` leapfrog steps of size `step`
/// from (q, p) under a unit metric.
double energy_error(const LogDensity& log_density, const Eigen::VectorXd& q, const Eigen::VectorXd& p, double step,
                    int steps);

/// Nesterov dual averaging of log step size toward a target acceptance rate.
class DualAveraging {
 public:
  DualAveraging(double initial_step, double target);
  void restart(double initial_step);
  double update(double accept_stat);  // returns the next step size
  double final_step() const;

 private:
  double target_;
  double mu_ = 0.0;
  double h_bar_ = 0.0;
  double log_step_bar_ = 0.0;
  double log_step_ = 0.0;
  int count_ = 0;
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
};

}  // namespace annotaudit::hmc
