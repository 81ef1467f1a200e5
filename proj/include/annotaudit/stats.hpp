#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace annotaudit::stats {

double mean(std::span<const double> x);
/// Sample variance (n - 1 denominator); 0 for fewer than two values.
double variance(std::span<const double> x);
double sd(std::span<const double> x);
/// Population standard deviation (n denominator).
double population_sd(std::span<const double> x);

/// Linear-interpolation quantile (R type 7). `x` need not be sorted.
double quantile(std::span<const double> x, double prob);
double median(std::span<const double> x);

/// 1-based ranks, ties receive the average of the ranks they span.
/// `descending` ranks the largest value first.
std::vector<double> average_ranks(std::span<const double> x, bool descending = false);

/// Pearson correlation; nullopt when either vector has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
/// Spearman correlation (Pearson on average ranks).
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
};
/// Ordinary least squares of y on x; nullopt when x is constant.
std::optional<LinearFit> ols(std::span<const double> x, std::span<const double> y);

double normal_cdf(double z);
double normal_quantile(double p);
double two_sided_p(double z);

/// Deterministic seed derivation: mixes a base seed with a salt (splitmix64).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);
/// FNV-1a, stable across platforms; used to derive per-context seeds.
std::uint64_t hash_string(std::string_view text);

/// Largest-remainder apportionment of `total` units over `shares` (which need
/// not sum to one). Ties go to the earlier share.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& shares);

}  // namespace annotaudit::stats
