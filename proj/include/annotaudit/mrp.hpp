#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "annotaudit/bayes.hpp"
#include "annotaudit/dataset.hpp"

namespace annotaudit::mrp {

struct CellEstimate {
  std::string item_id;
  std::string label_id;
  CellKey cell;
  double mean = 0.0;
  double sd = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
  /// Per-draw probabilities; empty for point estimates.
  std::vector<double> draws;
};

/// Throws UnknownLevel when a level of the cell is not in the model.
CellEstimate cell_probability(const bayes::PosteriorDraws& draws, const CellKey& cell);

enum GroupBy : unsigned { kByCountry = 1u, kByGender = 2u, kByAge = 4u };

struct SubgroupEstimate {
  double mean = 0.0;
  double sd = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
};

/// Subgroup key: the selected fields of the cell joined with '|', in the
/// order country, gender, age_group.
std::string subgroup_key(const CellKey& cell, unsigned group_by);

/// Weighted by stratum weight per posterior draw when every cell carries draws
/// of equal length; otherwise the cell means are poststratified directly.
/// Throws MissingCell or ZeroWeightSubgroup.
std::map<std::string, SubgroupEstimate> poststratify(std::span<const CellEstimate> cells, const Strata& strata,
                                                     unsigned group_by = kByCountry);

enum class Classification { Consistent, Inconsistent };
std::string_view to_string(Classification c);
std::optional<Classification> parse_classification(std::string_view text);

struct ConsistencyVerdict {
  std::string item_id;
  std::string label_id;
  std::map<std::string, double> country_estimates;
  double cross_country_sd = 0.0;
  bool straddles_majority = false;
  bool tie_at_majority_line = false;  // some estimate sits exactly on the line
  Classification classification = Classification::Consistent;
  std::string min_country;
  std::string max_country;
};

/// Throws TooFewCountries for fewer than two estimates.
ConsistencyVerdict classify_consistency(const std::map<std::string, double>& country_estimates,
                                        double sd_threshold = 0.05, double majority_line = 0.5);

struct Heatmap {
  std::vector<std::string> items;
  std::vector<std::string> labels;
  std::vector<std::vector<std::optional<double>>> sd;  // [item][label]
};

Heatmap consistency_heatmap(std::span<const ConsistencyVerdict> verdicts);

void write_heatmap_csv(std::ostream& out, const Heatmap& heatmap, const std::vector<std::string>& comments = {});
void write_verdicts_csv(std::ostream& out, std::span<const ConsistencyVerdict> verdicts,
                        const std::vector<std::string>& comments = {});
std::vector<ConsistencyVerdict> read_verdicts_csv(const std::string& path, double sd_threshold = 0.05,
                                                  double majority_line = 0.5);
void write_cells_csv(std::ostream& out, std::span<const CellEstimate> cells, const std::vector<std::string>& comments = {});

/// Per (item, label): per-country poststratified means, in the long format
/// item_id,label_id,country,mean,sd,q05,q95.
struct CountryEstimate {
  std::string item_id;
  std::string label_id;
  std::string country;
  SubgroupEstimate estimate;
};
void write_estimates_csv(std::ostream& out, std::span<const CountryEstimate> estimates,
                         const std::vector<std::string>& comments = {});
std::vector<CountryEstimate> read_estimates_csv(const std::string& path);

}  // namespace annotaudit::mrp
