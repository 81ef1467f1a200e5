#include "annotaudit/mrp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <set>

#include "annotaudit/csv.hpp"
#include "annotaudit/error.hpp"
#include "annotaudit/glm.hpp"
#include "annotaudit/stats.hpp"

namespace annotaudit::mrp {

namespace {

SubgroupEstimate summarize(std::span<const double> values) {
  SubgroupEstimate s;
  s.mean = stats::mean(values);
  s.sd = values.size() > 1 ? stats::sd(values) : 0.0;
  s.q05 = stats::quantile(values, 0.05);
  s.q95 = stats::quantile(values, 0.95);
  return s;
}

std::optional<double> parse_number(std::string_view text) {
  if (text == "NA" || text.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

}  // namespace

CellEstimate cell_probability(const bayes::PosteriorDraws& draws, const CellKey& cell) {
  auto country = std::find(draws.countries.begin(), draws.countries.end(), cell.country);
  if (country == draws.countries.end()) throw Error(ErrorCode::UnknownLevel, "country '" + cell.country + "' not in model");
  auto gender = std::find(draws.genders.begin(), draws.genders.end(), cell.gender);
  if (gender == draws.genders.end()) {
    throw Error(ErrorCode::UnknownLevel, "gender '" + std::string(to_string(cell.gender)) + "' not in model");
  }
  auto age = std::find(draws.ages.begin(), draws.ages.end(), cell.age_group);
  if (age == draws.ages.end()) {
    throw Error(ErrorCode::UnknownLevel, "age group '" + std::string(to_string(cell.age_group)) + "' not in model");
  }

  const Eigen::Index g = gender - draws.genders.begin();
  const Eigen::Index a = age - draws.ages.begin();
  const Eigen::Index u = draws.fixed_count + (country - draws.countries.begin());
  const Eigen::Index age_offset = static_cast<Eigen::Index>(draws.genders.size()) - 1;

  CellEstimate estimate;
  estimate.item_id = draws.item_id;
  estimate.label_id = draws.label_id;
  estimate.cell = cell;
  estimate.draws.resize(static_cast<std::size_t>(draws.draws.rows()));
  for (Eigen::Index s = 0; s < draws.draws.rows(); ++s) {
    double eta = draws.draws(s, 0) + draws.draws(s, u);
    if (g > 0) eta += draws.draws(s, g);
    if (a > 0) eta += draws.draws(s, age_offset + a);
    estimate.draws[static_cast<std::size_t>(s)] = glm::logistic(eta);
  }
  auto s = summarize(estimate.draws);
  estimate.mean = s.mean;
  estimate.sd = s.sd;
  estimate.q05 = s.q05;
  estimate.q95 = s.q95;
  return estimate;
}

std::string subgroup_key(const CellKey& cell, unsigned group_by) {
  std::string key;
  auto append = [&](std::string_view part) {
    if (!key.empty()) key += '|';
    key += part;
  };
  if (group_by & kByCountry) append(cell.country);
  if (group_by & kByGender) append(to_string(cell.gender));
  if (group_by & kByAge) append(to_string(cell.age_group));
  return key;
}

std::map<std::string, SubgroupEstimate> poststratify(std::span<const CellEstimate> cells, const Strata& strata,
                                                     unsigned group_by) {
  std::map<CellKey, double> weights;
  for (const auto& c : strata.cells) weights[c.key()] = c.weight;

  bool per_draw = !cells.empty();
  for (const auto& c : cells) {
    if (c.draws.empty() || c.draws.size() != cells.front().draws.size()) per_draw = false;
  }
  const std::size_t draw_count = per_draw ? cells.front().draws.size() : 1;

  struct Accumulator {
    double weight = 0.0;
    std::vector<double> sums;
  };
  std::map<std::string, Accumulator> groups;
  for (const auto& c : cells) {
    auto w = weights.find(c.cell);
    if (w == weights.end()) throw Error(ErrorCode::MissingCell, "no stratum weight for " + to_string(c.cell));
    auto& acc = groups[subgroup_key(c.cell, group_by)];
    if (acc.sums.empty()) acc.sums.assign(draw_count, 0.0);
    acc.weight += w->second;
    if (per_draw) {
      for (std::size_t s = 0; s < draw_count; ++s) acc.sums[s] += w->second * c.draws[s];
    } else {
      acc.sums[0] += w->second * c.mean;
    }
  }

  std::map<std::string, SubgroupEstimate> out;
  for (auto& [key, acc] : groups) {
    if (!(acc.weight > 0.0)) throw Error(ErrorCode::ZeroWeightSubgroup, "subgroup '" + key + "' has zero weight");
    for (auto& v : acc.sums) v /= acc.weight;
    out[key] = summarize(acc.sums);
  }
  return out;
}

std::string_view to_string(Classification c) {
  return c == Classification::Consistent ? "consistent" : "inconsistent";
}

std::optional<Classification> parse_classification(std::string_view text) {
  if (text == "consistent") return Classification::Consistent;
  if (text == "inconsistent") return Classification::Inconsistent;
  return std::nullopt;
}

ConsistencyVerdict classify_consistency(const std::map<std::string, double>& country_estimates, double sd_threshold,
                                        double majority_line) {
  if (country_estimates.size() < 2) throw Error(ErrorCode::TooFewCountries, "need at least two countries");
  ConsistencyVerdict v;
  v.country_estimates = country_estimates;
  std::vector<double> values;
  auto lo = country_estimates.begin();
  auto hi = country_estimates.begin();
  for (auto it = country_estimates.begin(); it != country_estimates.end(); ++it) {
    values.push_back(it->second);
    if (it->second < lo->second) lo = it;
    if (it->second > hi->second) hi = it;
    if (it->second == majority_line) v.tie_at_majority_line = true;
  }
  v.min_country = lo->first;
  v.max_country = hi->first;
  v.cross_country_sd = stats::population_sd(values);
  v.straddles_majority = lo->second < majority_line && hi->second > majority_line;
  v.classification = v.cross_country_sd > sd_threshold && v.straddles_majority ? Classification::Inconsistent
                                                                              : Classification::Consistent;
  return v;
}

Heatmap consistency_heatmap(std::span<const ConsistencyVerdict> verdicts) {
  std::set<std::string> items;
  std::set<std::string> labels;
  for (const auto& v : verdicts) {
    items.insert(v.item_id);
    labels.insert(v.label_id);
  }
  Heatmap h;
  h.items.assign(items.begin(), items.end());
  h.labels.assign(labels.begin(), labels.end());
  h.sd.assign(h.items.size(), std::vector<std::optional<double>>(h.labels.size()));
  for (const auto& v : verdicts) {
    auto i = std::lower_bound(h.items.begin(), h.items.end(), v.item_id) - h.items.begin();
    auto l = std::lower_bound(h.labels.begin(), h.labels.end(), v.label_id) - h.labels.begin();
    h.sd[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)] = v.cross_country_sd;
  }
  return h;
}

void write_heatmap_csv(std::ostream& out, const Heatmap& heatmap, const std::vector<std::string>& comments) {
  csv::Writer writer(out);
  for (const auto& c : comments) writer.comment(c);
  std::vector<std::string> header = {"item_id"};
  header.insert(header.end(), heatmap.labels.begin(), heatmap.labels.end());
  writer.row(header);
  for (std::size_t i = 0; i < heatmap.items.size(); ++i) {
    std::vector<std::string> row = {heatmap.items[i]};
    for (const auto& cell : heatmap.sd[i]) row.push_back(cell ? csv::format_double(*cell) : "NA");
    writer.row(row);
  }
}

void write_verdicts_csv(std::ostream& out, std::span<const ConsistencyVerdict> verdicts,
                        const std::vector<std::string>& comments) {
  std::set<std::string> countries;
  for (const auto& v : verdicts) {
    for (const auto& [c, _] : v.country_estimates) countries.insert(c);
  }
  csv::Writer writer(out);
  for (const auto& c : comments) writer.comment(c);
  std::vector<std::string> header = {"item_id", "label_id", "classification", "cross_country_sd", "min_country",
                                     "max_country"};
  header.insert(header.end(), countries.begin(), countries.end());
  writer.row(header);
  for (const auto& v : verdicts) {
    std::vector<std::string> row = {v.item_id, v.label_id, std::string(to_string(v.classification)),
                                    csv::format_double(v.cross_country_sd), v.min_country, v.max_country};
    for (const auto& c : countries) {
      auto it = v.country_estimates.find(c);
      row.push_back(it == v.country_estimates.end() ? "NA" : csv::format_double(it->second));
    }
    writer.row(row);
  }
}

std::vector<ConsistencyVerdict> read_verdicts_csv(const std::string& path, double sd_threshold, double majority_line) {
  auto table = csv::read_file(path);
  const std::vector<std::string> fixed = {"item_id", "label_id", "classification", "cross_country_sd", "min_country",
                                          "max_country"};
  for (const auto& name : fixed) {
    if (!table.column(name)) throw Error(ErrorCode::MissingColumn, path + ": missing column '" + name + "'");
  }
  std::vector<ConsistencyVerdict> verdicts;
  for (const auto& row : table.rows) {
    std::map<std::string, double> estimates;
    for (std::size_t j = fixed.size(); j < table.header.size() && j < row.size(); ++j) {
      if (auto v = parse_number(row[j])) estimates[table.header[j]] = *v;
    }
    ConsistencyVerdict v = classify_consistency(estimates, sd_threshold, majority_line);
    v.item_id = row.at(*table.column("item_id"));
    v.label_id = row.at(*table.column("label_id"));
    verdicts.push_back(std::move(v));
  }
  return verdicts;
}

void write_cells_csv(std::ostream& out, std::span<const CellEstimate> cells, const std::vector<std::string>& comments) {
  csv::Writer writer(out);
  for (const auto& c : comments) writer.comment(c);
  writer.row({"item_id", "label_id", "country", "gender", "age_group", "mean", "sd", "q05", "q95"});
  for (const auto& c : cells) {
    writer.row({c.item_id, c.label_id, c.cell.country, std::string(to_string(c.cell.gender)),
                std::string(to_string(c.cell.age_group)), csv::format_double(c.mean), csv::format_double(c.sd),
                csv::format_double(c.q05), csv::format_double(c.q95)});
  }
}

void write_estimates_csv(std::ostream& out, std::span<const CountryEstimate> estimates,
                         const std::vector<std::string>& comments) {
  csv::Writer writer(out);
  for (const auto& c : comments) writer.comment(c);
  writer.row({"item_id", "label_id", "country", "mean", "sd", "q05", "q95"});
  for (const auto& e : estimates) {
    writer.row({e.item_id, e.label_id, e.country, csv::format_double(e.estimate.mean),
                csv::format_double(e.estimate.sd), csv::format_double(e.estimate.q05),
                csv::format_double(e.estimate.q95)});
  }
}

std::vector<CountryEstimate> read_estimates_csv(const std::string& path) {
  auto table = csv::read_file(path);
  std::vector<std::size_t> idx;
  for (const char* name : {"item_id", "label_id", "country", "mean", "sd", "q05", "q95"}) {
    auto c = table.column(name);
    if (!c) throw Error(ErrorCode::MissingColumn, path + ": missing column '" + std::string(name) + "'");
    idx.push_back(*c);
  }
  std::vector<CountryEstimate> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto number = [&](std::size_t k) {
      auto v = parse_number(row.at(idx[k]));
      if (!v) {
        throw Error(ErrorCode::BadEnum, path + " line " + std::to_string(table.line_numbers[r]) + ": bad number");
      }
      return *v;
    };
    CountryEstimate e;
    e.item_id = row.at(idx[0]);
    e.label_id = row.at(idx[1]);
    e.country = row.at(idx[2]);
    e.estimate = {number(3), number(4), number(5), number(6)};
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace annotaudit::mrp
