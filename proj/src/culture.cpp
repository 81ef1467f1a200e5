#include "annotaudit/culture.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <tuple>

#include "annotaudit/csv.hpp"
#include "annotaudit/error.hpp"
#include "annotaudit/stats.hpp"

namespace annotaudit::culture {

namespace {

double condition_number(const Eigen::MatrixXd& m) {
  if (m.cols() > m.rows()) return INFINITY;  // more columns than countries is always rank deficient
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  if (s[s.size() - 1] <= 0.0) return INFINITY;
  return s[0] / s[s.size() - 1];
}

}  // namespace

DimensionSelection select_dimensions(std::span<const AnnotationRecord> records, const HofstedeTable& hofstede,
                                     double alpha) {
  const auto countries = distinct_countries(records);
  if (countries.size() < 3) throw Error(ErrorCode::TooFewCountries, "dimension selection needs at least three countries");
  for (const auto& c : countries) {
    if (!hofstede.find(c)) throw Error(ErrorCode::MissingCountry, "no Hofstede row for country '" + c + "'");
  }

  DimensionSelection out;
  // Country-level screening: constant dimensions carry no information, and a
  // dimension that makes the country-level design ill-conditioned is dropped.
  std::vector<HofstedeDimension> kept;
  for (auto d : kHofstedeDimensions) {
    std::vector<double> values;
    for (const auto& c : countries) values.push_back(hofstede.at(c).value(d));
    if (stats::population_sd(values) == 0.0) {
      out.dropped.push_back(d);
      out.notes.push_back(std::string(to_string(d)) + " dropped: constant across countries");
      continue;
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(countries.size()), static_cast<Eigen::Index>(kept.size()) + 2);
    for (std::size_t i = 0; i < countries.size(); ++i) {
      const auto& row = hofstede.at(countries[i]);
      const auto r = static_cast<Eigen::Index>(i);
      m(r, 0) = 1.0;
      for (std::size_t k = 0; k < kept.size(); ++k) m(r, static_cast<Eigen::Index>(k) + 1) = row.value(kept[k]);
      m(r, m.cols() - 1) = row.value(d);
    }
    if (condition_number(m) > 1e10) {
      out.dropped.push_back(d);
      out.notes.push_back(std::string(to_string(d)) + " dropped: collinear with the other dimensions");
      continue;
    }
    kept.push_back(d);
  }
  if (kept.empty()) throw Error(ErrorCode::CollinearDimensions, "no Hofstede dimension varies independently");

  using Key = std::tuple<Gender, AgeGroup, std::string, std::string, std::string>;
  std::map<Key, std::pair<double, double>> patterns;
  for (const auto& r : records) {
    auto& counts = patterns[{r.gender, r.age_group, r.item_id, r.label_id, r.country}];
    counts.first += r.annotated ? 1.0 : 0.0;
    counts.second += 1.0;
  }
  glm::FeatureTable table;
  std::vector<std::string> gender, age, item, label;
  std::vector<std::vector<double>> dims(kept.size());
  Eigen::VectorXd successes(static_cast<Eigen::Index>(patterns.size()));
  Eigen::VectorXd trials(static_cast<Eigen::Index>(patterns.size()));
  Eigen::Index row = 0;
  for (const auto& [key, counts] : patterns) {
    gender.emplace_back(to_string(std::get<0>(key)));
    age.emplace_back(to_string(std::get<1>(key)));
    item.push_back(std::get<2>(key));
    label.push_back(std::get<3>(key));
    const auto& h = hofstede.at(std::get<4>(key));
    for (std::size_t k = 0; k < kept.size(); ++k) dims[k].push_back(h.value(kept[k]));
    successes[row] = counts.first;
    trials[row] = counts.second;
    ++row;
  }
  table.add_factor("gender", std::move(gender));
  table.add_factor("age_group", std::move(age));
  table.add_factor("item", std::move(item));
  table.add_factor("label", std::move(label));
  for (std::size_t k = 0; k < kept.size(); ++k) table.add_numeric(std::string(to_string(kept[k])), std::move(dims[k]));

  auto schema = glm::DesignSchema::from_table(table);
  auto design = schema.encode(table);
  out.fit = glm::fit_binomial(design, successes, trials);

  for (auto d : kept) {
    auto column = static_cast<Eigen::Index>(schema.numeric_column(std::string(to_string(d))));
    out.tests.push_back({d, glm::wald_test(out.fit, column)});
  }
  std::vector<DimensionTest> significant;
  for (const auto& t : out.tests) {
    if (t.wald.p_value < alpha) significant.push_back(t);
  }
  std::stable_sort(significant.begin(), significant.end(), [](const auto& a, const auto& b) {
    return std::fabs(a.wald.estimate) > std::fabs(b.wald.estimate);
  });
  for (const auto& t : significant) out.selected.push_back(t.dimension);
  return out;
}

double CdiMatrix::at(const std::string& a, const std::string& b) const {
  auto ia = std::find(countries.begin(), countries.end(), a);
  auto ib = std::find(countries.begin(), countries.end(), b);
  if (ia == countries.end() || ib == countries.end()) {
    throw Error(ErrorCode::MissingCountry, "country pair " + a + "/" + b + " not in CDI matrix");
  }
  return distances(ia - countries.begin(), ib - countries.begin());
}

CdiMatrix cdi(const HofstedeTable& hofstede, const std::vector<HofstedeDimension>& dimensions,
              const std::vector<std::string>& countries) {
  if (dimensions.empty()) throw Error(ErrorCode::UnknownDimension, "no dimensions selected");
  CdiMatrix m;
  m.dimensions_used = dimensions;
  if (countries.empty()) {
    for (const auto& r : hofstede.rows) m.countries.push_back(r.country);
  } else {
    m.countries = countries;
  }
  const auto n = static_cast<Eigen::Index>(m.countries.size());
  m.distances = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto& ra = hofstede.at(m.countries[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const auto& rb = hofstede.at(m.countries[static_cast<std::size_t>(b)]);
      double sum = 0.0;
      for (auto d : dimensions) {
        double diff = ra.value(d) - rb.value(d);
        sum += diff * diff;
      }
      m.distances(a, b) = m.distances(b, a) = std::sqrt(sum);
    }
  }
  return m;
}

CdiMatrix cdi(const HofstedeTable& hofstede, const std::vector<std::string>& dimension_names,
              const std::vector<std::string>& countries) {
  std::vector<HofstedeDimension> dims;
  for (const auto& name : dimension_names) {
    auto d = parse_dimension(name);
    if (!d) throw Error(ErrorCode::UnknownDimension, "unknown Hofstede dimension '" + name + "'");
    dims.push_back(*d);
  }
  return cdi(hofstede, dims, countries);
}

namespace {

std::vector<std::string> common_countries(std::span<const mrp::ConsistencyVerdict> verdicts) {
  if (verdicts.empty()) return {};
  std::set<std::string> common;
  for (const auto& [c, _] : verdicts.front().country_estimates) common.insert(c);
  for (const auto& v : verdicts) {
    std::set<std::string> here;
    for (const auto& c : common) {
      if (v.country_estimates.count(c)) here.insert(c);
    }
    common.swap(here);
  }
  return {common.begin(), common.end()};
}

}  // namespace

std::vector<CountryPairSimilarity> pair_similarity(std::span<const mrp::ConsistencyVerdict> verdicts) {
  std::vector<const mrp::ConsistencyVerdict*> ordered;
  for (const auto& v : verdicts) ordered.push_back(&v);
  std::sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
    return std::tie(a->item_id, a->label_id) < std::tie(b->item_id, b->label_id);
  });
  std::size_t inconsistent = 0;
  for (const auto* v : ordered) inconsistent += v->classification == mrp::Classification::Inconsistent;
  const std::size_t consistent = ordered.size() - inconsistent;
  if (inconsistent < 2 || consistent < 2) {
    throw Error(ErrorCode::InvalidArgument, "need at least two inconsistent and two consistent pairs");
  }

  const auto countries = common_countries(verdicts);
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> vectors;
  for (const auto& c : countries) {
    auto& [inc, con] = vectors[c];
    for (const auto* v : ordered) {
      double value = v->country_estimates.at(c);
      (v->classification == mrp::Classification::Inconsistent ? inc : con).push_back(value);
    }
  }

  std::vector<CountryPairSimilarity> out;
  for (std::size_t a = 0; a < countries.size(); ++a) {
    for (std::size_t b = a; b < countries.size(); ++b) {
      const auto& va = vectors[countries[a]];
      const auto& vb = vectors[countries[b]];
      CountryPairSimilarity s;
      s.country_a = countries[a];
      s.country_b = countries[b];
      s.pearson_inconsistent = stats::pearson(va.first, vb.first);
      s.pearson_consistent = stats::pearson(va.second, vb.second);
      s.n_inconsistent = inconsistent;
      s.n_consistent = consistent;
      out.push_back(std::move(s));
    }
  }
  return out;
}

TrendFit fit_trend(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InvalidArgument, "trend needs at least two points");
  auto line = stats::ols(x, y);
  if (!line) throw Error(ErrorCode::DegenerateX, "all cultural distances are equal");
  TrendFit fit;
  fit.slope = line->slope;
  fit.intercept = line->intercept;
  fit.spearman = stats::spearman(x, y);
  fit.pairs = x.size();
  return fit;
}

CdiTrend cdi_similarity_trend(const CdiMatrix& distances, std::span<const CountryPairSimilarity> similarities) {
  std::vector<double> x_inc, y_inc, x_con, y_con;
  for (const auto& s : similarities) {
    if (s.country_a == s.country_b) continue;
    double d = distances.at(s.country_a, s.country_b);
    if (s.pearson_inconsistent) {
      x_inc.push_back(d);
      y_inc.push_back(*s.pearson_inconsistent);
    }
    if (s.pearson_consistent) {
      x_con.push_back(d);
      y_con.push_back(*s.pearson_consistent);
    }
  }
  if (x_inc.size() + x_con.size() == 0) throw Error(ErrorCode::InvalidArgument, "no country pairs with similarities");
  CdiTrend trend;
  if (x_inc.size() >= 2) trend.inconsistent = fit_trend(x_inc, y_inc);
  if (x_con.size() >= 2) trend.consistent = fit_trend(x_con, y_con);
  return trend;
}

RankAnalysis label_rank_analysis(std::span<const mrp::ConsistencyVerdict> verdicts) {
  std::set<std::string> countries;
  std::map<std::string, std::vector<const mrp::ConsistencyVerdict*>> by_item;
  for (const auto& v : verdicts) {
    by_item[v.item_id].push_back(&v);
    for (const auto& [c, _] : v.country_estimates) countries.insert(c);
  }
  const std::vector<std::string> country_list(countries.begin(), countries.end());

  RankAnalysis out;
  std::vector<double> all_spearman;
  std::vector<double> diff_inc, diff_con;
  for (auto& [item, labels] : by_item) {
    std::sort(labels.begin(), labels.end(), [](const auto* a, const auto* b) { return a->label_id < b->label_id; });
    std::map<std::string, std::vector<double>> ranks;
    for (const auto& c : country_list) {
      std::vector<double> estimates;
      for (const auto* v : labels) {
        auto it = v->country_estimates.find(c);
        if (it == v->country_estimates.end()) {
          throw Error(ErrorCode::IncompleteRanking, "country '" + c + "' lacks label '" + v->label_id + "' of item '" + item + "'");
        }
        estimates.push_back(it->second);
      }
      ranks[c] = stats::average_ranks(estimates, true);
    }
    for (std::size_t a = 0; a < country_list.size(); ++a) {
      for (std::size_t b = a + 1; b < country_list.size(); ++b) {
        RankPair pair{item, country_list[a], country_list[b],
                      stats::pearson(ranks[country_list[a]], ranks[country_list[b]])};
        if (pair.spearman) all_spearman.push_back(*pair.spearman);
        out.pairs.push_back(std::move(pair));
      }
    }
    for (std::size_t l = 0; l < labels.size(); ++l) {
      std::vector<double> diffs;
      for (std::size_t a = 0; a < country_list.size(); ++a) {
        for (std::size_t b = a + 1; b < country_list.size(); ++b) {
          diffs.push_back(std::fabs(ranks[country_list[a]][l] - ranks[country_list[b]][l]));
        }
      }
      LabelRankDifference d{item, labels[l]->label_id, labels[l]->classification,
                            diffs.empty() ? 0.0 : stats::median(diffs)};
      (d.classification == mrp::Classification::Inconsistent ? diff_inc : diff_con).push_back(d.median_rank_difference);
      out.labels.push_back(std::move(d));
    }
  }
  if (!all_spearman.empty()) {
    out.min_spearman = *std::min_element(all_spearman.begin(), all_spearman.end());
    std::map<long, int> counts;
    for (double s : all_spearman) ++counts[std::lround(s * 100.0)];
    auto best = std::max_element(counts.begin(), counts.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });
    out.mode_spearman = static_cast<double>(best->first) / 100.0;
  }
  if (!diff_inc.empty()) out.median_difference_inconsistent = stats::median(diff_inc);
  if (!diff_con.empty()) out.median_difference_consistent = stats::median(diff_con);
  return out;
}

namespace {

std::string optional_number(const std::optional<double>& v) { return v ? csv::format_double(*v) : "NA"; }
nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

void write_cdi_csv(std::ostream& out, const CdiMatrix& matrix, const std::vector<std::string>& comments) {
  csv::Writer writer(out);
  for (const auto& c : comments) writer.comment(c);
  std::string dims;
  for (auto d : matrix.dimensions_used) dims += (dims.empty() ? "" : ";") + std::string(to_string(d));
  writer.comment("dimensions=" + dims);
  writer.row({"country_a", "country_b", "cdi"});
  for (std::size_t a = 0; a < matrix.countries.size(); ++a) {
    for (std::size_t b = a + 1; b < matrix.countries.size(); ++b) {
      writer.row({matrix.countries[a], matrix.countries[b],
                  csv::format_double(matrix.distances(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)))});
    }
  }
}

void write_similarity_csv(std::ostream& out, std::span<const CountryPairSimilarity> sims, const CdiMatrix* matrix,
                          const std::vector<std::string>& comments) {
  csv::Writer writer(out);
  for (const auto& c : comments) writer.comment(c);
  writer.row({"country_a", "country_b", "cdi", "pearson_inconsistent", "pearson_consistent", "n_inconsistent",
              "n_consistent"});
  for (const auto& s : sims) {
    std::string distance = "NA";
    if (matrix) distance = csv::format_double(matrix->at(s.country_a, s.country_b));
    writer.row({s.country_a, s.country_b, distance, optional_number(s.pearson_inconsistent),
                optional_number(s.pearson_consistent), std::to_string(s.n_inconsistent),
                std::to_string(s.n_consistent)});
  }
}

void write_rank_csv(std::ostream& out, const RankAnalysis& analysis, const std::vector<std::string>& comments) {
  csv::Writer writer(out);
  for (const auto& c : comments) writer.comment(c);
  writer.row({"item_id", "label_id", "classification", "median_rank_difference"});
  for (const auto& l : analysis.labels) {
    writer.row({l.item_id, l.label_id, std::string(mrp::to_string(l.classification)),
                csv::format_double(l.median_rank_difference)});
  }
}

nlohmann::json to_json(const CdiTrend& trend) {
  auto one = [](const std::optional<TrendFit>& t) -> nlohmann::json {
    if (!t) return nullptr;
    return {{"slope", t->slope}, {"intercept", t->intercept}, {"spearman", optional_json(t->spearman)}, {"pairs", t->pairs}};
  };
  return {{"inconsistent", one(trend.inconsistent)}, {"consistent", one(trend.consistent)}};
}

nlohmann::json to_json(const DimensionSelection& selection) {
  nlohmann::json selected = nlohmann::json::array();
  for (auto d : selection.selected) selected.push_back(std::string(to_string(d)));
  nlohmann::json dropped = nlohmann::json::array();
  for (auto d : selection.dropped) dropped.push_back(std::string(to_string(d)));
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& t : selection.tests) {
    tests.push_back({{"dimension", std::string(to_string(t.dimension))},
                     {"estimate", t.wald.estimate},
                     {"se", t.wald.se},
                     {"z", t.wald.z},
                     {"p", t.wald.p_value}});
  }
  return {{"selected", selected}, {"dropped", dropped}, {"notes", selection.notes}, {"dimension_tests", tests},
          {"coefficients", glm::coefficient_table(selection.fit)}};
}

nlohmann::json to_json(const RankAnalysis& analysis) {
  return {{"min_spearman", optional_json(analysis.min_spearman)},
          {"mode_spearman", optional_json(analysis.mode_spearman)},
          {"median_rank_difference_inconsistent", optional_json(analysis.median_difference_inconsistent)},
          {"median_rank_difference_consistent", optional_json(analysis.median_difference_consistent)},
          {"country_pairs", analysis.pairs.size()}};
}

}  // namespace annotaudit::culture
