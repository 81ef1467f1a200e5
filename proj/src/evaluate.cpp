#include "annotaudit/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <unordered_map>

#include "annotaudit/csv.hpp"
#include "annotaudit/stats.hpp"

namespace annotaudit::evaluate {

std::string_view to_string(Sampling sampling) {
  switch (sampling) {
    case Sampling::Random: return "random";
    case Sampling::RepresentativeStratified: return "representative_stratified";
    case Sampling::OversampleToMatch: return "oversample_to_match";
  }
  return "?";
}

std::optional<Sampling> parse_sampling(std::string_view text) {
  for (auto s : {Sampling::Random, Sampling::RepresentativeStratified, Sampling::OversampleToMatch}) {
    if (text == to_string(s)) return s;
  }
  return std::nullopt;
}

void SplitSpec::validate() const {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::ConfigError, "test_fraction must lie strictly between 0 and 1");
  }
  if (homogeneous_country.empty()) throw Error(ErrorCode::ConfigError, "homogeneous_country is empty");
}

namespace {

// respondent -> row indices, in first-seen order of rows
std::map<std::string, std::vector<std::size_t>> rows_by_respondent(std::span<const AnnotationRecord> records) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < records.size(); ++i) out[records[i].respondent_id].push_back(i);
  return out;
}

std::string pattern_key(const AnnotationRecord& r, bool with_country) {
  std::string key = r.item_id;
  key += '\x1f';
  key += r.label_id;
  key += '\x1f';
  key += static_cast<char>('0' + static_cast<int>(r.gender));
  key += static_cast<char>('0' + age_code(r.age_group));
  if (with_country) {
    key += '\x1f';
    key += r.country;
  }
  return key;
}

std::vector<std::string> factor_values(const AnnotationRecord& r, bool with_country) {
  std::vector<std::string> v = {r.item_id, r.label_id, std::string(to_string(r.gender)),
                                std::string(to_string(r.age_group))};
  if (with_country) v.push_back(r.country);
  return v;
}

const std::vector<std::string>& factor_names() {
  static const std::vector<std::string> names = {"item", "label", "gender", "age_group", "country"};
  return names;
}

}  // namespace

Split split(std::span<const AnnotationRecord> records, const SplitSpec& spec) {
  spec.validate();
  if (records.empty()) throw Error(ErrorCode::InvalidArgument, "split requires records");
  auto by_respondent = rows_by_respondent(records);

  std::map<std::string, std::vector<std::string>> by_country;
  for (const auto& [id, rows] : by_respondent) by_country[records[rows.front()].country].push_back(id);

  std::vector<double> sizes;
  for (const auto& [country, ids] : by_country) sizes.push_back(static_cast<double>(ids.size()));
  auto total = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(by_respondent.size())));
  auto quota = stats::apportion(total, sizes);

  std::mt19937_64 rng(stats::mix_seed(spec.seed, 0x53504c4954));
  std::set<std::string> test_ids;
  std::size_t k = 0;
  for (auto& [country, ids] : by_country) {
    std::shuffle(ids.begin(), ids.end(), rng);
    for (std::size_t i = 0; i < quota[k] && i < ids.size(); ++i) test_ids.insert(ids[i]);
    ++k;
  }

  Split out;
  for (const auto& r : records) {
    (test_ids.count(r.respondent_id) ? out.test : out.train).push_back(r);
  }
  return out;
}

namespace {

std::vector<AnnotationRecord> stratified_subset(std::span<const AnnotationRecord> rows, const Strata* strata,
                                                std::mt19937_64& rng) {
  auto by_respondent = rows_by_respondent(rows);
  std::map<CellKey, std::vector<std::string>> by_cell;
  for (const auto& [id, idx] : by_respondent) by_cell[cell_of(rows[idx.front()])].push_back(id);

  std::vector<double> weights;
  for (const auto& [cell, ids] : by_cell) {
    weights.push_back(strata ? strata->weight(cell) : static_cast<double>(ids.size()));
  }
  double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(sum > 0.0)) throw Error(ErrorCode::ZeroWeightSubgroup, "training cells carry zero stratum weight");

  // Largest sample whose per-cell quotas fit the available respondents.
  double capacity = std::numeric_limits<double>::infinity();
  std::size_t k = 0;
  for (const auto& [cell, ids] : by_cell) {
    if (weights[k] > 0.0) capacity = std::min(capacity, static_cast<double>(ids.size()) * sum / weights[k]);
    ++k;
  }
  auto quota = stats::apportion(static_cast<std::size_t>(std::floor(capacity + 1e-9)), weights);

  std::set<std::string> keep;
  k = 0;
  for (auto& [cell, ids] : by_cell) {
    std::shuffle(ids.begin(), ids.end(), rng);
    for (std::size_t i = 0; i < quota[k] && i < ids.size(); ++i) keep.insert(ids[i]);
    ++k;
  }
  std::vector<AnnotationRecord> out;
  for (const auto& r : rows) {
    if (keep.count(r.respondent_id)) out.push_back(r);
  }
  return out;
}

}  // namespace

TrainSets build_train_sets(std::span<const AnnotationRecord> pool, const SplitSpec& spec, const Strata* strata) {
  spec.validate();
  TrainSets sets;
  std::set<std::string> others;
  for (const auto& r : pool) {
    if (r.country == spec.homogeneous_country) {
      sets.homogeneous.push_back(r);
    } else {
      sets.heterogeneous.push_back(r);
      others.insert(r.country);
    }
  }
  if (sets.homogeneous.empty()) {
    throw Error(ErrorCode::MissingCountry, "training pool has no rows from " + spec.homogeneous_country);
  }
  if (others.size() < 2) {
    throw Error(ErrorCode::MissingCountry, "training pool needs at least two countries besides " +
                                               spec.homogeneous_country);
  }

  std::mt19937_64 rng(stats::mix_seed(spec.seed, 0x545241494e));
  switch (spec.sampling) {
    case Sampling::Random: break;
    case Sampling::RepresentativeStratified:
      sets.homogeneous = stratified_subset(sets.homogeneous, strata, rng);
      sets.heterogeneous = stratified_subset(sets.heterogeneous, strata, rng);
      break;
    case Sampling::OversampleToMatch: {
      // The smaller set keeps its rows and is topped up with draws with replacement.
      auto& small = sets.homogeneous.size() < sets.heterogeneous.size() ? sets.homogeneous : sets.heterogeneous;
      std::size_t target = std::max(sets.homogeneous.size(), sets.heterogeneous.size());
      std::uniform_int_distribution<std::size_t> pick(0, small.size() - 1);
      small.reserve(target);
      while (small.size() < target) {
        std::size_t i = pick(rng);
        small.push_back(small[i]);
      }
      break;
    }
  }
  return sets;
}

Predictor Predictor::fit(std::span<const AnnotationRecord> train, bool include_country) {
  if (train.empty()) throw Error(ErrorCode::InvalidArgument, "cannot fit a predictor on an empty train set");
  Predictor p;
  p.include_country_ = include_country;
  const std::size_t nf = include_country ? 5 : 4;

  struct Pattern {
    std::vector<std::string> levels;
    double successes = 0.0;
    double trials = 0.0;
  };
  std::map<std::string, Pattern> patterns;
  for (const auto& r : train) {
    auto& pat = patterns[pattern_key(r, include_country)];
    if (pat.levels.empty()) pat.levels = factor_values(r, include_country);
    pat.trials += 1.0;
    if (r.annotated) pat.successes += 1.0;
  }
  std::vector<Pattern> rows;
  rows.reserve(patterns.size());
  for (auto& [key, pat] : patterns) rows.push_back(std::move(pat));

  // Levels whose outcome never varies make the MLE run off to infinity; they
  // are removed from the fit and predicted at their observed constant.
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t f = 0; f < nf; ++f) {
      std::map<std::string, std::pair<double, double>> totals;
      for (const auto& r : rows) {
        auto& t = totals[r.levels[f]];
        t.first += r.successes;
        t.second += r.trials;
      }
      if (totals.size() < 2) continue;
      for (const auto& [level, t] : totals) {
        if (t.first > 0.0 && t.first < t.second) continue;
        double constant = t.first > 0.0 ? 1.0 : 0.0;
        p.separated_[{factor_names()[f], level}] = constant;
        p.warnings_.push_back("level '" + level + "' of '" + factor_names()[f] + "' is always " +
                              (constant > 0.0 ? "annotated" : "unannotated") + "; dropped from the fit");
        std::erase_if(rows, [&](const Pattern& r) { return r.levels[f] == level; });
        changed = true;
      }
    }
  }
  if (rows.empty()) throw Error(ErrorCode::NoVariation, "no training rows remain after dropping separated levels");

  glm::FeatureTable table;
  table.rows = rows.size();
  for (std::size_t f = 0; f < nf; ++f) {
    std::vector<std::string> col;
    col.reserve(rows.size());
    for (const auto& r : rows) col.push_back(r.levels[f]);
    table.add_factor(factor_names()[f], std::move(col));
  }
  p.schema_ = glm::DesignSchema::from_table(table);
  auto design = p.schema_.encode(table);
  Eigen::VectorXd successes(static_cast<Eigen::Index>(rows.size()));
  Eigen::VectorXd trials(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    successes[static_cast<Eigen::Index>(i)] = rows[i].successes;
    trials[static_cast<Eigen::Index>(i)] = rows[i].trials;
  }
  p.fit_ = glm::fit_binomial(design, successes, trials);
  return p;
}

std::vector<double> Predictor::probabilities(std::span<const AnnotationRecord> rows,
                                             std::vector<std::string>* warnings) const {
  const std::size_t nf = include_country_ ? 5 : 4;
  std::unordered_map<std::string, double> cache;
  std::set<std::pair<std::string, std::string>> warned;
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    auto key = pattern_key(r, include_country_);
    if (auto it = cache.find(key); it != cache.end()) {
      out.push_back(it->second);
      continue;
    }
    auto levels = factor_values(r, include_country_);
    std::optional<double> constant;
    double eta = fit_.coefficients[0];
    for (std::size_t f = 0; f < nf && !constant; ++f) {
      const auto& name = factor_names()[f];
      if (auto s = separated_.find({name, levels[f]}); s != separated_.end()) {
        constant = s->second;
        break;
      }
      try {
        if (auto col = schema_.column_of(name, levels[f])) eta += fit_.coefficients[static_cast<Eigen::Index>(*col)];
      } catch (const Error& e) {
        if (e.code() != ErrorCode::UnknownLevel) throw;
        if (warnings && warned.insert({name, levels[f]}).second) {
          warnings->push_back("unseen level '" + levels[f] + "' of '" + name + "' mapped to the reference level");
        }
      }
    }
    double prob = constant ? *constant : glm::logistic(eta);
    cache.emplace(std::move(key), prob);
    out.push_back(prob);
  }
  return out;
}

std::vector<bool> Predictor::predict(std::span<const AnnotationRecord> rows, std::vector<std::string>* warnings) const {
  auto probs = probabilities(rows, warnings);
  std::vector<bool> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] >= 0.5;
  return out;
}

std::optional<double> Confusion::f1() const {
  std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return std::nullopt;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

std::optional<double> Confusion::accuracy() const {
  if (support() == 0) return std::nullopt;
  return static_cast<double>(tp + tn) / static_cast<double>(support());
}

Confusion& Confusion::operator+=(const Confusion& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  tn += other.tn;
  return *this;
}

RegimeScore score(std::span<const bool> predictions, const std::string& regime,
                  std::span<const AnnotationRecord> test, std::span<const mrp::ConsistencyVerdict> verdicts) {
  if (predictions.size() != test.size()) throw Error(ErrorCode::InvalidArgument, "prediction count differs from test rows");
  std::map<std::pair<std::string, std::string>, mrp::Classification> classes;
  for (const auto& v : verdicts) classes[{v.item_id, v.label_id}] = v.classification;

  RegimeScore out;
  out.regime = regime;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& r = test[i];
    auto it = classes.find({r.item_id, r.label_id});
    if (it == classes.end()) {
      throw Error(ErrorCode::InvalidArgument, "no consistency verdict for (" + r.item_id + ", " + r.label_id + ")");
    }
    auto& c = out.cells[{r.country, it->second}];
    bool pred = predictions[i];
    if (pred && r.annotated) ++c.tp;
    else if (pred) ++c.fp;
    else if (r.annotated) ++c.fn;
    else ++c.tn;
  }
  for (const auto& [key, c] : out.cells) {
    out.pooled[key.second] += c;
    out.overall += c;
  }
  return out;
}

RegimeScore score(const Predictor& predictor, const std::string& regime, std::span<const AnnotationRecord> test,
                  std::span<const mrp::ConsistencyVerdict> verdicts, std::vector<std::string>* warnings) {
  auto preds = predictor.predict(test, warnings);
  std::unique_ptr<bool[]> flat(new bool[preds.size()]);
  for (std::size_t i = 0; i < preds.size(); ++i) flat[i] = preds[i];
  return score(std::span<const bool>(flat.get(), preds.size()), regime, test, verdicts);
}

EvalReport make_report(std::span<const RegimeScore> scores) {
  EvalReport report;
  for (const auto& s : scores) {
    report.regimes[s.regime] = s;
    for (const auto& [key, c] : s.cells) {
      report.rows.push_back({key.first, key.second, s.regime, c.f1(), c.accuracy(), c.support()});
    }
  }
  std::sort(report.rows.begin(), report.rows.end(), [](const MetricRow& a, const MetricRow& b) {
    return std::tie(a.country, a.classification, a.regime) < std::tie(b.country, b.classification, b.regime);
  });
  auto hom = report.regimes.find(kHomogeneous);
  auto het = report.regimes.find(kHeterogeneous);
  if (hom != report.regimes.end() && het != report.regimes.end()) {
    auto relative = [](std::optional<double> h, std::optional<double> t) -> std::optional<double> {
      if (!h || !t || *h == 0.0) return std::nullopt;
      return (*t - *h) / *h;
    };
    auto pooled_f1 = [](const RegimeScore& s) -> std::optional<double> {
      auto it = s.pooled.find(mrp::Classification::Inconsistent);
      if (it == s.pooled.end()) return std::nullopt;
      return it->second.f1();
    };
    report.relative_improvement = relative(pooled_f1(hom->second), pooled_f1(het->second));
    report.relative_improvement_overall = relative(hom->second.overall.f1(), het->second.overall.f1());
  }
  return report;
}

std::vector<OutOfSample> out_of_sample_eval(const Predictor& homogeneous, const Predictor& heterogeneous,
                                            std::span<const AnnotationRecord> held_out,
                                            std::vector<std::string>* warnings) {
  std::vector<OutOfSample> out;
  if (held_out.empty()) return out;
  auto hom = homogeneous.predict(held_out, warnings);
  auto het = heterogeneous.predict(held_out, warnings);
  std::map<std::string, std::pair<Confusion, Confusion>> by_country;
  auto tally = [](Confusion& c, bool pred, bool truth) {
    if (pred && truth) ++c.tp;
    else if (pred) ++c.fp;
    else if (truth) ++c.fn;
    else ++c.tn;
  };
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    auto& [h, t] = by_country[held_out[i].country];
    tally(h, hom[i], held_out[i].annotated);
    tally(t, het[i], held_out[i].annotated);
  }
  for (const auto& [country, pair] : by_country) {
    OutOfSample o;
    o.country = country;
    o.f1_homogeneous = pair.first.f1();
    o.f1_heterogeneous = pair.second.f1();
    if (o.f1_homogeneous && o.f1_heterogeneous) o.delta = *o.f1_heterogeneous - *o.f1_homogeneous;
    o.support = pair.first.support();
    out.push_back(o);
  }
  return out;
}

Evaluation run(std::span<const AnnotationRecord> records, std::span<const mrp::ConsistencyVerdict> verdicts,
               const SplitSpec& spec, const Strata* strata, std::span<const AnnotationRecord> held_out) {
  Evaluation ev;
  auto parts = split(records, spec);
  auto sets = build_train_sets(parts.train, spec, strata);
  ev.train_homogeneous_rows = sets.homogeneous.size();
  ev.train_heterogeneous_rows = sets.heterogeneous.size();
  ev.test_rows = parts.test.size();

  auto hom = Predictor::fit(sets.homogeneous, false);
  auto het = Predictor::fit(sets.heterogeneous, true);
  for (const auto& w : hom.warnings()) ev.warnings.push_back("homogeneous: " + w);
  for (const auto& w : het.warnings()) ev.warnings.push_back("heterogeneous: " + w);

  std::vector<RegimeScore> scores;
  scores.push_back(score(hom, kHomogeneous, parts.test, verdicts, &ev.warnings));
  scores.push_back(score(het, kHeterogeneous, parts.test, verdicts, &ev.warnings));
  ev.report = make_report(scores);
  ev.out_of_sample = out_of_sample_eval(hom, het, held_out, &ev.warnings);
  return ev;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? csv::format_double(*v) : "NA"; }

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

void write_eval_csv(std::ostream& out, const EvalReport& report, const std::vector<std::string>& comments) {
  csv::Writer w(out);
  for (const auto& c : comments) w.comment(c);
  w.row({"country", "consistency_class", "regime", "f1", "accuracy", "support"});
  for (const auto& r : report.rows) {
    w.row({r.country, std::string(mrp::to_string(r.classification)), r.regime, opt(r.f1), opt(r.accuracy),
           std::to_string(r.support)});
  }
}

nlohmann::json to_json(const Evaluation& ev) {
  nlohmann::json j;
  nlohmann::json regimes = nlohmann::json::object();
  for (const auto& [name, s] : ev.report.regimes) {
    nlohmann::json r;
    r["overall_f1"] = opt_json(s.overall.f1());
    r["overall_accuracy"] = opt_json(s.overall.accuracy());
    r["support"] = s.overall.support();
    for (const auto& [cls, c] : s.pooled) {
      r[std::string(mrp::to_string(cls))] = {{"f1", opt_json(c.f1())},
                                             {"accuracy", opt_json(c.accuracy())},
                                             {"support", c.support()}};
    }
    regimes[name] = r;
  }
  j["regimes"] = regimes;
  j["relative_improvement_inconsistent"] = opt_json(ev.report.relative_improvement);
  j["relative_improvement_overall"] = opt_json(ev.report.relative_improvement_overall);
  nlohmann::json oos = nlohmann::json::array();
  for (const auto& o : ev.out_of_sample) {
    oos.push_back({{"country", o.country},
                   {"f1_homogeneous", opt_json(o.f1_homogeneous)},
                   {"f1_heterogeneous", opt_json(o.f1_heterogeneous)},
                   {"delta", opt_json(o.delta)},
                   {"support", o.support}});
  }
  j["out_of_sample"] = oos;
  j["train_rows"] = {{"homogeneous", ev.train_homogeneous_rows}, {"heterogeneous", ev.train_heterogeneous_rows}};
  j["test_rows"] = ev.test_rows;
  j["warnings"] = ev.warnings;
  return j;
}

}  // namespace annotaudit::evaluate
