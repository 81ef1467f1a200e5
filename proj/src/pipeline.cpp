#include "annotaudit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "annotaudit/stats.hpp"

namespace annotaudit::pipeline {

std::string_view to_string(Engine engine) { return engine == Engine::Hmc ? "hmc" : "laplace"; }

std::optional<Engine> parse_engine(std::string_view text) {
  if (text == "hmc") return Engine::Hmc;
  if (text == "laplace") return Engine::Laplace;
  return std::nullopt;
}

FilterPolicy default_filter() {
  FilterPolicy p;
  p.excluded_countries = {"IN", "SA"};
  p.excluded_genders = {Gender::Other};
  p.min_subgroup_size = 6;
  return p;
}

void Options::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
  if (!(sd_threshold > 0.0)) fail("sd-threshold must be positive");
  if (!(majority_line > 0.0 && majority_line < 1.0)) fail("majority-line must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha < 1.0)) fail("alpha must lie in (0, 1)");
  if (!(caliper > 0.0)) fail("caliper must be positive");
  if (jobs == 0) fail("jobs must be at least 1");
  if (filter.min_subgroup_size < 1) fail("min subgroup size must be at least 1");
  try {
    split.validate();
    model.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
}

Prepared prepare(std::span<const AnnotationRecord> records, const std::optional<Strata>& population,
                 const Options& options) {
  Prepared p;
  for (const auto& r : records) {
    if (options.filter.excluded_countries.count(r.country) && !options.filter.excluded_genders.count(r.gender)) {
      p.held_out.push_back(r);
    }
  }
  auto filtered = apply_filters(records, options.filter);
  p.filter_report = filtered.report;
  p.records = std::move(filtered.records);
  std::stable_sort(p.records.begin(), p.records.end(), [](const AnnotationRecord& a, const AnnotationRecord& b) {
    return std::tie(a.item_id, a.label_id, a.respondent_id) < std::tie(b.item_id, b.label_id, b.respondent_id);
  });
  p.strata = build_strata(p.records, population);
  return p;
}

namespace {

struct PairSpan {
  std::string item_id;
  std::string label_id;
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::vector<PairSpan> pair_spans(const std::vector<AnnotationRecord>& sorted) {
  std::vector<PairSpan> out;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].item_id == sorted[i].item_id && sorted[j].label_id == sorted[i].label_id) ++j;
    out.push_back({sorted[i].item_id, sorted[i].label_id, i, j});
    i = j;
  }
  return out;
}

PairFit fit_pair(const Prepared& prepared, const PairSpan& span, const std::vector<std::string>& countries,
                 const Options& options) {
  PairFit fit;
  fit.item_id = span.item_id;
  fit.label_id = span.label_id;
  std::span<const AnnotationRecord> rows(prepared.records.data() + span.begin, span.end - span.begin);
  auto data = bayes::build_data(rows, countries);
  auto spec = options.model;
  spec.seed = stats::mix_seed(options.seed, stats::hash_string(span.item_id + "|" + span.label_id));
  auto draws = options.engine == Engine::Hmc ? bayes::sample_hmc(spec, data) : bayes::laplace_fit(spec, data);
  draws.item_id = span.item_id;
  draws.label_id = span.label_id;
  fit.divergences = draws.divergence_count;
  if (options.engine == Engine::Hmc) {
    auto diag = bayes::convergence_diagnostics(draws);
    if (!diag.single_chain) fit.max_rhat = diag.max_rhat;
    if (std::isfinite(diag.min_ess)) fit.min_ess = diag.min_ess;
  }

  // Cells whose levels the pair never saw cannot be predicted; the remaining
  // cells are poststratified with their weights renormalized.
  std::vector<mrp::CellEstimate> cells;
  Strata local;
  local.empirical = prepared.strata.empirical;
  for (const auto& cell : prepared.strata.cells) {
    try {
      auto est = mrp::cell_probability(draws, cell.key());
      est.item_id = span.item_id;
      est.label_id = span.label_id;
      cells.push_back(std::move(est));
      local.cells.push_back(cell);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnknownLevel) throw;
    }
  }
  fit.countries = mrp::poststratify(cells, local, mrp::kByCountry);
  return fit;
}

}  // namespace

MrpRun run_mrp(const Prepared& prepared, const Options& options) {
  options.validate();
  MrpRun run;
  run.engine = options.engine;
  auto spans = pair_spans(prepared.records);
  auto countries = distinct_countries(prepared.records);
  run.pairs.resize(spans.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < spans.size(); k = next++) {
      try {
        run.pairs[k] = fit_pair(prepared, spans[k], countries, options);
      } catch (const std::exception& e) {
        run.pairs[k] = PairFit{};
        run.pairs[k].item_id = spans[k].item_id;
        run.pairs[k].label_id = spans[k].label_id;
        run.pairs[k].error = e.what();
      }
    }
  };
  unsigned threads = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(spans.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return run;
}

std::vector<mrp::CountryEstimate> MrpRun::estimates() const {
  std::vector<mrp::CountryEstimate> out;
  for (const auto& p : pairs) {
    for (const auto& [country, est] : p.countries) out.push_back({p.item_id, p.label_id, country, est});
  }
  return out;
}

nlohmann::json MrpRun::to_json() const {
  nlohmann::json j;
  j["engine"] = std::string(to_string(engine));
  j["approximate"] = engine == Engine::Laplace;
  std::size_t failed = 0;
  long divergences = 0;
  std::optional<double> max_rhat, min_ess;
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& p : pairs) {
    if (!p.error.empty()) {
      ++failed;
      failures.push_back({{"item_id", p.item_id}, {"label_id", p.label_id}, {"error", p.error}});
      continue;
    }
    divergences += p.divergences;
    if (p.max_rhat) max_rhat = std::max(max_rhat.value_or(0.0), *p.max_rhat);
    if (p.min_ess) min_ess = std::min(min_ess.value_or(std::numeric_limits<double>::infinity()), *p.min_ess);
  }
  j["pairs"] = pairs.size();
  j["failed_pairs"] = failed;
  j["failures"] = failures;
  j["divergences"] = divergences;
  j["max_rhat"] = max_rhat ? nlohmann::json(*max_rhat) : nlohmann::json(nullptr);
  j["min_ess"] = min_ess ? nlohmann::json(*min_ess) : nlohmann::json(nullptr);
  return j;
}

std::vector<mrp::ConsistencyVerdict> classify(std::span<const mrp::CountryEstimate> estimates, const Options& options) {
  std::map<std::pair<std::string, std::string>, std::map<std::string, double>> by_pair;
  for (const auto& e : estimates) by_pair[{e.item_id, e.label_id}][e.country] = e.estimate.mean;
  std::vector<mrp::ConsistencyVerdict> out;
  for (const auto& [key, countries] : by_pair) {
    auto v = mrp::classify_consistency(countries, options.sd_threshold, options.majority_line);
    v.item_id = key.first;
    v.label_id = key.second;
    out.push_back(std::move(v));
  }
  return out;
}

nlohmann::json classification_json(std::span<const mrp::ConsistencyVerdict> verdicts) {
  std::size_t inconsistent = 0, ties = 0;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& v : verdicts) {
    if (v.tie_at_majority_line) ++ties;
    if (v.classification != mrp::Classification::Inconsistent) continue;
    ++inconsistent;
    list.push_back({{"item_id", v.item_id},
                    {"label_id", v.label_id},
                    {"cross_country_sd", v.cross_country_sd},
                    {"min_country", v.min_country},
                    {"max_country", v.max_country}});
  }
  return {{"pairs", verdicts.size()},
          {"inconsistent", inconsistent},
          {"consistent", verdicts.size() - inconsistent},
          {"ties_at_majority_line", ties},
          {"inconsistent_pairs", list}};
}

CultureRun run_culture(const Prepared& prepared, std::span<const mrp::ConsistencyVerdict> verdicts,
                       const HofstedeTable& hofstede, const Options& options) {
  CultureRun run;
  std::vector<HofstedeDimension> dims;
  try {
    run.selection = culture::select_dimensions(prepared.records, hofstede, options.alpha);
    dims = run.selection->selected;
    for (const auto& n : run.selection->notes) run.notes.push_back(n);
  } catch (const Error& e) {
    run.notes.push_back(std::string("dimension selection failed: ") + e.what());
  }
  if (dims.empty()) {
    dims = {HofstedeDimension::Uncertainty, HofstedeDimension::LongTermOrientation};
    run.notes.push_back("no dimension selected; CDI uses uncertainty and long_term_orientation");
  }

  std::set<std::string> in_verdicts;
  for (const auto& v : verdicts) {
    for (const auto& [c, est] : v.country_estimates) in_verdicts.insert(c);
  }
  std::vector<std::string> countries;
  for (const auto& c : in_verdicts) {
    if (hofstede.find(c)) countries.push_back(c);
    else run.notes.push_back("no Hofstede row for " + c + "; left out of CDI");
  }
  run.matrix = culture::cdi(hofstede, dims, countries);

  try {
    run.similarities = culture::pair_similarity(verdicts);
    run.trend = culture::cdi_similarity_trend(run.matrix, run.similarities);
  } catch (const Error& e) {
    run.notes.push_back(std::string("similarity trend skipped: ") + e.what());
  }
  try {
    run.ranks = culture::label_rank_analysis(verdicts);
  } catch (const Error& e) {
    run.notes.push_back(std::string("rank analysis skipped: ") + e.what());
  }
  return run;
}

nlohmann::json CultureRun::to_json() const {
  nlohmann::json j;
  j["selection"] = selection ? culture::to_json(*selection) : nlohmann::json(nullptr);
  std::vector<std::string> dims;
  for (auto d : matrix.dimensions_used) dims.emplace_back(annotaudit::to_string(d));
  j["cdi_dimensions"] = dims;
  j["trend"] = culture::to_json(trend);
  j["ranks"] = ranks ? culture::to_json(*ranks) : nlohmann::json(nullptr);
  j["notes"] = notes;
  return j;
}

matching::Sweep run_matching(const Prepared& prepared, std::span<const mrp::ConsistencyVerdict> verdicts,
                             const Options& options) {
  matching::MatchSpec spec;
  spec.caliper = options.caliper;
  spec.seed = stats::mix_seed(options.seed, 0x4d41544348);
  return matching::language_effect_sweep(prepared.records, verdicts, spec);
}

nlohmann::json matching_json(const matching::Sweep& sweep) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json countries = nlohmann::json::object();
  for (const auto& [country, s] : sweep.samples) {
    double worst_before = 0.0, worst_after = 0.0;
    for (const auto& b : s.balance) {
      worst_before = std::max(worst_before, std::abs(b.smd_before));
      worst_after = std::max(worst_after, std::abs(b.smd_after));
    }
    countries[country] = {{"pairs", s.pairs.size()},
                          {"treated", s.treated_count},
                          {"controls", s.control_count},
                          {"unmatched_treated", s.unmatched_treated},
                          {"max_abs_smd_before", worst_before},
                          {"max_abs_smd_after", worst_after},
                          {"propensity_fallback", s.propensity_fallback}};
  }
  std::size_t significant = 0;
  for (const auto& c : sweep.contexts) {
    if (c.effect.p_value && *c.effect.p_value < 0.05) ++significant;
  }
  return {{"contexts", sweep.contexts.size()},
          {"significant_contexts", significant},
          {"infeasible_contexts", sweep.infeasible},
          {"share_significant_inconsistent", opt(sweep.share_significant_inconsistent)},
          {"share_significant_consistent", opt(sweep.share_significant_consistent)},
          {"countries", countries},
          {"notices", sweep.notices}};
}

evaluate::Evaluation run_evaluation(const Prepared& prepared, std::span<const mrp::ConsistencyVerdict> verdicts,
                                    const Options& options) {
  std::set<std::pair<std::string, std::string>> known;
  for (const auto& v : verdicts) known.insert({v.item_id, v.label_id});
  auto covered = [&](const AnnotationRecord& r) { return known.count({r.item_id, r.label_id}) > 0; };

  auto spec = options.split;
  spec.seed = stats::mix_seed(options.seed, 0x4556414c);
  std::vector<std::string> notes;
  bool all_covered = std::all_of(prepared.records.begin(), prepared.records.end(), covered);
  std::vector<AnnotationRecord> subset, held_out;
  if (!all_covered) {
    std::copy_if(prepared.records.begin(), prepared.records.end(), std::back_inserter(subset), covered);
    notes.push_back("rows of pairs without a verdict were left out of the evaluation");
  }
  std::copy_if(prepared.held_out.begin(), prepared.held_out.end(), std::back_inserter(held_out), covered);
  auto ev = evaluate::run(all_covered ? std::span<const AnnotationRecord>(prepared.records) : subset, verdicts, spec,
                          prepared.strata.empirical ? nullptr : &prepared.strata, held_out);
  ev.warnings.insert(ev.warnings.begin(), notes.begin(), notes.end());
  return ev;
}

nlohmann::json filter_json(const FilterReport& r) {
  nlohmann::json dropped = nlohmann::json::array();
  for (const auto& d : r.dropped_cells) dropped.push_back({{"cell", to_string(d.cell)}, {"respondents", d.respondents}});
  return {{"input_records", r.input_records},     {"removed_country", r.removed_country},
          {"removed_item", r.removed_item},       {"removed_gender", r.removed_gender},
          {"removed_privacy", r.removed_privacy}, {"output_records", r.output_records},
          {"dropped_cells", dropped}};
}

namespace {

std::string path_in(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

template <typename Fn>
void write_table(const std::string& dir, const std::string& name, Fn&& fn) {
  std::ostringstream out;
  fn(out);
  report::write_text(path_in(dir, name), out.str());
}

nlohmann::json with_provenance(nlohmann::json body, const report::Provenance& provenance) {
  body["provenance"] = provenance.to_json();
  return body;
}

}  // namespace

void write_mrp_outputs(const std::string& dir, const MrpRun& run, const report::Provenance& provenance) {
  auto comments = provenance.comment_lines();
  comments.push_back(std::string("engine: ") + std::string(to_string(run.engine)) +
                     (run.engine == Engine::Laplace ? " (approximate)" : ""));
  auto estimates = run.estimates();
  write_table(dir, "estimates.csv", [&](std::ostream& o) { mrp::write_estimates_csv(o, estimates, comments); });
  report::write_json(path_in(dir, "mrp.json"), with_provenance(run.to_json(), provenance));
}

void write_classify_outputs(const std::string& dir, std::span<const mrp::ConsistencyVerdict> verdicts,
                            const report::Provenance& provenance) {
  auto comments = provenance.comment_lines();
  write_table(dir, "verdicts.csv", [&](std::ostream& o) { mrp::write_verdicts_csv(o, verdicts, comments); });
  auto heatmap = mrp::consistency_heatmap(verdicts);
  write_table(dir, "heatmap.csv", [&](std::ostream& o) { mrp::write_heatmap_csv(o, heatmap, comments); });
  report::write_json(path_in(dir, "classification.json"), with_provenance(classification_json(verdicts), provenance));
}

void write_culture_outputs(const std::string& dir, const CultureRun& run, const report::Provenance& provenance) {
  auto comments = provenance.comment_lines();
  write_table(dir, "cdi.csv", [&](std::ostream& o) { culture::write_cdi_csv(o, run.matrix, comments); });
  write_table(dir, "similarity.csv",
              [&](std::ostream& o) { culture::write_similarity_csv(o, run.similarities, &run.matrix, comments); });
  if (run.ranks) {
    write_table(dir, "ranks.csv", [&](std::ostream& o) { culture::write_rank_csv(o, *run.ranks, comments); });
  }
  report::write_json(path_in(dir, "culture.json"), with_provenance(run.to_json(), provenance));
}

void write_matching_outputs(const std::string& dir, const matching::Sweep& sweep,
                            const report::Provenance& provenance) {
  auto comments = provenance.comment_lines();
  write_table(dir, "matches.csv", [&](std::ostream& o) { matching::write_matches_csv(o, sweep.samples, comments); });
  write_table(dir, "balance.csv", [&](std::ostream& o) { matching::write_balance_csv(o, sweep.samples, comments); });
  write_table(dir, "effects.csv", [&](std::ostream& o) { matching::write_effects_csv(o, sweep.contexts, comments); });
  report::write_json(path_in(dir, "matching.json"), with_provenance(matching_json(sweep), provenance));
}

void write_evaluation_outputs(const std::string& dir, const evaluate::Evaluation& evaluation,
                              const report::Provenance& provenance) {
  auto comments = provenance.comment_lines();
  write_table(dir, "eval.csv", [&](std::ostream& o) { evaluate::write_eval_csv(o, evaluation.report, comments); });
  report::write_json(path_in(dir, "evaluation.json"), with_provenance(evaluate::to_json(evaluation), provenance));
}

AuditResult audit(std::span<const AnnotationRecord> records, const std::optional<Strata>& population,
                  const HofstedeTable& hofstede, const Options& options, const std::string& dir,
                  const report::Provenance& provenance) {
  options.validate();
  AuditResult result;
  auto prepared = prepare(records, population, options);

  result.mrp = run_mrp(prepared, options);
  auto estimates = result.mrp.estimates();
  result.verdicts = classify(estimates, options);
  result.culture = run_culture(prepared, result.verdicts, hofstede, options);
  result.matching = run_matching(prepared, result.verdicts, options);
  result.evaluation = run_evaluation(prepared, result.verdicts, options);

  write_mrp_outputs(dir, result.mrp, provenance);
  write_classify_outputs(dir, result.verdicts, provenance);
  write_culture_outputs(dir, result.culture, provenance);
  write_matching_outputs(dir, result.matching, provenance);
  write_evaluation_outputs(dir, result.evaluation, provenance);

  nlohmann::json summary;
  summary["provenance"] = provenance.to_json();
  summary["filter"] = filter_json(prepared.filter_report);
  summary["strata"] = {{"cells", prepared.strata.cells.size()}, {"empirical", prepared.strata.empirical}};
  summary["mrp"] = result.mrp.to_json();
  summary["classification"] = classification_json(result.verdicts);
  summary["culture"] = result.culture.to_json();
  summary["matching"] = matching_json(result.matching);
  summary["evaluation"] = evaluate::to_json(result.evaluation);
  report::write_json(path_in(dir, "summary.json"), summary);
  result.summary = std::move(summary);
  return result;
}

}  // namespace annotaudit::pipeline
