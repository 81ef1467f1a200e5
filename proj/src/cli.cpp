#include "annotaudit/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "annotaudit/csv.hpp"
#include "annotaudit/pipeline.hpp"
#include "annotaudit/report.hpp"
#include "annotaudit/synth.hpp"

namespace annotaudit::cli {

namespace {

constexpr const char* kEnvPrefix = "ANNOTAUDIT_";

struct Settings {
  std::string annotations;
  std::string strata;
  std::string hofstede;
  std::string out = ".";
  std::string estimates;
  std::string verdicts;
  std::string engine = "hmc";
  std::string sampling = "random";
  std::string preset = "full";
  std::string homogeneous_country = "US";
  std::uint64_t seed = 0;
  double sd_threshold = 0.05;
  double majority_line = 0.5;
  double alpha = 0.001;
  double caliper = 0.2;
  double test_fraction = 0.30;
  unsigned jobs = 1;
  std::vector<std::string> exclude_countries = {"IN", "SA"};
  int min_subgroup_size = 6;
  int chains = 4;
  int warmup = 1000;
  int draws = 1000;
  std::optional<double> noise_sd;
  std::optional<int> respondents;
};

std::string env_name(const std::string& flag) {
  std::string name = kEnvPrefix;
  for (char c : flag) name += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

template <typename T>
CLI::Option* flag(CLI::App* app, const std::string& name, T& target, const std::string& help) {
  return app->add_option("--" + name, target, help)->envname(env_name(name))->capture_default_str();
}

// Exit code for a toolkit error: input and configuration problems are
// validation failures (2); numerical breakdowns are internal (1).
int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFinite:
    case ErrorCode::AdaptationFailure:
    case ErrorCode::AllDivergent:
    case ErrorCode::HessianNotPD:
    case ErrorCode::Singular:
    case ErrorCode::Separation:
    case ErrorCode::SingularCovariance:
    case ErrorCode::DegenerateClusters:
      return 1;
    default:
      return 2;
  }
}

pipeline::Options options_from(const Settings& s) {
  pipeline::Options o;
  o.seed = s.seed;
  o.engine = pipeline::parse_engine(s.engine).value();
  o.sd_threshold = s.sd_threshold;
  o.majority_line = s.majority_line;
  o.alpha = s.alpha;
  o.caliper = s.caliper;
  o.split.test_fraction = s.test_fraction;
  o.split.homogeneous_country = s.homogeneous_country;
  o.split.sampling = evaluate::parse_sampling(s.sampling).value();
  o.filter.excluded_countries = {s.exclude_countries.begin(), s.exclude_countries.end()};
  o.filter.min_subgroup_size = s.min_subgroup_size;
  o.model.chains = s.chains;
  o.model.warmup = s.warmup;
  o.model.draws_per_chain = s.draws;
  o.jobs = s.jobs;
  o.validate();
  return o;
}

// --jobs is deliberately absent: artifacts must not depend on it.
report::Provenance provenance_for(const std::string& command, const Settings& s) {
  report::Provenance p;
  p.command = command;
  p.seed = s.seed;
  auto num = [](double v) { return csv::format_double(v); };
  if (command != "synth" && command != "validate") {
    p.settings["engine"] = s.engine;
    p.settings["sd_threshold"] = num(s.sd_threshold);
    p.settings["majority_line"] = num(s.majority_line);
    p.settings["alpha"] = num(s.alpha);
    p.settings["caliper"] = num(s.caliper);
    p.settings["test_fraction"] = num(s.test_fraction);
    p.settings["homogeneous_country"] = s.homogeneous_country;
    p.settings["sampling"] = s.sampling;
    std::string excluded;
    for (const auto& c : s.exclude_countries) excluded += (excluded.empty() ? "" : ",") + c;
    p.settings["excluded_countries"] = excluded;
    p.settings["min_subgroup_size"] = std::to_string(s.min_subgroup_size);
    if (s.engine == "hmc") {
      p.settings["chains"] = std::to_string(s.chains);
      p.settings["warmup"] = std::to_string(s.warmup);
      p.settings["draws"] = std::to_string(s.draws);
    }
  }
  if (!s.annotations.empty()) p.add_input("annotations", s.annotations);
  if (!s.strata.empty()) p.add_input("strata", s.strata);
  if (!s.hofstede.empty()) p.add_input("hofstede", s.hofstede);
  if (!s.estimates.empty()) p.add_input("estimates", s.estimates);
  if (!s.verdicts.empty()) p.add_input("verdicts", s.verdicts);
  return p;
}

struct Inputs {
  std::vector<AnnotationRecord> records;
  std::optional<Strata> population;
  HofstedeTable hofstede;
};

Inputs load_inputs(const Settings& s, std::ostream& err) {
  Inputs in;
  auto loaded = load_annotations(s.annotations);
  if (loaded.error_count() > 0) {
    err << "warning: " << loaded.error_count() << " annotation rows rejected; run `validate` for details\n";
  }
  in.records = std::move(loaded.records);
  if (!s.strata.empty()) in.population = load_strata(s.strata);
  in.hofstede = s.hofstede.empty() ? synth::bundled_hofstede() : load_hofstede(s.hofstede);
  return in;
}

std::vector<mrp::ConsistencyVerdict> verdicts_for(const Settings& s, const pipeline::Prepared& prepared,
                                                  const pipeline::Options& o) {
  if (!s.verdicts.empty()) return mrp::read_verdicts_csv(s.verdicts, o.sd_threshold, o.majority_line);
  auto run = pipeline::run_mrp(prepared, o);
  return pipeline::classify(run.estimates(), o);
}

int cmd_validate(const Settings& s, std::ostream& out) {
  auto prov = provenance_for("validate", s);
  auto loaded = load_annotations(s.annotations);
  nlohmann::json issues = nlohmann::json::array();
  for (const auto& i : loaded.issues) {
    issues.push_back({{"row", i.row},
                      {"code", std::string(to_string(i.code))},
                      {"field", i.field},
                      {"message", i.message},
                      {"warning", i.warning}});
  }
  std::size_t errors = loaded.error_count();
  std::vector<std::string> problems;
  nlohmann::json filter = nullptr;
  try {
    pipeline::Options o;
    o.filter.excluded_countries = {s.exclude_countries.begin(), s.exclude_countries.end()};
    o.filter.min_subgroup_size = s.min_subgroup_size;
    auto filtered = apply_filters(loaded.records, o.filter);
    filter = pipeline::filter_json(filtered.report);
    if (!s.strata.empty()) {
      auto strata = load_strata(s.strata);
      for (const auto& r : filtered.records) {
        try {
          strata.weight(cell_of(r));
        } catch (const Error& e) {
          problems.push_back(e.what());
          break;
        }
      }
    }
    if (!s.hofstede.empty()) {
      auto hof = load_hofstede(s.hofstede);
      for (const auto& c : distinct_countries(filtered.records)) {
        if (!hof.find(c)) problems.push_back("no Hofstede row for country " + c);
      }
    }
  } catch (const Error& e) {
    problems.push_back(e.what());
  }
  errors += problems.size();
  nlohmann::json j = {{"provenance", prov.to_json()},
                      {"records", loaded.records.size()},
                      {"row_errors", loaded.error_count()},
                      {"row_warnings", loaded.warning_count()},
                      {"issues", issues},
                      {"problems", problems},
                      {"filter", filter},
                      {"valid", errors == 0}};
  report::write_json((std::filesystem::path(s.out) / "validation.json").string(), j);
  out << loaded.records.size() << " records, " << loaded.error_count() << " rejected rows, " << problems.size()
      << " other problems\n";
  return errors == 0 ? 0 : 2;
}

int cmd_mrp(const Settings& s, std::ostream& out, std::ostream& err) {
  auto o = options_from(s);
  auto in = load_inputs(s, err);
  auto prepared = pipeline::prepare(in.records, in.population, o);
  auto run = pipeline::run_mrp(prepared, o);
  pipeline::write_mrp_outputs(s.out, run, provenance_for("mrp", s));
  std::size_t failed = std::count_if(run.pairs.begin(), run.pairs.end(), [](const auto& p) { return !p.error.empty(); });
  out << run.pairs.size() << " pairs fitted with " << s.engine << ", " << failed << " failed\n";
  if (failed > 0) err << "warning: " << failed << " pairs failed; see mrp.json\n";
  return failed == run.pairs.size() && failed > 0 ? 1 : 0;
}

int cmd_classify(const Settings& s, std::ostream& out, std::ostream& err) {
  auto o = options_from(s);
  std::vector<mrp::ConsistencyVerdict> verdicts;
  if (!s.estimates.empty()) {
    verdicts = pipeline::classify(mrp::read_estimates_csv(s.estimates), o);
  } else {
    auto in = load_inputs(s, err);
    auto prepared = pipeline::prepare(in.records, in.population, o);
    verdicts = pipeline::classify(pipeline::run_mrp(prepared, o).estimates(), o);
  }
  pipeline::write_classify_outputs(s.out, verdicts, provenance_for("classify", s));
  auto inconsistent = std::count_if(verdicts.begin(), verdicts.end(), [](const auto& v) {
    return v.classification == mrp::Classification::Inconsistent;
  });
  out << verdicts.size() << " pairs, " << inconsistent << " inconsistent\n";
  return 0;
}

int cmd_culture(const Settings& s, std::ostream& out, std::ostream& err) {
  auto o = options_from(s);
  auto in = load_inputs(s, err);
  auto prepared = pipeline::prepare(in.records, in.population, o);
  auto verdicts = verdicts_for(s, prepared, o);
  auto run = pipeline::run_culture(prepared, verdicts, in.hofstede, o);
  pipeline::write_culture_outputs(s.out, run, provenance_for("culture", s));
  out << "CDI over " << run.matrix.countries.size() << " countries";
  if (run.trend.inconsistent) out << ", inconsistent-label slope " << run.trend.inconsistent->slope;
  out << '\n';
  for (const auto& n : run.notes) err << "note: " << n << '\n';
  return 0;
}

int cmd_match(const Settings& s, std::ostream& out, std::ostream& err) {
  auto o = options_from(s);
  auto in = load_inputs(s, err);
  auto prepared = pipeline::prepare(in.records, in.population, o);
  std::vector<mrp::ConsistencyVerdict> verdicts;
  if (!s.verdicts.empty()) verdicts = mrp::read_verdicts_csv(s.verdicts, o.sd_threshold, o.majority_line);
  auto sweep = pipeline::run_matching(prepared, verdicts, o);
  pipeline::write_matching_outputs(s.out, sweep, provenance_for("match", s));
  out << sweep.contexts.size() << " matched contexts, " << sweep.infeasible << " infeasible\n";
  for (const auto& n : sweep.notices) err << "note: " << n << '\n';
  return 0;
}

int cmd_evaluate(const Settings& s, std::ostream& out, std::ostream& err) {
  auto o = options_from(s);
  auto in = load_inputs(s, err);
  auto prepared = pipeline::prepare(in.records, in.population, o);
  auto verdicts = verdicts_for(s, prepared, o);
  auto ev = pipeline::run_evaluation(prepared, verdicts, o);
  pipeline::write_evaluation_outputs(s.out, ev, provenance_for("evaluate", s));
  out << "relative F1 improvement on inconsistent labels: ";
  if (ev.report.relative_improvement) out << *ev.report.relative_improvement << '\n';
  else out << "NA\n";
  return 0;
}

int cmd_synth(const Settings& s, std::ostream& out) {
  synth::SynthConfig cfg;
  if (s.preset == "full") cfg = synth::paper_scale_preset(s.seed);
  else if (s.preset == "smoke") cfg = synth::smoke_preset(s.seed);
  else cfg = synth::skewed_sampling_config(s.seed);
  if (s.noise_sd) cfg.noise_sd = *s.noise_sd;
  if (s.respondents) cfg.respondents = *s.respondents;
  auto prov = provenance_for("synth", s);
  prov.settings["preset"] = s.preset;
  prov.settings["noise_sd"] = csv::format_double(cfg.noise_sd);
  prov.settings["respondents"] = std::to_string(cfg.respondents);
  auto output = synth::generate(cfg);
  synth::write_outputs(output, s.out, prov.comment_lines(), prov.to_json());
  out << output.annotations.size() << " annotation rows, " << output.manifest.inconsistent_count()
      << " inconsistent pairs written to " << s.out << '\n';
  return 0;
}

int cmd_audit(const Settings& s, std::ostream& out, std::ostream& err) {
  auto o = options_from(s);
  auto in = load_inputs(s, err);
  auto result = pipeline::audit(in.records, in.population, in.hofstede, o, s.out, provenance_for("audit", s));
  out << "audit written to " << s.out << ": " << result.verdicts.size() << " pairs, "
      << result.summary["classification"]["inconsistent"].get<std::size_t>() << " inconsistent\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Settings s;
  CLI::App app{"Audit annotation datasets for cross-country label consistency", "annotaudit"};
  app.require_subcommand(0, 1);
  app.set_version_flag("--version", std::string(report::version()));

  auto inputs = [&](CLI::App* sub, bool annotations_required) {
    auto* a = flag(sub, "annotations", s.annotations, "annotation CSV");
    if (annotations_required) a->required();
    flag(sub, "strata", s.strata, "population strata CSV (default: empirical weights)");
    flag(sub, "hofstede", s.hofstede, "Hofstede CSV (default: bundled fixture)");
    flag(sub, "out", s.out, "output directory");
    flag(sub, "seed", s.seed, "random seed");
    flag(sub, "exclude-country", s.exclude_countries, "countries removed before analysis")->delimiter(',');
    flag(sub, "min-subgroup-size", s.min_subgroup_size, "privacy threshold per cell")->check(CLI::PositiveNumber);
  };
  auto model = [&](CLI::App* sub) {
    flag(sub, "engine", s.engine, "posterior engine")->check(CLI::IsMember({"hmc", "laplace"}));
    flag(sub, "chains", s.chains, "HMC chains")->check(CLI::PositiveNumber);
    flag(sub, "warmup", s.warmup, "HMC warmup iterations per chain")->check(CLI::PositiveNumber);
    flag(sub, "draws", s.draws, "HMC draws per chain")->check(CLI::PositiveNumber);
    flag(sub, "jobs", s.jobs, "parallel (item, label) fits")->check(CLI::PositiveNumber);
  };
  auto thresholds = [&](CLI::App* sub) {
    flag(sub, "sd-threshold", s.sd_threshold, "cross-country SD above which a pair may be inconsistent");
    flag(sub, "majority-line", s.majority_line, "share that counts as majority agreement");
  };
  auto eval_flags = [&](CLI::App* sub) {
    flag(sub, "test-fraction", s.test_fraction, "held-out respondent share");
    flag(sub, "homogeneous-country", s.homogeneous_country, "country of the homogeneous train set");
    flag(sub, "sampling", s.sampling, "train-set sampling")
        ->check(CLI::IsMember({"random", "representative_stratified", "oversample_to_match"}));
  };

  auto* validate = app.add_subcommand("validate", "check inputs and report row-level problems");
  inputs(validate, true);
  auto* mrp_cmd = app.add_subcommand("mrp", "fit per-pair models and poststratify by country");
  inputs(mrp_cmd, true);
  model(mrp_cmd);
  auto* classify = app.add_subcommand("classify", "consistency verdicts and heatmap");
  inputs(classify, false);
  model(classify);
  thresholds(classify);
  flag(classify, "estimates", s.estimates, "estimates CSV from `mrp` (skips fitting)");
  auto* culture_cmd = app.add_subcommand("culture", "cultural distance, similarity trend and label ranks");
  inputs(culture_cmd, true);
  model(culture_cmd);
  thresholds(culture_cmd);
  flag(culture_cmd, "alpha", s.alpha, "significance level for dimension selection");
  flag(culture_cmd, "verdicts", s.verdicts, "verdicts CSV from `classify`");
  auto* match = app.add_subcommand("match", "matched English-survey language effects");
  inputs(match, true);
  thresholds(match);
  flag(match, "caliper", s.caliper, "caliper in SDs of the propensity logit");
  flag(match, "verdicts", s.verdicts, "verdicts CSV used to split effects by class");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "homogeneous versus heterogeneous train sets");
  inputs(evaluate_cmd, true);
  model(evaluate_cmd);
  thresholds(evaluate_cmd);
  eval_flags(evaluate_cmd);
  flag(evaluate_cmd, "verdicts", s.verdicts, "verdicts CSV from `classify`");
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset with its manifest");
  flag(synth_cmd, "out", s.out, "output directory");
  flag(synth_cmd, "seed", s.seed, "random seed");
  flag(synth_cmd, "preset", s.preset, "configuration")->check(CLI::IsMember({"full", "smoke", "skewed"}));
  flag(synth_cmd, "noise-sd", s.noise_sd, "override the truth jitter");
  flag(synth_cmd, "respondents", s.respondents, "override the respondent count")->check(CLI::PositiveNumber);
  auto* audit = app.add_subcommand("audit", "every stage, one summary.json");
  inputs(audit, true);
  model(audit);
  thresholds(audit);
  eval_flags(audit);
  flag(audit, "alpha", s.alpha, "significance level for dimension selection");
  flag(audit, "caliper", s.caliper, "caliper in SDs of the propensity logit");

  std::vector<const char*> argv;
  argv.push_back("annotaudit");
  for (const auto& a : args) argv.push_back(a.c_str());

  if (!args.empty() && !args.front().empty() && args.front().front() != '-') {
    const auto& name = args.front();
    auto subs = app.get_subcommands([&](CLI::App* sub) { return sub->get_name() == name; });
    if (subs.empty()) {
      err << to_string(ErrorCode::UnknownSubcommand) << ": '" << name << "'\n" << app.help();
      return 2;
    }
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name());
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << report::version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << to_string(ErrorCode::ConfigError) << ": " << e.what() << '\n';
    return 2;
  }

  if (app.get_subcommands().empty()) {
    err << app.help();
    return 2;
  }

  try {
    auto* sub = app.get_subcommands().front();
    const auto& name = sub->get_name();
    if (name == "validate") return cmd_validate(s, out);
    if (name == "mrp") return cmd_mrp(s, out, err);
    if (name == "classify") {
      if (s.estimates.empty() && s.annotations.empty()) {
        throw Error(ErrorCode::ConfigError, "classify needs --estimates or --annotations");
      }
      return cmd_classify(s, out, err);
    }
    if (name == "culture") return cmd_culture(s, out, err);
    if (name == "match") return cmd_match(s, out, err);
    if (name == "evaluate") return cmd_evaluate(s, out, err);
    if (name == "synth") return cmd_synth(s, out);
    if (name == "audit") return cmd_audit(s, out, err);
    throw Error(ErrorCode::UnknownSubcommand, name);
  } catch (const Error& e) {
    err << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace annotaudit::cli
