#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "annotaudit/bayes.hpp"
#include "annotaudit/culture.hpp"
#include "annotaudit/dataset.hpp"
#include "annotaudit/evaluate.hpp"
#include "annotaudit/matching.hpp"
#include "annotaudit/mrp.hpp"
#include "annotaudit/report.hpp"
#include "json.hpp"

// Stage orchestration shared by the subcommands and `audit`, so that running
// the stages one by one writes the same tables as the full audit.
namespace annotaudit::pipeline {

enum class Engine { Hmc, Laplace };

std::string_view to_string(Engine engine);
std::optional<Engine> parse_engine(std::string_view text);

/// Removes IN and SA respondents and non-binary respondents; privacy threshold 6.
FilterPolicy default_filter();

struct Options {
  std::uint64_t seed = 0;
  Engine engine = Engine::Hmc;
  double sd_threshold = 0.05;
  double majority_line = 0.5;
  double alpha = 0.001;
  double caliper = 0.2;
  evaluate::SplitSpec split;
  FilterPolicy filter = default_filter();
  bayes::MrpModelSpec model;
  unsigned jobs = 1;

  /// Throws ConfigError.
  void validate() const;
};

struct Prepared {
  std::vector<AnnotationRecord> records;    // filtered, sorted by (item, label, respondent)
  std::vector<AnnotationRecord> held_out;   // rows of excluded countries
  FilterReport filter_report;
  Strata strata;
};

Prepared prepare(std::span<const AnnotationRecord> records, const std::optional<Strata>& population,
                 const Options& options);

struct PairFit {
  std::string item_id;
  std::string label_id;
  std::map<std::string, mrp::SubgroupEstimate> countries;
  int divergences = 0;
  std::optional<double> max_rhat;
  std::optional<double> min_ess;
  std::string error;  // non-empty when the fit failed
};

struct MrpRun {
  Engine engine = Engine::Hmc;
  std::vector<PairFit> pairs;  // sorted by (item, label)

  std::vector<mrp::CountryEstimate> estimates() const;
  nlohmann::json to_json() const;
};

/// One model per (item, label), fitted on up to `options.jobs` threads. Each
/// pair's seed derives from the run seed and the pair identity only.
MrpRun run_mrp(const Prepared& prepared, const Options& options);

std::vector<mrp::ConsistencyVerdict> classify(std::span<const mrp::CountryEstimate> estimates, const Options& options);
nlohmann::json classification_json(std::span<const mrp::ConsistencyVerdict> verdicts);

struct CultureRun {
  std::optional<culture::DimensionSelection> selection;
  culture::CdiMatrix matrix;
  std::vector<culture::CountryPairSimilarity> similarities;
  culture::CdiTrend trend;
  std::optional<culture::RankAnalysis> ranks;
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
};

CultureRun run_culture(const Prepared& prepared, std::span<const mrp::ConsistencyVerdict> verdicts,
                       const HofstedeTable& hofstede, const Options& options);

matching::Sweep run_matching(const Prepared& prepared, std::span<const mrp::ConsistencyVerdict> verdicts,
                             const Options& options);
nlohmann::json matching_json(const matching::Sweep& sweep);

evaluate::Evaluation run_evaluation(const Prepared& prepared, std::span<const mrp::ConsistencyVerdict> verdicts,
                                    const Options& options);

nlohmann::json filter_json(const FilterReport& report);

// Artifact writers; every file carries the provenance block.
void write_mrp_outputs(const std::string& dir, const MrpRun& run, const report::Provenance& provenance);
void write_classify_outputs(const std::string& dir, std::span<const mrp::ConsistencyVerdict> verdicts,
                            const report::Provenance& provenance);
void write_culture_outputs(const std::string& dir, const CultureRun& run, const report::Provenance& provenance);
void write_matching_outputs(const std::string& dir, const matching::Sweep& sweep, const report::Provenance& provenance);
void write_evaluation_outputs(const std::string& dir, const evaluate::Evaluation& evaluation,
                              const report::Provenance& provenance);

struct AuditResult {
  MrpRun mrp;
  std::vector<mrp::ConsistencyVerdict> verdicts;
  CultureRun culture;
  matching::Sweep matching;
  evaluate::Evaluation evaluation;
  nlohmann::json summary;
};

/// Every stage in order; writes all tables plus summary.json under `dir`.
AuditResult audit(std::span<const AnnotationRecord> records, const std::optional<Strata>& population,
                  const HofstedeTable& hofstede, const Options& options, const std::string& dir,
                  const report::Provenance& provenance);

}  // namespace annotaudit::pipeline
