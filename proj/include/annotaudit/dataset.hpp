#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "annotaudit/error.hpp"

namespace annotaudit {

enum class Gender { Female, Male, Other };
enum class AgeGroup { From18To24, From25To34, From35To44, From45To55, Over55 };

inline constexpr std::array<Gender, 3> kGenders = {Gender::Female, Gender::Male, Gender::Other};
inline constexpr std::array<AgeGroup, 5> kAgeGroups = {AgeGroup::From18To24, AgeGroup::From25To34,
                                                       AgeGroup::From35To44, AgeGroup::From45To55,
                                                       AgeGroup::Over55};

std::string_view to_string(Gender gender);
std::string_view to_string(AgeGroup age);
std::optional<Gender> parse_gender(std::string_view text);
std::optional<AgeGroup> parse_age_group(std::string_view text);
/// Ordinal code 0..4, used where age enters a distance or a regression as a number.
inline int age_code(AgeGroup age) { return static_cast<int>(age); }

/// Inclusive upper edges of the first four age buckets; the last bucket is open-ended.
struct AgeBuckets {
  int minimum_age = 18;
  std::array<int, 4> upper_edges = {24, 34, 44, 55};

  /// Maps a numeric age to its bucket. Ages below the minimum land in the
  /// first bucket and set `clamped`.
  AgeGroup bucket(int age, bool* clamped = nullptr) const;
};

struct AnnotationRecord {
  std::string respondent_id;
  std::string country;
  Gender gender = Gender::Female;
  AgeGroup age_group = AgeGroup::From18To24;
  std::string survey_language;
  std::string item_id;
  std::string label_id;
  bool annotated = false;
  int play_frequency = 0;
  int english_play_frequency = 0;
  bool ambassador = false;

  bool operator==(const AnnotationRecord&) const = default;
};

/// Poststratification cell identity.
struct CellKey {
  std::string country;
  Gender gender = Gender::Female;
  AgeGroup age_group = AgeGroup::From18To24;

  auto operator<=>(const CellKey&) const = default;
};
CellKey cell_of(const AnnotationRecord& record);
std::string to_string(const CellKey& cell);

struct StrataCell {
  std::string country;
  Gender gender = Gender::Female;
  AgeGroup age_group = AgeGroup::From18To24;
  double weight = 0.0;

  CellKey key() const { return {country, gender, age_group}; }
};

struct Strata {
  std::vector<StrataCell> cells;
  /// True when weights were derived from sample counts rather than a population table.
  bool empirical = false;

  /// Throws MissingCell when the cell has no row.
  double weight(const CellKey& cell) const;
  double total_weight() const;
};

enum class HofstedeDimension {
  PowerDistance,
  Individualism,
  Masculinity,
  Uncertainty,
  LongTermOrientation,
  Indulgence,
};
inline constexpr std::array<HofstedeDimension, 6> kHofstedeDimensions = {
    HofstedeDimension::PowerDistance,       HofstedeDimension::Individualism,
    HofstedeDimension::Masculinity,         HofstedeDimension::Uncertainty,
    HofstedeDimension::LongTermOrientation, HofstedeDimension::Indulgence};

std::string_view to_string(HofstedeDimension dimension);
std::optional<HofstedeDimension> parse_dimension(std::string_view name);

struct HofstedeRow {
  std::string country;
  std::array<double, 6> values{};  // in [0, 1], indexed by HofstedeDimension

  double value(HofstedeDimension d) const { return values[static_cast<std::size_t>(d)]; }
};

struct HofstedeTable {
  std::vector<HofstedeRow> rows;

  const HofstedeRow* find(std::string_view country) const;
  const HofstedeRow& at(std::string_view country) const;
};

struct FilterPolicy {
  std::set<std::string> excluded_countries;
  std::set<std::string> excluded_items;
  std::set<Gender> excluded_genders;
  int min_subgroup_size = 6;
};

/// Canonical field name -> header name in the input file.
struct ColumnMapping {
  std::map<std::string, std::string> names;

  static ColumnMapping canonical();
  static const std::vector<std::string>& fields();
  std::string header_for(const std::string& field) const;
};

struct RowIssue {
  std::size_t row = 0;  // 1-based data row
  ErrorCode code = ErrorCode::BadEnum;
  std::string field;
  std::string message;
  bool warning = false;
};

struct LoadResult {
  std::vector<AnnotationRecord> records;
  std::vector<RowIssue> issues;

  std::size_t error_count() const;
  std::size_t warning_count() const;
};

/// Throws MissingColumn (fatal); row-level problems go to the issue ledger.
LoadResult load_annotations(const std::string& path, const ColumnMapping& mapping = ColumnMapping::canonical(),
                            const AgeBuckets& buckets = {});
LoadResult parse_annotations(std::string_view text, const ColumnMapping& mapping = ColumnMapping::canonical(),
                             const AgeBuckets& buckets = {});
void write_annotations(std::ostream& out, std::span<const AnnotationRecord> records,
                       const std::vector<std::string>& comments = {});

struct DroppedCell {
  CellKey cell;
  std::size_t respondents = 0;
};

struct FilterReport {
  std::size_t input_records = 0;
  std::size_t removed_country = 0;
  std::size_t removed_item = 0;
  std::size_t removed_gender = 0;
  std::size_t removed_privacy = 0;
  std::size_t output_records = 0;
  std::vector<DroppedCell> dropped_cells;
};

struct FilterResult {
  std::vector<AnnotationRecord> records;
  FilterReport report;
};

/// Throws EmptyAfterFilter when no record survives.
FilterResult apply_filters(std::span<const AnnotationRecord> records, const FilterPolicy& policy);

Strata load_strata(const std::string& path);
Strata parse_strata(std::string_view text);
void write_strata(std::ostream& out, const Strata& strata, const std::vector<std::string>& comments = {});

/// One cell per observed (country, gender, age_group), weights normalized to 1.
/// Without a population table the weights are empirical record shares.
Strata build_strata(std::span<const AnnotationRecord> records, const std::optional<Strata>& population);
Strata build_strata(std::span<const AnnotationRecord> records, const std::optional<std::string>& population_path);

/// Values on disk are 0-100 and are divided by 100.
HofstedeTable load_hofstede(const std::string& path);
HofstedeTable parse_hofstede(std::string_view text);
void write_hofstede(std::ostream& out, const HofstedeTable& table, const std::vector<std::string>& comments = {});

/// Sorted distinct values helpers used across modules.
std::vector<std::string> distinct_countries(std::span<const AnnotationRecord> records);
std::vector<std::string> distinct_items(std::span<const AnnotationRecord> records);
std::vector<std::string> distinct_labels(std::span<const AnnotationRecord> records);

}  // namespace annotaudit
