#include "annotaudit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <set>
#include <unordered_set>

#include "annotaudit/csv.hpp"

namespace annotaudit {

std::string_view to_string(Gender gender) {
  switch (gender) {
    case Gender::Female: return "female";
    case Gender::Male: return "male";
    case Gender::Other: return "other";
  }
  return "?";
}

std::string_view to_string(AgeGroup age) {
  switch (age) {
    case AgeGroup::From18To24: return "18-24";
    case AgeGroup::From25To34: return "25-34";
    case AgeGroup::From35To44: return "35-44";
    case AgeGroup::From45To55: return "45-55";
    case AgeGroup::Over55: return "55+";
  }
  return "?";
}

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string trim(std::string_view text) {
  auto begin = text.find_first_not_of(" \t");
  if (begin == std::string_view::npos) return {};
  auto end = text.find_last_not_of(" \t");
  return std::string(text.substr(begin, end - begin + 1));
}

std::optional<int> parse_int(std::string_view text) {
  int value = 0;
  auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::optional<double> parse_double(std::string_view text) {
  std::string copy(text);
  char* end = nullptr;
  double value = std::strtod(copy.c_str(), &end);
  if (copy.empty() || end != copy.c_str() + copy.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<bool> parse_bool(std::string_view text) {
  auto v = lower(text);
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  return std::nullopt;
}

}  // namespace

std::optional<Gender> parse_gender(std::string_view text) {
  auto v = lower(trim(text));
  if (v == "female" || v == "f" || v == "woman") return Gender::Female;
  if (v == "male" || v == "m" || v == "man") return Gender::Male;
  if (v == "other" || v == "non-binary" || v == "nonbinary") return Gender::Other;
  return std::nullopt;
}

std::optional<AgeGroup> parse_age_group(std::string_view text) {
  auto v = trim(text);
  for (AgeGroup age : kAgeGroups) {
    if (v == to_string(age)) return age;
  }
  if (v == "18 - 24") return AgeGroup::From18To24;
  if (v == "25 - 34") return AgeGroup::From25To34;
  if (v == "35 - 44") return AgeGroup::From35To44;
  if (v == "45 - 55" || v == "45-54") return AgeGroup::From45To55;
  if (v == "55 +" || v == "56+") return AgeGroup::Over55;
  return std::nullopt;
}

AgeGroup AgeBuckets::bucket(int age, bool* clamped) const {
  if (clamped) *clamped = age < minimum_age;
  for (std::size_t i = 0; i < upper_edges.size(); ++i) {
    if (age <= upper_edges[i]) return kAgeGroups[i];
  }
  return AgeGroup::Over55;
}

CellKey cell_of(const AnnotationRecord& record) {
  return {record.country, record.gender, record.age_group};
}

std::string to_string(const CellKey& cell) {
  return cell.country + "/" + std::string(to_string(cell.gender)) + "/" + std::string(to_string(cell.age_group));
}

double Strata::weight(const CellKey& cell) const {
  for (const auto& c : cells) {
    if (c.key() == cell) return c.weight;
  }
  throw Error(ErrorCode::MissingCell, "no stratum for cell " + to_string(cell));
}

double Strata::total_weight() const {
  double total = 0.0;
  for (const auto& c : cells) total += c.weight;
  return total;
}

std::string_view to_string(HofstedeDimension dimension) {
  switch (dimension) {
    case HofstedeDimension::PowerDistance: return "power_distance";
    case HofstedeDimension::Individualism: return "individualism";
    case HofstedeDimension::Masculinity: return "masculinity";
    case HofstedeDimension::Uncertainty: return "uncertainty";
    case HofstedeDimension::LongTermOrientation: return "long_term_orientation";
    case HofstedeDimension::Indulgence: return "indulgence";
  }
  return "?";
}

std::optional<HofstedeDimension> parse_dimension(std::string_view name) {
  for (auto d : kHofstedeDimensions) {
    if (name == to_string(d)) return d;
  }
  return std::nullopt;
}

const HofstedeRow* HofstedeTable::find(std::string_view country) const {
  for (const auto& row : rows) {
    if (row.country == country) return &row;
  }
  return nullptr;
}

const HofstedeRow& HofstedeTable::at(std::string_view country) const {
  if (const auto* row = find(country)) return *row;
  throw Error(ErrorCode::UnknownLevel, "no Hofstede row for country " + std::string(country));
}

ColumnMapping ColumnMapping::canonical() {
  ColumnMapping mapping;
  for (const auto& f : fields()) mapping.names[f] = f;
  return mapping;
}

const std::vector<std::string>& ColumnMapping::fields() {
  static const std::vector<std::string> kFields = {
      "respondent_id", "country", "gender", "age_group", "survey_language", "item_id",
      "label_id", "annotated", "play_frequency", "english_play_frequency", "ambassador"};
  return kFields;
}

std::string ColumnMapping::header_for(const std::string& field) const {
  auto it = names.find(field);
  return it == names.end() ? field : it->second;
}

std::size_t LoadResult::error_count() const {
  return static_cast<std::size_t>(std::count_if(issues.begin(), issues.end(), [](const RowIssue& i) { return !i.warning; }));
}

std::size_t LoadResult::warning_count() const { return issues.size() - error_count(); }

LoadResult load_annotations(const std::string& path, const ColumnMapping& mapping, const AgeBuckets& buckets) {
  return parse_annotations(csv::read_text(path), mapping, buckets);
}

LoadResult parse_annotations(std::string_view text, const ColumnMapping& mapping, const AgeBuckets& buckets) {
  LoadResult result;
  const auto& fields = ColumnMapping::fields();
  std::vector<std::size_t> index(fields.size());
  std::unordered_set<std::string> seen;
  std::size_t row_number = 0;

  csv::for_each_record(text, ',', [&](std::vector<std::string>& row, std::size_t, bool is_header) {
    if (is_header) {
      for (std::size_t f = 0; f < fields.size(); ++f) {
        auto name = mapping.header_for(fields[f]);
        auto it = std::find(row.begin(), row.end(), name);
        if (it == row.end()) throw Error(ErrorCode::MissingColumn, "missing column '" + name + "'");
        index[f] = static_cast<std::size_t>(it - row.begin());
      }
      return;
    }
    ++row_number;
    auto issue = [&](ErrorCode code, const std::string& field, const std::string& message, bool warning = false) {
      result.issues.push_back({row_number, code, field, message, warning});
    };
    auto cell = [&](std::size_t f) -> std::string_view {
      return index[f] < row.size() ? std::string_view(row[index[f]]) : std::string_view();
    };

    AnnotationRecord record;
    record.respondent_id = trim(cell(0));
    record.country = trim(cell(1));
    record.survey_language = trim(cell(4));
    record.item_id = trim(cell(5));
    record.label_id = trim(cell(6));
    bool ok = true;
    if (record.respondent_id.empty() || record.country.empty() || record.item_id.empty() || record.label_id.empty()) {
      issue(ErrorCode::BadEnum, "respondent_id", "empty identifier field");
      ok = false;
    }
    if (auto g = parse_gender(cell(2))) {
      record.gender = *g;
    } else {
      issue(ErrorCode::BadEnum, "gender", "unrecognized gender '" + std::string(cell(2)) + "'");
      ok = false;
    }
    if (auto a = parse_age_group(cell(3))) {
      record.age_group = *a;
    } else if (auto years = parse_int(trim(cell(3)))) {
      bool clamped = false;
      record.age_group = buckets.bucket(*years, &clamped);
      if (clamped) {
        issue(ErrorCode::BadEnum, "age_group",
              "age " + std::to_string(*years) + " below the first bucket, mapped to " +
                  std::string(to_string(record.age_group)),
              true);
      }
    } else {
      issue(ErrorCode::BadEnum, "age_group", "unrecognized age group '" + std::string(cell(3)) + "'");
      ok = false;
    }
    if (auto b = parse_bool(trim(cell(7)))) {
      record.annotated = *b;
    } else {
      issue(ErrorCode::BadEnum, "annotated", "not a boolean: '" + std::string(cell(7)) + "'");
      ok = false;
    }
    auto ordinal = [&](std::size_t f, int& out) {
      auto v = parse_int(trim(cell(f)));
      if (!v || *v < 0 || *v > 5) {
        issue(ErrorCode::BadEnum, fields[f], "ordinal outside 0..5: '" + std::string(cell(f)) + "'");
        ok = false;
      } else {
        out = *v;
      }
    };
    ordinal(8, record.play_frequency);
    ordinal(9, record.english_play_frequency);
    if (auto b = parse_bool(trim(cell(10)))) {
      record.ambassador = *b;
    } else {
      issue(ErrorCode::BadEnum, "ambassador", "not a boolean: '" + std::string(cell(10)) + "'");
      ok = false;
    }
    if (!ok) return;
    std::string key = record.respondent_id + '\x1f' + record.item_id + '\x1f' + record.label_id;
    if (!seen.insert(std::move(key)).second) {
      issue(ErrorCode::DuplicateTriple, "respondent_id",
            "duplicate (" + record.respondent_id + ", " + record.item_id + ", " + record.label_id + ")");
      return;
    }
    result.records.push_back(std::move(record));
  });
  return result;
}

void write_annotations(std::ostream& out, std::span<const AnnotationRecord> records,
                       const std::vector<std::string>& comments) {
  csv::Writer writer(out);
  for (const auto& c : comments) writer.comment(c);
  writer.row(ColumnMapping::fields());
  for (const auto& r : records) {
    writer.row({r.respondent_id, r.country, std::string(to_string(r.gender)), std::string(to_string(r.age_group)),
                r.survey_language, r.item_id, r.label_id, r.annotated ? "1" : "0", std::to_string(r.play_frequency),
                std::to_string(r.english_play_frequency), r.ambassador ? "1" : "0"});
  }
}

FilterResult apply_filters(std::span<const AnnotationRecord> records, const FilterPolicy& policy) {
  if (policy.min_subgroup_size < 1) throw Error(ErrorCode::InvalidArgument, "min_subgroup_size must be >= 1");
  FilterResult result;
  auto& report = result.report;
  report.input_records = records.size();

  std::vector<const AnnotationRecord*> kept;
  kept.reserve(records.size());
  for (const auto& r : records) {
    if (policy.excluded_countries.count(r.country)) {
      ++report.removed_country;
    } else if (policy.excluded_items.count(r.item_id)) {
      ++report.removed_item;
    } else if (policy.excluded_genders.count(r.gender)) {
      ++report.removed_gender;
    } else {
      kept.push_back(&r);
    }
  }

  std::map<CellKey, std::unordered_set<std::string>> respondents;
  for (const auto* r : kept) respondents[cell_of(*r)].insert(r->respondent_id);
  std::set<CellKey> dropped;
  for (const auto& [cell, ids] : respondents) {
    if (ids.size() < static_cast<std::size_t>(policy.min_subgroup_size)) {
      dropped.insert(cell);
      report.dropped_cells.push_back({cell, ids.size()});
    }
  }
  for (const auto* r : kept) {
    if (dropped.count(cell_of(*r))) {
      ++report.removed_privacy;
    } else {
      result.records.push_back(*r);
    }
  }
  report.output_records = result.records.size();
  if (result.records.empty()) throw Error(ErrorCode::EmptyAfterFilter, "no records survive the filter policy");
  return result;
}

Strata parse_strata(std::string_view text) {
  auto table = csv::parse(text);
  Strata strata;
  const std::vector<std::string> required = {"country", "gender", "age_group", "weight"};
  std::vector<std::size_t> index;
  for (const auto& name : required) {
    auto c = table.column(name);
    if (!c) throw Error(ErrorCode::MissingColumn, "strata file missing column '" + name + "'");
    index.push_back(*c);
  }
  std::set<CellKey> seen;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    auto at = [&](std::size_t k) -> std::string { return index[k] < row.size() ? trim(row[index[k]]) : ""; };
    auto g = parse_gender(at(1));
    auto a = parse_age_group(at(2));
    auto w = parse_double(at(3));
    std::string where = "strata row " + std::to_string(i + 1);
    if (!g) throw Error(ErrorCode::BadEnum, where + ": gender '" + at(1) + "'");
    if (!a) throw Error(ErrorCode::BadEnum, where + ": age_group '" + at(2) + "'");
    if (!w || *w < 0.0) throw Error(ErrorCode::BadEnum, where + ": weight '" + at(3) + "'");
    StrataCell cell{at(0), *g, *a, *w};
    if (!seen.insert(cell.key()).second) {
      throw Error(ErrorCode::DuplicateTriple, where + ": duplicate cell " + to_string(cell.key()));
    }
    strata.cells.push_back(cell);
  }
  double total = strata.total_weight();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw Error(ErrorCode::InvalidArgument, "strata weights must sum to a positive finite number");
  }
  return strata;
}

Strata load_strata(const std::string& path) { return parse_strata(csv::read_text(path)); }

void write_strata(std::ostream& out, const Strata& strata, const std::vector<std::string>& comments) {
  csv::Writer writer(out);
  for (const auto& c : comments) writer.comment(c);
  writer.row({"country", "gender", "age_group", "weight"});
  for (const auto& c : strata.cells) {
    writer.row({c.country, std::string(to_string(c.gender)), std::string(to_string(c.age_group)),
                csv::format_double(c.weight)});
  }
}

Strata build_strata(std::span<const AnnotationRecord> records, const std::optional<Strata>& population) {
  std::map<CellKey, double> counts;
  for (const auto& r : records) counts[cell_of(r)] += 1.0;
  Strata strata;
  strata.empirical = !population.has_value();
  double total = 0.0;
  for (const auto& [cell, count] : counts) {
    double w = population ? population->weight(cell) : count;
    strata.cells.push_back({cell.country, cell.gender, cell.age_group, w});
    total += w;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::ZeroWeightSubgroup, "observed cells carry zero population weight");
  for (auto& c : strata.cells) c.weight /= total;
  return strata;
}

Strata build_strata(std::span<const AnnotationRecord> records, const std::optional<std::string>& population_path) {
  std::optional<Strata> population;
  if (population_path) population = load_strata(*population_path);
  return build_strata(records, population);
}

HofstedeTable parse_hofstede(std::string_view text) {
  auto table = csv::parse(text);
  auto country = table.column("country");
  if (!country) throw Error(ErrorCode::MissingColumn, "hofstede file missing column 'country'");
  std::array<std::size_t, 6> index{};
  for (auto d : kHofstedeDimensions) {
    auto c = table.column(to_string(d));
    if (!c) throw Error(ErrorCode::MissingColumn, "hofstede file missing column '" + std::string(to_string(d)) + "'");
    index[static_cast<std::size_t>(d)] = *c;
  }
  HofstedeTable out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    HofstedeRow h;
    h.country = trim(row.at(*country));
    for (std::size_t k = 0; k < 6; ++k) {
      auto v = parse_double(trim(index[k] < row.size() ? row[index[k]] : ""));
      if (!v || *v < 0.0 || *v > 100.0) {
        throw Error(ErrorCode::BadEnum, "hofstede row " + std::to_string(i + 1) + ": value outside 0-100 for " +
                                            std::string(to_string(kHofstedeDimensions[k])));
      }
      h.values[k] = *v / 100.0;
    }
    if (out.find(h.country)) throw Error(ErrorCode::DuplicateTriple, "duplicate Hofstede country " + h.country);
    out.rows.push_back(h);
  }
  return out;
}

HofstedeTable load_hofstede(const std::string& path) { return parse_hofstede(csv::read_text(path)); }

void write_hofstede(std::ostream& out, const HofstedeTable& table, const std::vector<std::string>& comments) {
  csv::Writer writer(out);
  for (const auto& c : comments) writer.comment(c);
  std::vector<std::string> header = {"country"};
  for (auto d : kHofstedeDimensions) header.emplace_back(to_string(d));
  writer.row(header);
  for (const auto& row : table.rows) {
    std::vector<std::string> fields = {row.country};
    for (double v : row.values) fields.push_back(csv::format_double(std::round(v * 100.0 * 1e6) / 1e6));
    writer.row(fields);
  }
}

namespace {
template <typename Field>
std::vector<std::string> distinct(std::span<const AnnotationRecord> records, Field field) {
  std::set<std::string> values;
  for (const auto& r : records) values.insert(field(r));
  return {values.begin(), values.end()};
}
}  // namespace

std::vector<std::string> distinct_countries(std::span<const AnnotationRecord> records) {
  return distinct(records, [](const AnnotationRecord& r) { return r.country; });
}
std::vector<std::string> distinct_items(std::span<const AnnotationRecord> records) {
  return distinct(records, [](const AnnotationRecord& r) { return r.item_id; });
}
std::vector<std::string> distinct_labels(std::span<const AnnotationRecord> records) {
  return distinct(records, [](const AnnotationRecord& r) { return r.label_id; });
}

}  // namespace annotaudit
