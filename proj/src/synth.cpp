#include "annotaudit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "annotaudit/culture.hpp"
#include "annotaudit/glm.hpp"
#include "annotaudit/stats.hpp"

namespace annotaudit::synth {

namespace {

constexpr double kClampLow = 0.01;
constexpr double kClampHigh = 0.99;

double clamp_probability(double p) { return std::clamp(p, kClampLow, kClampHigh); }

std::string numbered(const char* prefix, int index, int count) {
  std::size_t width = std::max<std::size_t>(2, std::to_string(count).size());
  std::string digits = std::to_string(index);
  return prefix + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

// The bundled fixture, 0-100 scale.
constexpr const char* kHofstedeCsv =
    "country,power_distance,individualism,masculinity,uncertainty,long_term_orientation,indulgence\n"
    "AR,49,46,56,86,20,62\n"
    "BR,69,38,49,76,44,59\n"
    "CL,63,23,28,86,31,68\n"
    "CO,67,13,64,80,13,83\n"
    "DE,35,67,66,65,83,40\n"
    "GR,60,35,57,100,45,50\n"
    "IN,77,48,56,40,51,26\n"
    "JP,54,46,95,92,88,42\n"
    "KR,60,18,39,85,100,29\n"
    "MX,81,30,69,82,24,97\n"
    "NG,80,30,60,55,13,84\n"
    "PL,68,60,64,93,38,29\n"
    "SA,95,25,60,80,36,52\n"
    "SG,74,20,48,8,72,46\n"
    "US,40,91,62,46,26,68\n"
    "ZA,49,65,63,49,34,63\n";

// Per-(country, item, label) jitter of the truth, drawn from its own stream so
// that the manifest can be rebuilt without drawing respondents.
std::vector<double> draw_jitter(const SynthConfig& config) {
  std::mt19937_64 rng(stats::mix_seed(config.seed, 0x4a49545445));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t n = config.countries.size() * static_cast<std::size_t>(config.items * config.labels);
  std::vector<double> out(n);
  for (auto& v : out) v = config.noise_sd * normal(rng);
  return out;
}

struct TruthTable {
  // prob[country][pair][gender * 5 + age], without language shift
  std::vector<std::vector<std::array<double, 15>>> prob;
  std::vector<PairKey> pairs;
};

TruthTable truth_table(const SynthConfig& config) {
  auto items = config.item_ids();
  auto labels = config.label_ids();
  auto jitter = draw_jitter(config);
  TruthTable t;
  for (const auto& i : items) {
    for (const auto& l : labels) t.pairs.emplace_back(i, l);
  }
  t.prob.resize(config.countries.size());
  for (std::size_t c = 0; c < config.countries.size(); ++c) {
    const auto& code = config.countries[c].code;
    t.prob[c].resize(t.pairs.size());
    for (std::size_t k = 0; k < t.pairs.size(); ++k) {
      double base = config.base_rates.at(t.pairs[k]);
      double offset = 0.0;
      if (auto it = config.planted_inconsistent.find(t.pairs[k]); it != config.planted_inconsistent.end()) {
        if (auto o = it->second.find(code); o != it->second.end()) offset = o->second;
      }
      double noise = jitter[c * t.pairs.size() + k];
      for (std::size_t g = 0; g < 3; ++g) {
        for (std::size_t a = 0; a < 5; ++a) {
          t.prob[c][k][g * 5 + a] =
              clamp_probability(base + offset + config.gender_offset[g] + config.age_offset[a] + noise);
        }
      }
    }
  }
  return t;
}

double population_cell_weight(const SynthConfig& config, std::size_t g, std::size_t a) {
  return config.gender_population[g] * config.age_population[a];
}

}  // namespace

std::vector<std::string> SynthConfig::item_ids() const {
  std::vector<std::string> out;
  for (int i = 1; i <= items; ++i) out.push_back(numbered("item", i, items));
  return out;
}

std::vector<std::string> SynthConfig::label_ids() const {
  std::vector<std::string> out;
  for (int l = 1; l <= labels; ++l) out.push_back(numbered("label", l, labels));
  return out;
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InfeasibleConfig, msg); };
  if (items <= 0 || labels <= 0 || respondents <= 0) fail("item, label and respondent counts must be positive");
  if (countries.empty()) fail("no countries configured");
  if (!(noise_sd >= 0.0)) fail("noise_sd must be non-negative");
  std::set<std::string> codes;
  double share = 0.0;
  for (const auto& c : countries) {
    if (!codes.insert(c.code).second) fail("duplicate country " + c.code);
    if (c.sample_share < 0.0 || c.population_share < 0.0) fail("negative share for " + c.code);
    if (c.ambassador_share < 0.0 || c.ambassador_share > 1.0) fail("ambassador share outside [0, 1] for " + c.code);
    share += c.sample_share;
  }
  if (!(share > 0.0)) fail("sample shares sum to zero");
  for (const auto& h : holdout_countries) {
    if (!codes.count(h)) fail("holdout country " + h + " is not configured");
  }
  auto positive_sum = [](auto arr) { return std::accumulate(arr.begin(), arr.end(), 0.0) > 0.0; };
  if (!positive_sum(gender_population) || !positive_sum(gender_sample) || !positive_sum(age_population) ||
      !positive_sum(age_sample)) {
    fail("demographic shares must have positive mass");
  }
  for (const auto& i : item_ids()) {
    for (const auto& l : label_ids()) {
      auto it = base_rates.find({i, l});
      if (it == base_rates.end()) fail("missing base rate for (" + i + ", " + l + ")");
      if (!(it->second >= 0.0 && it->second <= 1.0)) fail("base rate outside [0, 1] for (" + i + ", " + l + ")");
    }
  }
  for (const auto& [pair, offsets] : planted_inconsistent) {
    if (!base_rates.count(pair)) fail("planted pair (" + pair.first + ", " + pair.second + ") is not in the grid");
    for (const auto& [code, o] : offsets) {
      if (!codes.count(code)) fail("planted offset for unknown country " + code);
    }
  }
  for (const auto& [key, shift] : language_shift) {
    if (!codes.count(key.first)) fail("language shift for unknown country " + key.first);
  }
}

const PairTruth& Manifest::pair(const std::string& item, const std::string& label) const {
  auto it = std::lower_bound(pairs.begin(), pairs.end(), std::make_pair(item, label),
                             [](const PairTruth& p, const PairKey& k) {
                               return std::tie(p.item_id, p.label_id) < std::tie(k.first, k.second);
                             });
  if (it == pairs.end() || it->item_id != item || it->label_id != label) {
    throw Error(ErrorCode::InvalidArgument, "manifest has no pair (" + item + ", " + label + ")");
  }
  return *it;
}

std::size_t Manifest::inconsistent_count() const {
  return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](const PairTruth& p) {
    return p.classification == mrp::Classification::Inconsistent;
  }));
}

Manifest build_manifest(const SynthConfig& config) {
  config.validate();
  auto table = truth_table(config);
  std::set<std::string> holdouts(config.holdout_countries.begin(), config.holdout_countries.end());

  Manifest m;
  m.seed = config.seed;
  m.respondents = static_cast<std::size_t>(config.respondents);
  for (const auto& c : config.countries) {
    (holdouts.count(c.code) ? m.holdout_countries : m.analyzed_countries).push_back(c.code);
  }
  std::sort(m.analyzed_countries.begin(), m.analyzed_countries.end());
  std::sort(m.holdout_countries.begin(), m.holdout_countries.end());

  std::vector<mrp::ConsistencyVerdict> verdicts;
  for (std::size_t k = 0; k < table.pairs.size(); ++k) {
    PairTruth t;
    t.item_id = table.pairs[k].first;
    t.label_id = table.pairs[k].second;
    t.base_rate = config.base_rates.at(table.pairs[k]);
    t.planted = config.planted_inconsistent.count(table.pairs[k]) > 0;
    auto& cells = m.cell_probability[table.pairs[k]];
    std::map<std::string, double> analyzed;
    for (std::size_t c = 0; c < config.countries.size(); ++c) {
      const auto& code = config.countries[c].code;
      double num = 0.0, den = 0.0;
      for (std::size_t g = 0; g < 3; ++g) {
        for (std::size_t a = 0; a < 5; ++a) {
          double w = population_cell_weight(config, g, a);
          if (w <= 0.0) continue;
          double p = table.prob[c][k][g * 5 + a];
          cells[{code, kGenders[g], kAgeGroups[a]}] = p;
          num += w * p;
          den += w;
        }
      }
      t.country_truth[code] = num / den;
      if (!holdouts.count(code)) analyzed[code] = num / den;
    }
    if (analyzed.size() >= 2) {
      auto v = mrp::classify_consistency(analyzed, config.sd_threshold, config.majority_line);
      t.classification = v.classification;
      t.cross_country_sd = v.cross_country_sd;
      v.item_id = t.item_id;
      v.label_id = t.label_id;
      verdicts.push_back(std::move(v));
    }
    if (t.planted) {
      double lo = 1.0, hi = 0.0;
      for (const auto& [code, p] : analyzed) {
        lo = std::min(lo, p);
        hi = std::max(hi, p);
      }
      if (!(hi - lo > 0.15 && lo < config.majority_line && hi > config.majority_line)) {
        throw Error(ErrorCode::InfeasibleConfig, "clamping or offsets leave planted pair (" + t.item_id + ", " +
                                                     t.label_id + ") without a straddling spread above 0.15");
      }
    }
    m.pairs.push_back(std::move(t));
  }
  for (const auto& [key, shift] : config.language_shift) m.language_effects.push_back({key.first, key.second, shift});

  // True culture trend, when both classes are populated and every country has a position.
  bool positioned = std::all_of(m.analyzed_countries.begin(), m.analyzed_countries.end(),
                                [&](const std::string& c) { return config.hofstede.find(c) != nullptr; });
  if (positioned && m.analyzed_countries.size() >= 3) {
    try {
      auto sims = culture::pair_similarity(verdicts);
      auto matrix = culture::cdi(config.hofstede,
                                 std::vector<HofstedeDimension>{HofstedeDimension::Uncertainty,
                                                                HofstedeDimension::LongTermOrientation},
                                 m.analyzed_countries);
      auto trend = culture::cdi_similarity_trend(matrix, sims);
      if (trend.inconsistent) m.culture_slope = trend.inconsistent->slope;
    } catch (const Error&) {
      // too few pairs per class for a trend; the slope stays null
    }
  }
  return m;
}

SynthOutput generate(const SynthConfig& config) {
  SynthOutput out;
  out.manifest = build_manifest(config);
  out.hofstede = config.hofstede;
  auto table = truth_table(config);
  auto labels = config.label_ids();

  // strata: population weights for every configured country
  for (const auto& c : config.countries) {
    for (std::size_t g = 0; g < 3; ++g) {
      for (std::size_t a = 0; a < 5; ++a) {
        double w = c.population_share * population_cell_weight(config, g, a);
        if (w > 0.0) out.strata.cells.push_back({c.code, kGenders[g], kAgeGroups[a], w});
      }
    }
  }
  double total = out.strata.total_weight();
  for (auto& cell : out.strata.cells) cell.weight /= total;

  std::vector<double> shares;
  for (const auto& c : config.countries) shares.push_back(c.sample_share);
  auto per_country = stats::apportion(static_cast<std::size_t>(config.respondents), shares);

  std::vector<double> cell_shares;
  for (std::size_t g = 0; g < 3; ++g) {
    for (std::size_t a = 0; a < 5; ++a) cell_shares.push_back(config.gender_sample[g] * config.age_sample[a]);
  }

  // language shift per (country, label index)
  std::vector<std::vector<double>> shift(config.countries.size(), std::vector<double>(labels.size(), 0.0));
  for (std::size_t c = 0; c < config.countries.size(); ++c) {
    for (std::size_t l = 0; l < labels.size(); ++l) {
      if (auto it = config.language_shift.find({config.countries[c].code, labels[l]}); it != config.language_shift.end()) {
        shift[c][l] = it->second;
      }
    }
  }

  std::mt19937_64 rng(stats::mix_seed(config.seed, 0x524553504f4e44));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> play(1, 5);
  std::discrete_distribution<int> english_play({0.15, 0.20, 0.20, 0.15, 0.15, 0.15});

  out.annotations.reserve(static_cast<std::size_t>(config.respondents) * table.pairs.size());
  std::size_t next_id = 1;
  for (std::size_t c = 0; c < config.countries.size(); ++c) {
    const auto& country = config.countries[c];
    auto per_cell = stats::apportion(per_country[c], cell_shares);
    for (std::size_t cell = 0; cell < per_cell.size(); ++cell) {
      std::size_t g = cell / 5, a = cell % 5;
      for (std::size_t n = 0; n < per_cell[cell]; ++n) {
        AnnotationRecord r;
        char id[16];
        std::snprintf(id, sizeof id, "R%06zu", next_id++);
        r.respondent_id = id;
        r.country = country.code;
        r.gender = kGenders[g];
        r.age_group = kAgeGroups[a];
        r.ambassador = unit(rng) < country.ambassador_share;
        r.survey_language = r.ambassador ? "en" : country.language;
        r.play_frequency = play(rng);
        if (country.language == "en") {
          r.english_play_frequency = r.play_frequency;
        } else if (r.ambassador) {
          r.english_play_frequency = unit(rng) < 0.5 ? 4 : 5;
        } else {
          r.english_play_frequency = english_play(rng);
        }
        for (std::size_t k = 0; k < table.pairs.size(); ++k) {
          double p = table.prob[c][k][g * 5 + a];
          std::size_t l = k % labels.size();
          if (r.ambassador && shift[c][l] != 0.0) p = clamp_probability(p + shift[c][l]);
          r.item_id = table.pairs[k].first;
          r.label_id = table.pairs[k].second;
          r.annotated = unit(rng) < p;
          out.annotations.push_back(r);
        }
      }
    }
  }
  return out;
}

const HofstedeTable& bundled_hofstede() {
  static const HofstedeTable table = parse_hofstede(kHofstedeCsv);
  return table;
}

namespace {

std::string default_language(const std::string& code) {
  static const std::map<std::string, std::string> languages = {
      {"AR", "es"}, {"BR", "pt"}, {"CL", "es"}, {"CO", "es"}, {"DE", "de"}, {"GR", "el"},
      {"IN", "en"}, {"JP", "ja"}, {"KR", "ko"}, {"MX", "es"}, {"NG", "en"}, {"PL", "pl"},
      {"SA", "ar"}, {"SG", "en"}, {"US", "en"}, {"ZA", "en"}};
  auto it = languages.find(code);
  return it == languages.end() ? "en" : it->second;
}

// Country mix shared by both presets: the US is the largest country, IN and SA
// are small holdouts, and four countries recruit English-surveyed ambassadors.
std::vector<CountrySpec> preset_countries() {
  const std::vector<std::string> analysed = {"AR", "BR", "CL", "CO", "DE", "GR", "JP",
                                             "KR", "MX", "NG", "PL", "SG", "US", "ZA"};
  const std::set<std::string> ambassadors = {"BR", "DE", "MX", "PL"};
  std::vector<CountrySpec> out;
  for (const auto& code : analysed) {
    CountrySpec c;
    c.code = code;
    c.language = default_language(code);
    c.sample_share = code == "US" ? 0.11 : 0.87 / 13.0;
    c.population_share = code == "US" ? 0.11 : 0.87 / 13.0;
    c.ambassador_share = ambassadors.count(code) ? 0.08 : 0.0;
    out.push_back(c);
  }
  for (const auto& code : {"IN", "SA"}) {
    out.push_back({code, default_language(code), 0.01, 0.01, 0.0});
  }
  std::sort(out.begin(), out.end(), [](const CountrySpec& a, const CountrySpec& b) { return a.code < b.code; });
  return out;
}

SynthConfig preset(std::uint64_t seed, int items, int respondents) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.countries = preset_countries();
  cfg.hofstede = bundled_hofstede();
  cfg.holdout_countries = {"IN", "SA"};
  cfg.items = items;
  cfg.labels = 28;
  cfg.respondents = respondents;
  cfg.gender_offset = {-0.02, 0.02, 0.0};
  cfg.age_offset = {0.03, 0.015, 0.0, -0.015, -0.03};
  cfg.noise_sd = 0.01;

  std::mt19937_64 rng(stats::mix_seed(seed, 0x505245534554));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto item_ids = cfg.item_ids();
  auto label_ids = cfg.label_ids();

  std::vector<double> item_effect(item_ids.size());
  for (auto& a : item_effect) a = 0.3 * normal(rng);

  std::vector<std::size_t> order(label_ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t ambiguous_count = 11;
  std::vector<int> sign(label_ids.size(), 0);  // 0: unambiguous
  for (std::size_t k = 0; k < ambiguous_count; ++k) sign[order[k]] = 1;

  std::vector<double> label_effect(label_ids.size());
  for (std::size_t l = 0; l < label_ids.size(); ++l) {
    label_effect[l] = sign[l] ? 0.25 * normal(rng) : 0.9 * normal(rng);
  }

  // Standardized Hofstede coordinates of the analysed countries.
  const auto& hof = cfg.hofstede;
  std::vector<std::string> analysed;
  for (const auto& c : cfg.countries) {
    if (c.code != "IN" && c.code != "SA") analysed.push_back(c.code);
  }
  auto standardize = [&](HofstedeDimension d) {
    std::vector<double> v;
    for (const auto& c : analysed) v.push_back(hof.at(c).value(d));
    double mu = stats::mean(v), sd = stats::population_sd(v);
    std::map<std::string, double> out;
    for (const auto& c : cfg.countries) out[c.code] = (hof.at(c.code).value(d) - mu) / sd;
    return out;
  };
  auto uai = standardize(HofstedeDimension::Uncertainty);
  auto lto = standardize(HofstedeDimension::LongTermOrientation);

  const std::size_t planted_per_label = std::min<std::size_t>(5, std::max<std::size_t>(1, item_ids.size() / 2));
  for (std::size_t l = 0; l < label_ids.size(); ++l) {
    std::vector<std::size_t> items_order(item_ids.size());
    std::iota(items_order.begin(), items_order.end(), 0);
    std::shuffle(items_order.begin(), items_order.end(), rng);
    std::set<std::size_t> planted;
    if (sign[l]) planted.insert(items_order.begin(), items_order.begin() + static_cast<long>(planted_per_label));
    double theta = 0.15 + 1.27 * unit(rng);

    for (std::size_t i = 0; i < item_ids.size(); ++i) {
      PairKey key{item_ids[i], label_ids[l]};
      if (!planted.count(i)) {
        double p = glm::logistic(item_effect[i] + label_effect[l]);
        if (std::abs(p - 0.5) < 0.36) p = 0.5 + (p >= 0.5 ? 0.36 : -0.36);
        cfg.base_rates[key] = std::clamp(p, 0.06, 0.94);
        continue;
      }
      double amp = 0.22 + 0.06 * unit(rng);
      cfg.base_rates[key] = 0.5 + sign[l] * 0.05 * unit(rng);
      auto& offsets = cfg.planted_inconsistent[key];
      for (const auto& c : cfg.countries) {
        double z = std::cos(theta) * uai[c.code] + std::sin(theta) * lto[c.code];
        offsets[c.code] = sign[l] * amp * std::tanh(2.5 * z) / std::tanh(2.5);
      }
    }
  }
  return cfg;
}

}  // namespace

SynthConfig paper_scale_preset(std::uint64_t seed) { return preset(seed, 10, 5500); }

SynthConfig smoke_preset(std::uint64_t seed) { return preset(seed, 2, 3000); }

SynthConfig skewed_sampling_config(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.countries = {{"DE", "de", 0.5, 0.5, 0.0}, {"US", "en", 0.5, 0.5, 0.0}};
  cfg.hofstede = bundled_hofstede();
  cfg.items = 1;
  cfg.labels = 1;
  cfg.respondents = 20000;
  cfg.gender_population = {0.5, 0.5, 0.0};
  cfg.gender_sample = {0.1, 0.9, 0.0};
  cfg.age_population = {0.2, 0.2, 0.2, 0.2, 0.2};
  cfg.age_sample = {0.89, 0.04, 0.03, 0.02, 0.02};  // male 18-24 holds about 80%
  cfg.gender_offset = {-0.05, 0.05, 0.0};
  cfg.age_offset = {0.15, 0.08, 0.0, -0.08, -0.15};
  cfg.base_rates[{"item01", "label01"}] = 0.40;
  return cfg;
}

MatchingFixture confounded_matching(std::uint64_t seed, std::size_t treated, std::size_t controls, double effect) {
  MatchingFixture fx;
  fx.true_effect = effect;
  std::mt19937_64 rng(stats::mix_seed(seed, 0x4d41544348));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::discrete_distribution<int> age_treated({0.05, 0.10, 0.20, 0.30, 0.35});
  std::discrete_distribution<int> age_control({0.35, 0.30, 0.20, 0.10, 0.05});
  std::discrete_distribution<int> play_treated({0.10, 0.15, 0.20, 0.25, 0.30});
  std::uniform_int_distribution<int> play_control(1, 5);

  std::size_t next_id = 1;
  auto make = [&](bool is_treated) {
    AnnotationRecord r;
    char id[16];
    std::snprintf(id, sizeof id, "M%06zu", next_id++);
    r.respondent_id = id;
    r.country = "DE";
    r.item_id = "item01";
    r.label_id = "label01";
    int age = is_treated ? age_treated(rng) : age_control(rng);
    r.age_group = kAgeGroups[static_cast<std::size_t>(age)];
    bool male = unit(rng) < (is_treated ? 0.7 : 0.5);
    r.gender = male ? Gender::Male : Gender::Female;
    r.play_frequency = is_treated ? 1 + play_treated(rng) : play_control(rng);
    r.english_play_frequency = unit(rng) < (is_treated ? 0.7 : 0.4) ? 5 : 4;
    r.ambassador = is_treated;
    r.survey_language = is_treated ? "en" : "de";
    double p = 0.25 + 0.08 * age + 0.05 * (male ? 1.0 : 0.0) + (is_treated ? effect : 0.0);
    r.annotated = unit(rng) < clamp_probability(p);
    fx.outcomes[r.respondent_id] = r.annotated;
    fx.records.push_back(std::move(r));
  };
  for (std::size_t i = 0; i < treated; ++i) make(true);
  for (std::size_t i = 0; i < controls; ++i) make(false);
  return fx;
}

MatchingFixture germany_fixture() {
  MatchingFixture fx;
  fx.true_effect = 21.0 / 26.0 - 11.0 / 26.0;
  // Pair k: (treated, control) outcomes are (1,1) for k < 10, (1,0) for
  // k < 21, (0,1) for k == 21 and (0,0) otherwise.
  for (int k = 0; k < 26; ++k) {
    bool t = k < 21;
    bool c = k < 10 || k == 21;
    for (int arm = 0; arm < 2; ++arm) {
      AnnotationRecord r;
      char id[16];
      std::snprintf(id, sizeof id, "G%c%02d", arm == 0 ? 'T' : 'C', k);
      r.respondent_id = id;
      r.country = "DE";
      r.item_id = "item01";
      r.label_id = "label01";
      r.age_group = kAgeGroups[static_cast<std::size_t>(k % 5)];
      r.gender = (k / 5) % 2 ? Gender::Male : Gender::Female;
      r.play_frequency = 1 + k / 10;
      r.english_play_frequency = 4;
      r.ambassador = arm == 0;
      r.survey_language = arm == 0 ? "en" : "de";
      r.annotated = arm == 0 ? t : c;
      fx.outcomes[r.respondent_id] = r.annotated;
      fx.records.push_back(std::move(r));
    }
  }
  return fx;
}

nlohmann::json to_json(const Manifest& m) {
  nlohmann::json j;
  j["seed"] = m.seed;
  j["respondents"] = m.respondents;
  j["analyzed_countries"] = m.analyzed_countries;
  j["holdout_countries"] = m.holdout_countries;
  j["inconsistent_pairs"] = m.inconsistent_count();
  j["culture_slope"] = m.culture_slope ? nlohmann::json(*m.culture_slope) : nlohmann::json(nullptr);
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : m.pairs) {
    pairs.push_back({{"item_id", p.item_id},
                     {"label_id", p.label_id},
                     {"base_rate", p.base_rate},
                     {"planted", p.planted},
                     {"classification", mrp::to_string(p.classification)},
                     {"cross_country_sd", p.cross_country_sd},
                     {"country_truth", p.country_truth}});
  }
  j["pairs"] = pairs;
  nlohmann::json effects = nlohmann::json::array();
  for (const auto& e : m.language_effects) {
    effects.push_back({{"country", e.country}, {"label_id", e.label_id}, {"shift", e.shift}});
  }
  j["language_effects"] = effects;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& [pair, probs] : m.cell_probability) {
    for (const auto& [cell, p] : probs) {
      cells.push_back({{"item_id", pair.first},
                       {"label_id", pair.second},
                       {"country", cell.country},
                       {"gender", to_string(cell.gender)},
                       {"age_group", to_string(cell.age_group)},
                       {"p", p}});
    }
  }
  j["cell_probabilities"] = cells;
  return j;
}

void write_outputs(const SynthOutput& output, const std::string& dir, const std::vector<std::string>& comments,
                   const nlohmann::json& provenance) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create directory " + dir + ": " + ec.message());
  auto open = [&](const std::string& name) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + (fs::path(dir) / name).string());
    return f;
  };
  {
    auto f = open("annotations.csv");
    write_annotations(f, output.annotations, comments);
  }
  {
    auto f = open("strata.csv");
    write_strata(f, output.strata, comments);
  }
  {
    auto f = open("hofstede.csv");
    write_hofstede(f, output.hofstede, comments);
  }
  {
    auto f = open("manifest.json");
    auto j = to_json(output.manifest);
    if (!provenance.is_null()) j["provenance"] = provenance;
    f << j.dump(2) << '\n';
  }
}

}  // namespace annotaudit::synth
