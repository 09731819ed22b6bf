#include "kdisc/features/pipeline.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include "kdisc/core/error.hpp"

namespace kdisc::features {

using nlohmann::json;

namespace {

bool matches_any(const std::string& name, const std::vector<std::string>& patterns) {
  for (const auto& p : patterns)
    if (std::regex_search(name, std::regex(p))) return true;
  return false;
}

DonorRecord prepare(const DonorRecord& raw, const EngineeringConfig& cfg) {
  DonorRecord r = raw;
  convert_creatinine_units(r, cfg.domain);
  apply_config_rules(r, cfg.imputation);
  return r;
}

json dichotomies_to_json(const std::vector<Dichotomy>& ds) {
  json out = json::array();
  for (const auto& d : ds)
    out.push_back({{"variable", d.variable}, {"positive", d.positive}, {"negative", d.negative}});
  return out;
}

}  // namespace

void apply_config_rules(DonorRecord& r, const StrategyConfig& cfg) {
  for (const auto& rule : cfg.rules) {
    if (rule.strategy != Strategy::ConfigRule || rule.source.empty()) continue;
    // The rule pattern names the target field; it must be a literal name here.
    std::string target = rule.pattern;
    if (!target.empty() && target.front() == '^') target.erase(0, 1);
    if (!target.empty() && target.back() == '$') target.pop_back();
    auto it = r.static_vars.find(target);
    if (it != r.static_vars.end() && !is_missing(it->second)) continue;
    auto src = r.static_vars.find(rule.source);
    if (src == r.static_vars.end() || !std::holds_alternative<std::string>(src->second)) continue;
    const auto& text = std::get<std::string>(src->second);
    for (const auto& tr : rule.rules) {
      if (std::regex_search(text, std::regex(tr.regex, std::regex::icase))) {
        r.static_vars[target] = tr.value;
        break;
      }
    }
  }
}

EngineeringConfig EngineeringConfig::from_json(const json& j) {
  EngineeringConfig c;
  if (j.contains("positive_levels"))
    c.levels.positive = j.at("positive_levels").get<std::set<std::string>>();
  if (j.contains("negative_levels"))
    c.levels.negative = j.at("negative_levels").get<std::set<std::string>>();
  c.medication_top_k = j.value("medication_top_k", c.medication_top_k);
  c.icd_patterns = j.value("icd_patterns", c.icd_patterns);
  c.rare_threshold = j.value("rare_threshold", c.rare_threshold);
  c.single_value_pick_last = j.value("single_value_pick", std::string("last")) == "last";
  c.exclude_static = j.value("exclude_static", c.exclude_static);
  if (j.contains("domain")) {
    const auto& d = j.at("domain");
    auto& f = c.domain;
    f.diuresis_last_hour = d.value("diuresis_last_hour", f.diuresis_last_hour);
    f.body_weight = d.value("body_weight", f.body_weight);
    f.diuresis_total = d.value("diuresis_total", f.diuresis_total);
    f.diuresis_window = d.value("diuresis_window", f.diuresis_window);
    f.creatinine_series = d.value("creatinine_series", f.creatinine_series);
    f.birth_day = d.value("birth_day", f.birth_day);
    f.diabetes_diagnosis_day = d.value("diabetes_diagnosis_day", f.diabetes_diagnosis_day);
    f.death_day = d.value("death_day", f.death_day);
    f.alcohol_start_day = d.value("alcohol_start_day", f.alcohol_start_day);
    f.alcohol_end_day = d.value("alcohol_end_day", f.alcohol_end_day);
    f.admission_day = d.value("admission_day", f.admission_day);
    for (const auto& dj : d.value("dichotomies", json::array()))
      f.dichotomies.push_back({dj.at("variable").get<std::string>(),
                               dj.at("positive").get<std::vector<std::string>>(),
                               dj.at("negative").get<std::vector<std::string>>()});
  }
  if (j.contains("imputation")) c.imputation = StrategyConfig::from_json(j.at("imputation"));
  return c;
}

json EngineeringConfig::to_json() const {
  const auto& f = domain;
  return {{"positive_levels", levels.positive},
          {"negative_levels", levels.negative},
          {"medication_top_k", medication_top_k},
          {"icd_patterns", icd_patterns},
          {"rare_threshold", rare_threshold},
          {"single_value_pick", single_value_pick_last ? "last" : "first"},
          {"exclude_static", exclude_static},
          {"domain",
           {{"diuresis_last_hour", f.diuresis_last_hour},
            {"body_weight", f.body_weight},
            {"diuresis_total", f.diuresis_total},
            {"diuresis_window", f.diuresis_window},
            {"creatinine_series", f.creatinine_series},
            {"birth_day", f.birth_day},
            {"diabetes_diagnosis_day", f.diabetes_diagnosis_day},
            {"death_day", f.death_day},
            {"alcohol_start_day", f.alcohol_start_day},
            {"alcohol_end_day", f.alcohol_end_day},
            {"admission_day", f.admission_day},
            {"dichotomies", dichotomies_to_json(f.dichotomies)}}},
          {"imputation", imputation.to_json()}};
}

std::vector<double> FeaturePipeline::encode_donor(const DonorRecord& raw) const {
  const DonorRecord r = prepare(raw, config_);
  std::vector<double> row;
  row.reserve(raw_names_.size());

  for (const auto& name : static_numeric_) {
    auto it = r.static_vars.find(name);
    row.push_back(it != r.static_vars.end() && std::holds_alternative<double>(it->second)
                      ? std::get<double>(it->second)
                      : kMissing);
  }
  for (const auto& enc : encoders_) {
    auto it = r.static_vars.find(enc.variable);
    const auto cells = enc.encode(it == r.static_vars.end() ? Value{} : it->second);
    row.insert(row.end(), cells.begin(), cells.end());
  }
  static const TimeSeries kEmpty;
  for (const auto& [name, kind] : kinds_) {
    auto it = r.timeseries.find(name);
    const auto cells = extract_timeseries_features(it == r.timeseries.end() ? kEmpty : it->second,
                                                   kind, config_.levels,
                                                   config_.single_value_pick_last);
    row.insert(row.end(), cells.begin(), cells.end());
  }
  const auto meds = meds_.encode(r.medications);
  row.insert(row.end(), meds.begin(), meds.end());
  const auto dom = apply_domain_transforms(r, config_.domain, alcohol_);
  row.insert(row.end(), dom.begin(), dom.end());
  return row;
}

FeatureMatrix FeaturePipeline::encode(const LabeledCohort& cohort,
                                      const std::vector<std::string>& ids, Exec exec) const {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < cohort.records.size(); ++i) index[cohort.records[i].donor_id] = i;
  std::vector<const DonorRecord*> donors;
  donors.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) throw DataError("donor " + id + " not in cohort");
    donors.push_back(&cohort.records[it->second]);
  }

  FeatureMatrix m;
  m.values = Matrix(donors.size(), raw_names_.size());
  m.feature_names = raw_names_;
  m.feature_types = raw_types_;
  m.donor_ids = ids;
  m.labels.resize(donors.size());
  for (std::size_t i = 0; i < donors.size(); ++i)
    m.labels[i] = static_cast<int>(cohort.label.at(ids[i]));

  const auto n = static_cast<long long>(donors.size());
  auto kernel = [&](long long i) {
    const auto row = encode_donor(*donors[static_cast<std::size_t>(i)]);
    std::copy(row.begin(), row.end(), m.values.row(static_cast<std::size_t>(i)).begin());
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (long long i = 0; i < n; ++i) kernel(i);
  } else {
    for (long long i = 0; i < n; ++i) kernel(i);
  }
  return m;
}

FeatureMatrix FeaturePipeline::transform(const LabeledCohort& cohort,
                                         const std::vector<std::string>& ids, Exec exec) const {
  return impute(plan_, encode(cohort, ids, exec)).select_features(final_names_);
}

FeaturePipeline FeaturePipeline::fit(const LabeledCohort& cohort,
                                     const std::vector<std::string>& train_ids,
                                     const EngineeringConfig& config, std::uint64_t seed,
                                     Exec exec) {
  FeaturePipeline p;
  p.config_ = config;

  std::vector<DonorRecord> prepared;
  prepared.reserve(train_ids.size());
  {
    std::set<std::string> wanted(train_ids.begin(), train_ids.end());
    for (const auto& r : cohort.records)
      if (wanted.count(r.donor_id)) prepared.push_back(prepare(r, config));
  }
  if (prepared.empty()) throw DataError("no training donors to fit the feature pipeline on");
  std::vector<const DonorRecord*> train;
  for (const auto& r : prepared) train.push_back(&r);

  p.kinds_ = classify_variables(train, config.levels);

  // Static fields: numeric pass-through or categorical encoders.
  std::vector<std::string> skip = config.domain.consumed();
  for (const auto& rule : config.imputation.rules)
    if (rule.strategy == Strategy::ConfigRule && !rule.source.empty()) skip.push_back(rule.source);
  std::map<std::string, std::pair<bool, bool>> static_kind;  // numeric, categorical
  for (const DonorRecord* d : train)
    for (const auto& [name, v] : d->static_vars) {
      auto& k = static_kind[name];
      if (std::holds_alternative<double>(v)) k.first = true;
      if (std::holds_alternative<std::string>(v)) k.second = true;
    }
  for (const auto& [name, k] : static_kind) {
    if (std::find(skip.begin(), skip.end(), name) != skip.end()) continue;
    if (matches_any(name, config.exclude_static)) continue;
    if (k.first && k.second)
      throw ClassificationError("static variable '" + name + "' mixes numeric and categorical values");
    if (k.first) {
      p.static_numeric_.push_back(name);
    } else if (k.second) {
      std::vector<Value> values;
      values.reserve(train.size());
      for (const DonorRecord* d : train) {
        auto it = d->static_vars.find(name);
        values.push_back(it == d->static_vars.end() ? Value{} : it->second);
      }
      const StrategyRule* rule = config.imputation.match(name);
      const bool mac = rule && rule->strategy == Strategy::MissingAsCategory;
      p.encoders_.push_back(fit_categorical_encoder(name, values,
                                                    matches_any(name, config.icd_patterns), mac,
                                                    config.rare_threshold));
    }
  }
  p.meds_ = fit_medication_vocabulary(train, config.medication_top_k);
  p.alcohol_ = fit_alcohol_bins(train, config.domain);

  // Column layout.
  for (const auto& name : p.static_numeric_) {
    bool binary = true;
    for (const DonorRecord* d : train) {
      auto it = d->static_vars.find(name);
      if (it == d->static_vars.end() || !std::holds_alternative<double>(it->second)) continue;
      const double v = std::get<double>(it->second);
      binary = binary && (v == 0.0 || v == 1.0);
    }
    p.raw_names_.push_back(name);
    p.raw_types_.push_back(binary ? FeatureType::Binary : FeatureType::Numeric);
  }
  for (const auto& enc : p.encoders_)
    for (const auto& n : enc.feature_names()) {
      p.raw_names_.push_back(n);
      p.raw_types_.push_back(FeatureType::Binary);
    }
  for (const auto& [name, kind] : p.kinds_)
    for (const auto& suffix : timeseries_feature_suffixes(kind)) {
      p.raw_names_.push_back(suffix.empty() ? name : name + "__" + suffix);
      const bool binary = kind == TimeSeriesKind::Type1Categorical &&
                          (suffix == kTsFirst || suffix == kTsLast);
      p.raw_types_.push_back(binary ? FeatureType::Binary : FeatureType::Numeric);
    }
  for (const auto& n : p.meds_.feature_names()) {
    p.raw_names_.push_back(n);
    p.raw_types_.push_back(FeatureType::Binary);
  }
  for (const auto& n : domain_feature_names(config.domain)) {
    p.raw_names_.push_back(n);
    p.raw_types_.push_back(n == "alcohol_last_category" ? FeatureType::Ordinal
                           : n.ends_with("__positive") ? FeatureType::Binary
                                                       : FeatureType::Numeric);
  }
  {
    std::set<std::string> unique(p.raw_names_.begin(), p.raw_names_.end());
    if (unique.size() != p.raw_names_.size())
      throw ConfigError("engineered feature names collide; rename a raw variable");
  }

  FeatureMatrix raw = p.encode(cohort, train_ids, exec);
  p.plan_ = fit_imputation_plan(raw, config.imputation, seed);
  FeatureMatrix imputed = impute(p.plan_, raw);
  p.dropped_ = drop_redundant_constant(imputed);
  p.final_names_ = imputed.feature_names;
  return p;
}

json FeaturePipeline::to_json() const {
  json kinds = json::object();
  for (const auto& [k, v] : kinds_) kinds[k] = to_string(v);
  json encs = json::array();
  for (const auto& e : encoders_)
    encs.push_back({{"variable", e.variable},
                    {"binary", e.binary},
                    {"icd", e.icd},
                    {"missing_as_category", e.missing_as_category},
                    {"levels", e.levels},
                    {"rare_levels", e.rare_levels}});
  std::vector<std::string> types;
  for (auto t : raw_types_) types.push_back(kdisc::to_string(t));
  return {{"config", config_.to_json()},
          {"kinds", kinds},
          {"static_numeric", static_numeric_},
          {"encoders", encs},
          {"medications", meds_.tokens},
          {"alcohol_bins", alcohol_.edges},
          {"raw_features", raw_names_},
          {"raw_types", types},
          {"imputation", plan_.to_json()},
          {"features", final_names_},
          {"dropped", dropped_}};
}

FeaturePipeline FeaturePipeline::from_json(const json& j) {
  FeaturePipeline p;
  p.config_ = EngineeringConfig::from_json(j.at("config"));
  for (const auto& [k, v] : j.at("kinds").items())
    p.kinds_[k] = time_series_kind_from_string(v.get<std::string>());
  p.static_numeric_ = j.at("static_numeric").get<std::vector<std::string>>();
  for (const auto& e : j.at("encoders")) {
    CategoricalEncoder enc;
    enc.variable = e.at("variable").get<std::string>();
    enc.binary = e.at("binary").get<bool>();
    enc.icd = e.at("icd").get<bool>();
    enc.missing_as_category = e.at("missing_as_category").get<bool>();
    enc.levels = e.at("levels").get<std::vector<std::string>>();
    enc.rare_levels = e.at("rare_levels").get<std::vector<std::string>>();
    p.encoders_.push_back(std::move(enc));
  }
  p.meds_.tokens = j.at("medications").get<std::vector<std::string>>();
  p.alcohol_.edges = j.at("alcohol_bins").get<std::vector<double>>();
  p.raw_names_ = j.at("raw_features").get<std::vector<std::string>>();
  for (const auto& t : j.at("raw_types")) p.raw_types_.push_back(feature_type_from_string(t.get<std::string>()));
  p.plan_ = ImputationPlan::from_json(j.at("imputation"));
  p.final_names_ = j.at("features").get<std::vector<std::string>>();
  p.dropped_ = j.at("dropped").get<std::vector<std::string>>();
  return p;
}

}  // namespace kdisc::features
