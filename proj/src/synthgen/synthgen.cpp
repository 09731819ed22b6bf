#include "kdisc/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "kdisc/core/error.hpp"
#include "kdisc/core/io.hpp"
#include "kdisc/core/rng.hpp"
#include "kdisc/features/transforms.hpp"

namespace kdisc::synth {

using nlohmann::json;

namespace {

constexpr double kDaysPerYear = 365.25;

// Latent clinical features with their default weights on the logit of
// P(transplanted). Names match the engineered columns they surface as.
const std::vector<std::pair<std::string, double>>& clinical_weights() {
  static const std::vector<std::pair<std::string, double>> w{
      {"age", -0.55},
      {"creatinine__last", -0.45},
      {"creatinine__slope", -0.35},
      {"urea__last", -0.25},
      {"egfr", 0.35},
      {"diagnosis_diabetes", -0.30},
      {"diagnosis_hypertension", -0.25},
      {"diuresis_last_hour_per_kg", 0.25},
      {"cpr_duration_min", -0.15},
  };
  return w;
}

std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%02zu", prefix, i + 1);
  return buf;
}

std::vector<SeriesSpec> default_series() {
  return {
      {"creatinine", 90.0, 0.35, 0.6, 4.0, 8.0, 4.0},
      {"urea", 40.0, 0.35, 0.1, 3.0, 10.0, 2.0},
      {"sodium", 141.0, 0.03, 0.05, 3.0, 8.0, 1.5},
  };
}

int poisson(Rng& rng, double lambda) {
  const double limit = std::exp(-lambda);
  double p = rng.uniform();
  int k = 0;
  while (p > limit) {
    p *= rng.uniform();
    ++k;
  }
  return k;
}

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

double round_to(double v, double step) { return std::round(v / step) * step; }

// Simplified CKD-EPI style estimate from creatinine in mg/dL.
double egfr_from(double creat_mgdl, double age) {
  const double r = creat_mgdl / 0.9;
  return 141.0 * std::pow(std::min(r, 1.0), -0.411) * std::pow(std::max(r, 1.0), -1.209) *
         std::pow(0.993, age);
}

struct MedSpec {
  const char* token;
  double p;
  const char* dose;
};

const std::vector<MedSpec>& medication_pool() {
  static const std::vector<MedSpec> pool{
      {"Noradrenalin", 0.78, "0.1 mg/kg/min"}, {"Propofol", 0.55, "200 mg"},   {"Sufentanil", 0.50, "50 ug"},
      {"Pantoprazol", 0.48, "40 mg"},         {"Desmopressin", 0.40, "4 ug"},  {"Ceftriaxon", 0.36, "2 g"},
      {"Furosemid", 0.34, "20 mg"},           {"Insulin", 0.33, "4 IE"},       {"Hydrocortison", 0.30, "100 mg"},
      {"Midazolam", 0.29, "5 mg"},            {"Kaliumchlorid", 0.28, "20 mmol"}, {"Dobutamin", 0.22, "5 ug/kg/min"},
      {"Vasopressin", 0.20, "0.03 IE/min"},   {"Paracetamol", 0.19, "1 g"},   {"Enoxaparin", 0.18, "40 mg"},
      {"Levetiracetam", 0.16, "500 mg"},      {"Mannitol", 0.15, "125 ml"},    {"Piperacillin", 0.14, "4.5 g"},
      {"Metoclopramid", 0.13, "10 mg"},       {"Dexamethason", 0.12, "8 mg"},  {"Ampicillin", 0.11, "2 g"},
      {"Amiodaron", 0.10, "300 mg"},          {"Magnesium", 0.10, "2 g"},      {"Urapidil", 0.09, "25 mg"},
      {"Clonidin", 0.09, "150 ug"},           {"Meropenem", 0.08, "1 g"},      {"Thiamin", 0.08, "100 mg"},
      {"Fentanyl", 0.07, "100 ug"},           {"Ketamin", 0.07, "50 mg"},      {"Vancomycin", 0.06, "1 g"},
      {"Phenytoin", 0.06, "250 mg"},          {"Nimodipin", 0.05, "1 mg/h"},   {"Adrenalin", 0.05, "1 mg"},
      {"Calcium", 0.05, "10 ml"},             {"Ondansetron", 0.04, "4 mg"},   {"Tranexamsaeure", 0.04, "1 g"},
      {"Esmolol", 0.03, "50 mg"},             {"Glucose", 0.03, "40 %"},       {"Natriumbicarbonat", 0.03, "100 ml"},
      {"Levothyroxin", 0.02, "100 ug"},       {"Omeprazol", 0.02, "40 mg"},    {"Metamizol", 0.02, "1 g"},
      {"Acetylcystein", 0.02, "600 mg"},      {"Cefuroxim", 0.01, "1.5 g"},
  };
  return pool;
}

const char* kConfound = "Heparin";

struct DonorLatent {
  DonorRecord record;
  std::vector<double> latent;  // aligned with latent_names, before standardization
  bool diabetes = false;
  bool hypertension = false;
  bool cpr = false;
  double u_label = 0.0;
};

TimeSeries simulate_series(Rng& rng, const SeriesSpec& s, double level, double slope) {
  const int n = 1 + poisson(rng, s.mean_extra_obs);
  TimeSeries ts;
  double t = 0.0;
  for (int i = 0; i < n; ++i) {
    if (i > 0) t += round_to(-s.gap_hours * std::log(1.0 - rng.uniform()), 0.25);
    const double v = std::max(0.1 * s.base_mean, level + slope * t + rng.normal(0.0, s.noise_sd));
    ts.push_back({t, round_to(v, 0.01)});
  }
  return ts;
}

DonorLatent simulate_donor(const SynthConfig& cfg, const std::vector<SeriesSpec>& series, std::size_t i) {
  Rng rng(cfg.seed, 0xd0, i);
  DonorLatent d;
  auto& r = d.record;
  r.donor_id = "D" + std::to_string(100000 + i);
  auto& sv = r.static_vars;

  const double age = std::round(clamp(rng.normal(52.0, 15.0), 18.0, 90.0));
  const double bw = round_to(clamp(rng.normal(78.0, 14.0), 40.0, 160.0), 0.5);
  const double height = std::round(clamp(rng.normal(172.0, 9.0), 145.0, 205.0));
  const double admission = static_cast<double>(rng.integer(18000, 19500));
  const double death = admission + static_cast<double>(rng.integer(1, 14));
  sv["age"] = age;
  sv["sex"] = std::string(rng.bernoulli(0.45) ? "f" : "m");
  sv["body_weight_kg"] = bw;
  sv["height_cm"] = height;
  sv["admission_day"] = admission;
  sv["death_day"] = death;
  sv["birth_day"] = std::round(death - age * kDaysPerYear - static_cast<double>(rng.integer(0, 364)));

  d.diabetes = rng.bernoulli(0.12 + 0.004 * std::max(0.0, age - 50.0));
  d.hypertension = rng.bernoulli(0.25 + 0.006 * std::max(0.0, age - 40.0));
  sv["diagnosis_diabetes"] = d.diabetes ? 1.0 : 0.0;
  sv["diagnosis_hypertension"] = d.hypertension ? 1.0 : 0.0;
  if (d.diabetes) sv["diabetes_diagnosis_day"] = std::round(death - rng.uniform(1.0, 25.0) * kDaysPerYear);

  // Alcohol history: 30% documented drinkers, half of them stopped before admission.
  if (rng.bernoulli(0.30)) {
    const double start = std::round(admission - rng.uniform(3.0, 35.0) * kDaysPerYear);
    sv["alcohol_start_day"] = start;
    if (rng.bernoulli(0.5)) sv["alcohol_end_day"] = std::round(rng.uniform(start + 200.0, admission - 1.0));
  }

  static const char* groups[] = {"A", "B", "AB", "O"};
  static const double group_p[] = {0.43, 0.11, 0.05, 0.41};
  {
    double u = rng.uniform(), acc = 0.0;
    std::size_t g = 3;
    for (std::size_t k = 0; k < 4; ++k) {
      acc += group_p[k];
      if (u < acc) {
        g = k;
        break;
      }
    }
    sv["blood_group"] = std::string(groups[g]);
  }
  static const char* causes[] = {"I61", "I63", "I60", "S06", "G93", "I46", "K72", "T71"};
  static const double cause_p[] = {0.30, 0.22, 0.15, 0.14, 0.12, 0.063, 0.004, 0.003};
  {
    double u = rng.uniform(), acc = 0.0;
    std::size_t c = 0;
    for (std::size_t k = 0; k < 8; ++k) {
      acc += cause_p[k];
      if (u < acc) {
        c = k;
        break;
      }
    }
    sv["icd_cause_of_death"] = std::string(causes[c]);
  }
  static const char* qrs[] = {"normal", "normal", "normal", "lbbb", "rbbb", "wide"};
  sv["ekg_qrs"] = std::string(qrs[rng.below(6)]);
  sv["smoker"] = std::string(rng.bernoulli(0.35) ? "yes" : "no");

  d.cpr = rng.bernoulli(0.25);
  const double cpr_min = d.cpr ? std::round(1.0 + rng.uniform() * 40.0) : 0.0;
  sv["cpr_duration_min"] = cpr_min;
  sv["cpr_note"] = std::string(d.cpr ? "resuscitation performed" : "no resuscitation documented");

  const double dlh = std::round(bw * std::exp(rng.normal(std::log(1.2), 0.5)));
  const double window = std::round(rng.uniform(6.0, 24.0));
  const double total = std::round(bw * window * std::exp(rng.normal(std::log(1.1), 0.4)));
  sv["diuresis_last_hour_ml"] = dlh;
  sv["diuresis_window_hours"] = window;
  sv["diuresis_total_ml"] = total;
  sv["biopsy_glomerulosclerosis_pct"] = round_to(clamp(rng.normal(8.0 + 0.15 * (age - 50.0), 6.0), 0.0, 80.0), 0.5);
  sv["albumin"] = round_to(clamp(rng.normal(3.1, 0.6), 1.0, 5.5), 0.1);

  // Time series.
  double creat_level = 0.0, creat_slope = 0.0, creat_last = 0.0, urea_last = 0.0;
  for (const auto& s : series) {
    double level = s.base_mean * std::exp(rng.normal(0.0, s.base_log_sd));
    if (s.name == "urea") level *= std::sqrt(std::max(0.3, creat_level / 90.0));
    const double slope = rng.normal(0.0, s.slope_sd);
    TimeSeries ts = simulate_series(rng, s, level, slope);
    if (s.name == "creatinine") {
      creat_level = level;
      creat_slope = slope;
      creat_last = std::get<double>(ts.back().value);
    }
    if (s.name == "urea") urea_last = std::get<double>(ts.back().value);
    r.timeseries[s.name] = std::move(ts);
  }
  // Sparse numeric series (mean < 2 observations per donor).
  {
    const double u = rng.uniform();
    const int n = u < 0.3 ? 0 : u < 0.6 ? 1 : 2;
    TimeSeries ts;
    for (int k = 0; k < n; ++k)
      ts.push_back({k * round_to(rng.uniform(4.0, 30.0), 0.25), round_to(std::exp(rng.normal(std::log(60.0), 0.8)), 0.1)});
    if (!ts.empty()) r.timeseries["crp"] = std::move(ts);
  }
  // Positive/negative urine protein series.
  {
    const int n = 1 + static_cast<int>(rng.below(4));
    TimeSeries ts;
    double t = 0.0;
    for (int k = 0; k < n; ++k) {
      ts.push_back({t, std::string(rng.bernoulli(0.3) ? "pos" : "neg")});
      t += round_to(rng.uniform(6.0, 24.0), 0.25);
    }
    r.timeseries["protein_urine"] = std::move(ts);
  }
  // Mostly single-valued variable.
  {
    TimeSeries ts{{0.0, round_to(rng.normal(11.5, 1.8), 0.1)}};
    if (rng.bernoulli(0.3)) ts.push_back({round_to(rng.uniform(2.0, 20.0), 0.25), round_to(rng.normal(11.0, 1.8), 0.1)});
    r.timeseries["hemoglobin"] = std::move(ts);
  }

  const double creat_mgdl = creat_last * features::kCreatinineUmolToMgdl;
  const double egfr = std::round(egfr_from(creat_mgdl, age) * std::exp(rng.normal(0.0, 0.08)));
  sv["egfr"] = egfr;

  for (std::size_t k = 0; k < cfg.n_informative_features; ++k)
    sv[numbered("marker_", k)] = round_to(rng.normal(), 1e-4);
  for (std::size_t k = 0; k < cfg.n_noise_features; ++k)
    sv[numbered("noise_", k)] = round_to(rng.normal(), 1e-4);

  d.latent = {age,
              creat_last * features::kCreatinineUmolToMgdl,
              creat_slope * features::kCreatinineUmolToMgdl,
              urea_last,
              egfr,
              d.diabetes ? 1.0 : 0.0,
              d.hypertension ? 1.0 : 0.0,
              dlh / bw,
              cpr_min};
  for (std::size_t k = 0; k < cfg.n_informative_features; ++k)
    d.latent.push_back(std::get<double>(sv[numbered("marker_", k)]));
  for (std::size_t k = 0; k < cfg.n_noise_features; ++k)
    d.latent.push_back(std::get<double>(sv[numbered("noise_", k)]));
  d.u_label = rng.uniform();
  return d;
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

bool field_missing(const DonorRecord& r, const std::string& f) {
  auto it = r.static_vars.find(f);
  return it == r.static_vars.end() || kdisc::is_missing(it->second);
}

}  // namespace

SynthConfig SynthConfig::from_json(const json& j) {
  SynthConfig c;
  c.n_donors = j.value("n_donors", c.n_donors);
  c.seed = j.value("seed", c.seed);
  c.n_informative_features = j.value("n_informative_features", c.n_informative_features);
  c.n_noise_features = j.value("n_noise_features", c.n_noise_features);
  c.target_discard = j.value("target_discard", c.target_discard);
  c.signal_scale = j.value("signal_scale", c.signal_scale);
  c.marker_weight = j.value("marker_weight", c.marker_weight);
  if (j.contains("weights")) c.weights = j.at("weights").get<std::map<std::string, double>>();
  if (j.contains("missingness")) {
    const auto& m = j.at("missingness");
    auto& r = c.missingness;
    r.logical_default = m.value("logical_default", r.logical_default);
    r.missing_as_category = m.value("missing_as_category", r.missing_as_category);
    r.config_rule = m.value("config_rule", r.config_rule);
    r.normal_sample = m.value("normal_sample", r.normal_sample);
    r.dichotomize = m.value("dichotomize", r.dichotomize);
    r.iterative = m.value("iterative", r.iterative);
  }
  for (const auto& s : j.value("series", json::array()))
    c.series.push_back({s.at("name").get<std::string>(), s.at("base_mean").get<double>(), s.value("base_log_sd", 0.3),
                        s.value("slope_sd", 0.0), s.value("mean_extra_obs", 3.0), s.value("gap_hours", 8.0),
                        s.value("noise_sd", 0.0)});
  return c;
}

json SynthConfig::to_json() const {
  json series_j = json::array();
  for (const auto& s : series)
    series_j.push_back({{"name", s.name},
                        {"base_mean", s.base_mean},
                        {"base_log_sd", s.base_log_sd},
                        {"slope_sd", s.slope_sd},
                        {"mean_extra_obs", s.mean_extra_obs},
                        {"gap_hours", s.gap_hours},
                        {"noise_sd", s.noise_sd}});
  const auto& m = missingness;
  return {{"n_donors", n_donors},
          {"seed", seed},
          {"n_informative_features", n_informative_features},
          {"n_noise_features", n_noise_features},
          {"target_discard", target_discard},
          {"signal_scale", signal_scale},
          {"marker_weight", marker_weight},
          {"weights", weights},
          {"missingness",
           {{"logical_default", m.logical_default},
            {"missing_as_category", m.missing_as_category},
            {"config_rule", m.config_rule},
            {"normal_sample", m.normal_sample},
            {"dichotomize", m.dichotomize},
            {"iterative", m.iterative}}},
          {"series", series_j}};
}

json GroundTruth::to_json() const {
  return {{"intercept", intercept},
          {"weights", weights},
          {"informative", informative},
          {"noise", noise},
          {"target_discard", target_discard},
          {"realized_discard", realized_discard},
          {"missingness_fields", missingness_fields},
          {"missingness_target", missingness_target},
          {"missingness_realized", missingness_realized},
          {"confound_medication", confound_medication}};
}

GroundTruth GroundTruth::from_json(const json& j) {
  GroundTruth g;
  g.intercept = j.at("intercept").get<double>();
  g.weights = j.at("weights").get<std::map<std::string, double>>();
  g.informative = j.at("informative").get<std::vector<std::string>>();
  g.noise = j.at("noise").get<std::vector<std::string>>();
  g.target_discard = j.at("target_discard").get<double>();
  g.realized_discard = j.at("realized_discard").get<double>();
  g.missingness_fields = j.at("missingness_fields").get<std::map<std::string, std::vector<std::string>>>();
  g.missingness_target = j.at("missingness_target").get<std::map<std::string, double>>();
  g.missingness_realized = j.at("missingness_realized").get<std::map<std::string, double>>();
  g.confound_medication = j.value("confound_medication", std::string{});
  return g;
}

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth) {
  write_text(path, truth.to_json().dump(2) + "\n");
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  return GroundTruth::from_json(json::parse(read_text(path)));
}

std::map<std::string, double> realized_missingness(const std::vector<DonorRecord>& records,
                                                   const std::map<std::string, std::vector<std::string>>& fields) {
  std::map<std::string, double> out;
  for (const auto& [cls, names] : fields) {
    double total = 0.0;
    for (const auto& f : names) {
      std::size_t miss = 0;
      for (const auto& r : records) miss += field_missing(r, f) ? 1 : 0;
      total += static_cast<double>(miss) / static_cast<double>(records.size());
    }
    out[cls] = names.empty() ? 0.0 : total / static_cast<double>(names.size());
  }
  return out;
}

SynthCohort generate_cohort(const SynthConfig& cfg) {
  if (!(cfg.target_discard > 0.0 && cfg.target_discard < 1.0))
    throw ConfigError("target discard prevalence must lie in (0, 1)");
  if (cfg.n_donors < 10) throw ConfigError("a synthetic cohort needs at least 10 donors");
  const auto series = cfg.series.empty() ? default_series() : cfg.series;
  const std::size_t n = cfg.n_donors;

  std::vector<DonorLatent> donors(n);
  const auto nn = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < nn; ++i) donors[static_cast<std::size_t>(i)] = simulate_donor(cfg, series, static_cast<std::size_t>(i));

  SynthCohort out;
  std::vector<double> w;
  for (const auto& [name, wt] : clinical_weights()) {
    out.latent_names.push_back(name);
    const auto it = cfg.weights.find(name);
    w.push_back(it == cfg.weights.end() ? wt : it->second);
  }
  for (std::size_t k = 0; k < cfg.n_informative_features; ++k) {
    out.latent_names.push_back(numbered("marker_", k));
    w.push_back((k % 2 == 0 ? 1.0 : -1.0) * cfg.marker_weight);
  }
  for (std::size_t k = 0; k < cfg.n_noise_features; ++k) {
    out.latent_names.push_back(numbered("noise_", k));
    w.push_back(0.0);
  }
  for (auto& v : w) v *= cfg.signal_scale;

  // Standardize the latent features over the cohort.
  const std::size_t p = out.latent_names.size();
  out.latent = Matrix(n, p);
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0, sq = 0.0;
    for (const auto& d : donors) mean += d.latent[j];
    mean /= static_cast<double>(n);
    for (const auto& d : donors) sq += (d.latent[j] - mean) * (d.latent[j] - mean);
    const double sd = std::sqrt(sq / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) out.latent(i, j) = sd > 0 ? (donors[i].latent[j] - mean) / sd : 0.0;
  }
  std::vector<double> score(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) score[i] += w[j] * out.latent(i, j);

  // Common uniforms make the transplanted count monotone in the intercept.
  auto discard_rate = [&](double b) {
    std::size_t discarded = 0;
    for (std::size_t i = 0; i < n; ++i) discarded += donors[i].u_label < sigmoid(b + score[i]) ? 0 : 1;
    return static_cast<double>(discarded) / static_cast<double>(n);
  };
  double lo = -40.0, hi = 40.0;  // discard rate decreases in b
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (discard_rate(mid) > cfg.target_discard) lo = mid;
    else hi = mid;
  }
  const double b = std::abs(discard_rate(lo) - cfg.target_discard) <= std::abs(discard_rate(hi) - cfg.target_discard) ? lo : hi;
  const double realized = discard_rate(b);
  if (std::abs(realized - cfg.target_discard) > 0.005)
    throw ConfigError("discard prevalence " + std::to_string(cfg.target_discard) +
                      " is unreachable for this cohort (closest " + std::to_string(realized) + ")");

  out.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    DonorLatent& d = donors[i];
    const bool transplanted = d.u_label < sigmoid(b + score[i]);
    Rng post(cfg.seed, 0x3ed, i);
    auto& k = d.record.kidneys;
    if (transplanted) {
      const double u = post.uniform();
      k = u < 0.85 ? std::array{KidneyOutcome::Transplanted, KidneyOutcome::Transplanted}
          : u < 0.97 ? std::array{KidneyOutcome::Transplanted, KidneyOutcome::Discarded}
                     : std::array{KidneyOutcome::Transplanted, KidneyOutcome::Unknown};
      if (post.bernoulli(0.5)) std::swap(k[0], k[1]);
    } else {
      k = post.bernoulli(0.97) ? std::array{KidneyOutcome::Discarded, KidneyOutcome::Discarded}
                               : std::array{KidneyOutcome::Discarded, KidneyOutcome::Unknown};
    }
    // Medications; heparin follows the procurement procedure, hence the outcome.
    for (const auto& m : medication_pool())
      if (post.bernoulli(m.p)) d.record.medications.push_back(std::string(m.token) + " " + m.dose);
    if (post.bernoulli(transplanted ? 0.70 : 0.35)) d.record.medications.push_back(std::string(kConfound) + " 5000 IE");
    out.records.push_back(std::move(d.record));
  }

  // Exact-count missingness per class. Eligible donors are those whose true
  // value is what the class's imputation would restore.
  const auto& mr = cfg.missingness;
  struct ClassSpec {
    const char* name;
    double rate;
    std::vector<std::string> fields;
  };
  const std::vector<ClassSpec> classes{
      {"logical_default", mr.logical_default, {"diagnosis_diabetes", "diagnosis_hypertension"}},
      {"missing_as_category", mr.missing_as_category, {"blood_group"}},
      {"config_rule", mr.config_rule, {"cpr_duration_min"}},
      {"normal_sample", mr.normal_sample, {"body_weight_kg", "height_cm"}},
      {"dichotomize", mr.dichotomize, {"biopsy_glomerulosclerosis_pct"}},
      {"iterative", mr.iterative, {"egfr", "albumin"}},
  };
  GroundTruth& gt = out.truth;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& cls = classes[c];
    gt.missingness_fields[cls.name] = cls.fields;
    gt.missingness_target[cls.name] = cls.rate;
    for (std::size_t f = 0; f < cls.fields.size(); ++f) {
      const auto& field = cls.fields[f];
      std::vector<std::size_t> eligible;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& v = out.records[i].static_vars.at(field);
        const bool at_default = std::holds_alternative<double>(v) && std::get<double>(v) == 0.0;
        const bool needs_default = cls.name == std::string("logical_default") || cls.name == std::string("config_rule");
        if (!needs_default || at_default) eligible.push_back(i);
      }
      const auto want = round_count(cls.rate * static_cast<double>(n));
      if (want > eligible.size())
        throw ConfigError(std::string("missingness rate for ") + cls.name + " exceeds the donors eligible for it");
      Rng rng(cfg.seed, 0x3a55, c * 16 + f);
      rng.shuffle(std::span<std::size_t>(eligible));
      for (std::size_t k = 0; k < want; ++k) out.records[eligible[k]].static_vars.erase(field);
    }
  }
  gt.missingness_realized = realized_missingness(out.records, gt.missingness_fields);

  gt.intercept = b;
  for (std::size_t j = 0; j < p; ++j) {
    gt.weights[out.latent_names[j]] = w[j];
    (w[j] != 0.0 ? gt.informative : gt.noise).push_back(out.latent_names[j]);
  }
  gt.target_discard = cfg.target_discard;
  gt.realized_discard = realized;
  gt.confound_medication = std::string("med__") + kConfound;
  return out;
}

PlantedData generate_planted(const PlantedConfig& cfg) {
  const std::size_t p = cfg.n_informative + cfg.n_noise;
  PlantedData d;
  d.X = Matrix(cfg.n_rows, p);
  d.y.resize(cfg.n_rows);
  d.weights.assign(p, 0.0);
  for (std::size_t j = 0; j < cfg.n_informative; ++j) d.weights[j] = (j % 2 == 0 ? 1.0 : -1.0) * cfg.weight;
  for (std::size_t i = 0; i < cfg.n_rows; ++i) {
    Rng rng(cfg.seed, 0x91a7, i);
    double z = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      d.X(i, j) = rng.normal();
      z += d.weights[j] * d.X(i, j);
    }
    d.y[i] = rng.uniform() < sigmoid(z) ? 1 : 0;
  }
  return d;
}

}  // namespace kdisc::synth
