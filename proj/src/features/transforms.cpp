#include "kdisc/features/transforms.hpp"

#include <algorithm>
#include <cmath>

namespace kdisc::features {

namespace {

constexpr double kDaysPerYear = 365.25;

double num(const DonorRecord& r, const std::string& field) {
  auto it = r.static_vars.find(field);
  if (it == r.static_vars.end()) return kMissing;
  if (std::holds_alternative<double>(it->second)) return std::get<double>(it->second);
  return kMissing;
}

// Linear-interpolated quantile of sorted data.
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

double diuresis_last_hour_per_kg(double dlh_ml, double body_weight_kg) {
  if (is_missing(dlh_ml) || is_missing(body_weight_kg) || body_weight_kg <= 0.0) return kMissing;
  return dlh_ml / body_weight_kg;
}

double diuresis_24h_per_kg(double total_ml, double window_hours, double body_weight_kg) {
  if (is_missing(total_ml) || is_missing(window_hours) || is_missing(body_weight_kg) ||
      window_hours <= 0.0 || body_weight_kg <= 0.0)
    return kMissing;
  return total_ml / window_hours * 24.0 / body_weight_kg;
}

std::vector<std::string> DomainFields::consumed() const {
  std::vector<std::string> out{diuresis_last_hour, diuresis_total,   diuresis_window,
                               birth_day,          diabetes_diagnosis_day, death_day,
                               alcohol_start_day,  alcohol_end_day,  admission_day};
  for (const auto& d : dichotomies) out.push_back(d.variable);
  return out;
}

AlcoholBins fit_alcohol_bins(std::span<const DonorRecord* const> train, const DomainFields& f) {
  std::vector<double> days;
  for (const DonorRecord* r : train) {
    const double start = num(*r, f.alcohol_start_day);
    const double end = num(*r, f.alcohol_end_day);
    const double adm = num(*r, f.admission_day);
    if (!is_missing(start) && !is_missing(end) && !is_missing(adm)) days.push_back(adm - end);
  }
  AlcoholBins bins;
  if (days.empty()) return bins;
  std::sort(days.begin(), days.end());
  bins.edges = {quantile(days, 0.25), quantile(days, 0.50), quantile(days, 0.75)};
  return bins;
}

double last_alcohol_category(const DonorRecord& r, const DomainFields& f, const AlcoholBins& bins) {
  const double start = num(r, f.alcohol_start_day);
  const double end = num(r, f.alcohol_end_day);
  if (is_missing(start)) return 0.0;
  if (is_missing(end)) return 5.0;
  const double adm = num(r, f.admission_day);
  if (is_missing(adm) || bins.edges.empty()) return kMissing;
  const double days = adm - end;
  if (days <= bins.edges[0]) return 4.0;
  if (days <= bins.edges[1]) return 3.0;
  if (days <= bins.edges[2]) return 2.0;
  return 1.0;
}

std::vector<std::string> domain_feature_names(const DomainFields& f) {
  std::vector<std::string> out{"diuresis_last_hour_per_kg", "diuresis_24h_per_kg",
                               "diabetes_age_at_diagnosis", "diabetes_duration_years",
                               "alcohol_duration_days",     "alcohol_last_category"};
  for (const auto& d : f.dichotomies) out.push_back(d.variable + "__positive");
  return out;
}

std::vector<double> apply_domain_transforms(const DonorRecord& r, const DomainFields& f,
                                            const AlcoholBins& bins) {
  std::vector<double> out;
  const double bw = num(r, f.body_weight);
  out.push_back(diuresis_last_hour_per_kg(num(r, f.diuresis_last_hour), bw));
  out.push_back(diuresis_24h_per_kg(num(r, f.diuresis_total), num(r, f.diuresis_window), bw));

  const double birth = num(r, f.birth_day);
  const double diag = num(r, f.diabetes_diagnosis_day);
  const double death = num(r, f.death_day);
  out.push_back(is_missing(diag) || is_missing(birth) ? kMissing : (diag - birth) / kDaysPerYear);
  out.push_back(is_missing(diag) || is_missing(death) ? kMissing : (death - diag) / kDaysPerYear);

  const double start = num(r, f.alcohol_start_day);
  double end = num(r, f.alcohol_end_day);
  if (is_missing(end)) end = num(r, f.admission_day);
  out.push_back(is_missing(start) || is_missing(end) ? kMissing : end - start);
  out.push_back(last_alcohol_category(r, f, bins));

  for (const auto& d : f.dichotomies) {
    double v = kMissing;
    auto it = r.static_vars.find(d.variable);
    if (it != r.static_vars.end() && std::holds_alternative<std::string>(it->second)) {
      const auto& lvl = std::get<std::string>(it->second);
      if (std::find(d.positive.begin(), d.positive.end(), lvl) != d.positive.end()) v = 1.0;
      if (std::find(d.negative.begin(), d.negative.end(), lvl) != d.negative.end()) v = 0.0;
    }
    out.push_back(v);
  }
  return out;
}

void convert_creatinine_units(DonorRecord& r, const DomainFields& f) {
  for (const auto& name : f.creatinine_series) {
    auto it = r.timeseries.find(name);
    if (it == r.timeseries.end()) continue;
    for (auto& p : it->second)
      if (std::holds_alternative<double>(p.value))
        p.value = std::get<double>(p.value) * kCreatinineUmolToMgdl;
  }
}

}  // namespace kdisc::features
