#pragma once

#include <span>
#include <string>
#include <vector>

#include "kdisc/dataset.hpp"

namespace kdisc::features {

inline constexpr double kCreatinineUmolToMgdl = 0.011312;

/// Diuresis in the last hour normalized by body weight (ml/kg).
/// NaN when an input is missing or body weight is not positive.
double diuresis_last_hour_per_kg(double dlh_ml, double body_weight_kg);

/// Total diuresis over a window scaled to 24 h and normalized by body weight
/// (ml/24h/kg). NaN when an input is missing or bw / window is not positive.
double diuresis_24h_per_kg(double total_ml, double window_hours, double body_weight_kg);

/// Positive/negative grouping of a rare-level categorical variable into a
/// single 0/1 feature.
struct Dichotomy {
  std::string variable;
  std::vector<std::string> positive;
  std::vector<std::string> negative;
};

/// Names of the raw fields the transforms read. Dates are day numbers.
struct DomainFields {
  std::string diuresis_last_hour = "diuresis_last_hour_ml";
  std::string body_weight = "body_weight_kg";
  std::string diuresis_total = "diuresis_total_ml";
  std::string diuresis_window = "diuresis_window_hours";
  std::vector<std::string> creatinine_series{"creatinine"};
  std::string birth_day = "birth_day";
  std::string diabetes_diagnosis_day = "diabetes_diagnosis_day";
  std::string death_day = "death_day";
  std::string alcohol_start_day = "alcohol_start_day";
  std::string alcohol_end_day = "alcohol_end_day";
  std::string admission_day = "admission_day";
  std::vector<Dichotomy> dichotomies;

  /// Raw static fields that are consumed here and not emitted as features.
  std::vector<std::string> consumed() const;
};

/// Train-fitted quartile edges of "days since last alcohol consumption".
struct AlcoholBins {
  std::vector<double> edges;  ///< q25, q50, q75; empty if no training donor stopped drinking
};

/// 0 no consumption documented, 5 consuming until admission, otherwise
/// 4 (most recent) .. 1 (longest ago) by the training quartiles of days
/// between the end of consumption and admission.
double last_alcohol_category(const DonorRecord& r, const DomainFields& f, const AlcoholBins& bins);

AlcoholBins fit_alcohol_bins(std::span<const DonorRecord* const> train, const DomainFields& f);

std::vector<std::string> domain_feature_names(const DomainFields& f);

/// Derived features in the order of domain_feature_names().
std::vector<double> apply_domain_transforms(const DonorRecord& r, const DomainFields& f,
                                            const AlcoholBins& bins);

/// Converts creatinine series from µmol/L to mg/dL in place.
void convert_creatinine_units(DonorRecord& r, const DomainFields& f);

}  // namespace kdisc::features
