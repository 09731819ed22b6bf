#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdisc/core/matrix.hpp"
#include "kdisc/dataset.hpp"

namespace kdisc::synth {

/// Shape of one simulated numeric time series.
struct SeriesSpec {
  std::string name;
  double base_mean = 0.0;      ///< log-normal median of the donor's level
  double base_log_sd = 0.3;
  double slope_sd = 0.0;       ///< donor slope per hour ~ N(0, slope_sd)
  double mean_extra_obs = 3.0; ///< observations = 1 + Poisson(mean_extra_obs)
  double gap_hours = 8.0;      ///< mean spacing between observations
  double noise_sd = 0.0;
};

/// Missingness injected per imputation strategy class. Counts are exact:
/// round(rate * n) donors lose the class's fields.
struct MissingnessRates {
  double logical_default = 0.40;
  double missing_as_category = 0.08;
  double config_rule = 0.30;
  double normal_sample = 0.06;
  double dichotomize = 0.80;
  double iterative = 0.12;
};

struct SynthConfig {
  std::size_t n_donors = 2000;
  std::uint64_t seed = 20240601;
  std::size_t n_informative_features = 2;  ///< extra "marker_" fields with nonzero weight
  std::size_t n_noise_features = 10;       ///< "noise_" fields with weight exactly zero
  double target_discard = 0.228;
  double signal_scale = 1.0;   ///< multiplies every coefficient; 0 removes all signal
  double marker_weight = 0.4;
  std::vector<SeriesSpec> series;  ///< empty means the default panel
  MissingnessRates missingness;
  /// Coefficients on standardized latent features (clinical panel). Missing
  /// names use the defaults; markers and noise are added automatically.
  std::map<std::string, double> weights;

  static SynthConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// The generating mechanism. Kept in its own file and never read by the
/// pipeline stages.
struct GroundTruth {
  double intercept = 0.0;
  std::map<std::string, double> weights;  ///< engineered-feature name -> weight
  std::vector<std::string> informative;   ///< nonzero weights
  std::vector<std::string> noise;         ///< weight exactly zero
  double target_discard = 0.0;
  double realized_discard = 0.0;
  std::map<std::string, std::vector<std::string>> missingness_fields;  ///< class -> raw fields
  std::map<std::string, double> missingness_target;
  std::map<std::string, double> missingness_realized;
  std::string confound_medication;

  nlohmann::json to_json() const;
  static GroundTruth from_json(const nlohmann::json& j);
};

struct SynthCohort {
  std::vector<DonorRecord> records;
  GroundTruth truth;
  /// Latent standardized features before missingness, one row per donor.
  Matrix latent;
  std::vector<std::string> latent_names;
};

/// Simulates donors with per-donor random streams (parallel over donors),
/// then solves the intercept by bisection so the realized discard rate is
/// within 0.5 percentage points of the target. Throws ConfigError when the
/// target cannot be reached.
SynthCohort generate_cohort(const SynthConfig& cfg);

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth read_ground_truth(const std::filesystem::path& path);

/// Fraction of donors missing each class's fields in a cohort.
std::map<std::string, double> realized_missingness(const std::vector<DonorRecord>& records,
                                                   const std::map<std::string, std::vector<std::string>>& fields);

/// Plain matrix with a known informative block: the first n_informative
/// columns carry logistic signal, the rest are independent noise.
struct PlantedConfig {
  std::size_t n_rows = 600;
  std::size_t n_informative = 10;
  std::size_t n_noise = 30;
  double weight = 1.0;       ///< |coefficient| of each informative column
  std::uint64_t seed = 1;
};

struct PlantedData {
  Matrix X;
  Labels y;
  std::vector<double> weights;
};

PlantedData generate_planted(const PlantedConfig& cfg);

}  // namespace kdisc::synth
