#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdisc/core/parallel.hpp"
#include "kdisc/dataset.hpp"
#include "kdisc/features/encoding.hpp"
#include "kdisc/features/imputation.hpp"
#include "kdisc/features/timeseries.hpp"
#include "kdisc/features/transforms.hpp"

namespace kdisc::features {

/// Everything the engineering stage reads from the config file.
struct EngineeringConfig {
  OutcomeLevels levels;
  std::size_t medication_top_k = 40;
  std::vector<std::string> icd_patterns{"^icd_"};
  double rare_threshold = 0.01;
  bool single_value_pick_last = true;
  DomainFields domain;
  std::vector<std::string> exclude_static;  ///< regexes of raw fields never emitted
  StrategyConfig imputation;

  static EngineeringConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Applies ConfigRule text rules: a missing target field takes the value of
/// the first rule whose regex matches the source text field.
void apply_config_rules(DonorRecord& r, const StrategyConfig& cfg);

/// Train-fitted schema mapping donor records to the engineered matrix.
class FeaturePipeline {
 public:
  /// Fits every data-dependent step on the donors in `train_ids`.
  static FeaturePipeline fit(const LabeledCohort& cohort, const std::vector<std::string>& train_ids,
                             const EngineeringConfig& config, std::uint64_t seed,
                             Exec exec = Exec::Parallel);

  /// Columns before imputation.
  const std::vector<std::string>& raw_features() const { return raw_names_; }
  const std::vector<FeatureType>& raw_types() const { return raw_types_; }
  /// Final columns after imputation and redundancy removal.
  const std::vector<std::string>& features() const { return final_names_; }
  const std::vector<std::string>& dropped() const { return dropped_; }
  const ImputationPlan& plan() const { return plan_; }
  const std::map<std::string, TimeSeriesKind>& kinds() const { return kinds_; }
  const MedicationVocabulary& medications() const { return meds_; }

  /// Encodes donors into the pre-imputation matrix (NaN = missing).
  FeatureMatrix encode(const LabeledCohort& cohort, const std::vector<std::string>& ids,
                       Exec exec = Exec::Parallel) const;

  /// encode + impute + column selection.
  FeatureMatrix transform(const LabeledCohort& cohort, const std::vector<std::string>& ids,
                          Exec exec = Exec::Parallel) const;

  nlohmann::json to_json() const;
  static FeaturePipeline from_json(const nlohmann::json& j);

 private:
  std::vector<double> encode_donor(const DonorRecord& r) const;

  EngineeringConfig config_;
  std::map<std::string, TimeSeriesKind> kinds_;
  std::vector<std::string> static_numeric_;
  std::vector<CategoricalEncoder> encoders_;
  MedicationVocabulary meds_;
  AlcoholBins alcohol_;
  std::vector<std::string> raw_names_;
  std::vector<FeatureType> raw_types_;
  ImputationPlan plan_;
  std::vector<std::string> final_names_;
  std::vector<std::string> dropped_;
};

}  // namespace kdisc::features
