#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdisc/dataset.hpp"

namespace kdisc::features {

enum class Strategy {
  None,               ///< complete on train, nothing to do
  LogicalDefault,     ///< missing means a known value (e.g. "no diagnosis")
  MissingAsCategory,  ///< handled by the categorical encoder
  ConfigRule,         ///< text rules at record level, then a fallback value
  NormalSample95,     ///< N(mu, sigma) draw restricted to mu ± 1.96 sigma
  Dichotomize,        ///< column replaced by a missingness indicator
  Iterative,          ///< round-robin ridge regression
  MeanFallback,       ///< complete on train, missing elsewhere: train mean
  Auto,               ///< Dichotomize above the missingness threshold, else Iterative
};

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct TextRule {
  std::string regex;
  double value = 0.0;
};

/// One entry of the strategy config. First matching pattern wins.
struct StrategyRule {
  std::string pattern;  ///< ECMAScript regex searched in the feature / variable name
  Strategy strategy = Strategy::Auto;
  double value = 0.0;   ///< LogicalDefault value; ConfigRule fallback
  std::string source;   ///< ConfigRule: static text field the rules read
  std::vector<TextRule> rules;
};

struct StrategyConfig {
  std::vector<StrategyRule> rules;
  double dichotomize_threshold = 0.70;
  int max_rounds = 10;
  double tolerance = 1e-3;
  double ridge_alpha = 1.0;
  /// Normal-sample parameters computed on each split separately. When false
  /// the train-fitted parameters are used everywhere.
  bool normal_sample_per_split = true;

  const StrategyRule* match(const std::string& name) const;

  static StrategyConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct RidgeModel {
  std::size_t target = 0;
  std::vector<std::size_t> predictors;
  std::vector<double> coef;
  double intercept = 0.0;
};

struct ColumnImputation {
  Strategy strategy = Strategy::None;
  double value = 0.0;         ///< default / fallback / train mean
  double mean = kMissing;     ///< train mean of observed values
  double sd = kMissing;       ///< train population sd of observed values
  double missing_fraction = 0.0;
};

/// Train-fitted imputation of a fixed column layout.
struct ImputationPlan {
  std::vector<std::string> input_features;
  std::vector<FeatureType> input_types;
  std::vector<ColumnImputation> columns;
  std::vector<std::size_t> iterative_order;      ///< ascending missingness
  std::vector<std::vector<RidgeModel>> rounds;   ///< models in fit order
  bool converged = true;
  double last_change = 0.0;
  std::uint64_t seed = 0;
  bool normal_sample_per_split = true;
  std::vector<std::string> warnings;

  std::vector<std::string> output_features() const;
  std::vector<FeatureType> output_types() const;

  nlohmann::json to_json() const;
  static ImputationPlan from_json(const nlohmann::json& j);
};

/// Fits the plan on the training matrix. Throws PlanError when an incomplete
/// feature has no matching rule, or when a missing-as-category rule matches a
/// column that still has gaps. Non-convergence within max_rounds is recorded
/// in `warnings` and the last iterate is kept.
ImputationPlan fit_imputation_plan(const FeatureMatrix& train, const StrategyConfig& config,
                                   std::uint64_t seed);

/// Applies the plan. The result has no missing cells; dichotomized columns
/// are renamed "<feature>__missing".
FeatureMatrix impute(const ImputationPlan& plan, const FeatureMatrix& m);

/// Draw from N(mean, sd) restricted to the central 95% range: rejection
/// sampling capped at 1000 draws, then clamping.
double sample_central_normal(double mean, double sd, std::uint64_t seed, std::uint64_t a,
                             std::uint64_t b);

inline constexpr double kCentral95 = 1.959963984540054;

/// Removes constant columns and bitwise-duplicate columns (the duplicate whose
/// name sorts later is dropped). Returns the dropped names.
std::vector<std::string> drop_redundant_constant(FeatureMatrix& m);

}  // namespace kdisc::features
