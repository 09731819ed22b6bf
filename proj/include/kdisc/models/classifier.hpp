#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdisc/core/matrix.hpp"

namespace kdisc::models {

enum class Family { DecisionTree, LogisticRegression, RandomForest, GradientBoosting, Mlp, Ensemble };

/// Short tags used in configs and file names: dt, lr, rf, gbt, mlp, ensemble.
const char* to_string(Family f);
Family family_from_string(const std::string& s);
/// The five families that are fitted directly (everything but the ensemble).
const std::vector<Family>& base_families();

/// Hyperparameter assignment. A JSON object keeps the point self-describing
/// in ledgers and model files.
using HyperParams = nlohmann::json;

/// Probability of the positive class (transplanted) at or above which the
/// positive class is predicted. A tie at exactly 0.5 goes to transplanted.
inline constexpr double kDecisionThreshold = 0.5;

inline int predicted_class(double p_transplanted) { return p_transplanted >= kDecisionThreshold ? 1 : 0; }

/// Training rows plus an optional validation set for early stopping.
struct TrainSet {
  const Matrix* X = nullptr;
  const Labels* y = nullptr;
  const Matrix* X_val = nullptr;
  const Labels* y_val = nullptr;
};

/// Uniform fit/score contract of every family.
class Classifier {
 public:
  Classifier(HyperParams hp, std::uint64_t seed) : hp_(std::move(hp)), seed_(seed) {}
  virtual ~Classifier() = default;

  virtual Family family() const = 0;
  virtual void fit(const TrainSet& data) = 0;

  /// P(transplanted | x). P(discarded | x) is its complement.
  virtual double predict_one(std::span<const double> x) const = 0;
  /// Uncalibrated score used by post-hoc calibration: logit or margin for
  /// LR, MLP and GBT, clamped logit of the probability for DT and RF.
  virtual double raw_score_one(std::span<const double> x) const = 0;

  /// Row-wise predict_one / raw_score_one; families with a faster batch
  /// path override these (results agree up to floating-point rounding).
  virtual std::vector<double> predict_proba(const Matrix& X) const;
  virtual std::vector<double> raw_scores(const Matrix& X) const;

  const HyperParams& hyperparams() const { return hp_; }
  std::uint64_t seed() const { return seed_; }

  /// Family, hyperparameters, seed and fitted state. Loading reproduces
  /// predictions bit for bit.
  nlohmann::json to_json() const;

 protected:
  virtual nlohmann::json state_json() const = 0;
  virtual void load_state(const nlohmann::json& j) = 0;
  friend std::unique_ptr<Classifier> classifier_from_json(const nlohmann::json& j);

  HyperParams hp_;
  std::uint64_t seed_;
};

/// Unfitted classifier of the given family. Validates hyperparameters and
/// throws ConfigError on invalid values. The ensemble is not constructible here.
std::unique_ptr<Classifier> make_classifier(Family f, const HyperParams& hp, std::uint64_t seed);

std::unique_ptr<Classifier> fit_classifier(Family f, const HyperParams& hp, std::uint64_t seed,
                                           const TrainSet& data);

std::unique_ptr<Classifier> classifier_from_json(const nlohmann::json& j);

/// Logit of p clamped to [eps, 1 - eps].
double clamped_logit(double p, double eps = 1e-6);
double sigmoid(double z);

/// hp[key] with a default; ints stored as floats are accepted.
double hp_number(const HyperParams& hp, const char* key, double fallback);
long long hp_int(const HyperParams& hp, const char* key, long long fallback);
std::string hp_string(const HyperParams& hp, const char* key, const std::string& fallback);

}  // namespace kdisc::models
