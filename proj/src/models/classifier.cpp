#include "kdisc/models/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "kdisc/core/error.hpp"
#include "kdisc/models/boosting.hpp"
#include "kdisc/models/logistic.hpp"
#include "kdisc/models/mlp.hpp"
#include "kdisc/models/tree.hpp"

namespace kdisc::models {

using nlohmann::json;

const char* to_string(Family f) {
  switch (f) {
    case Family::DecisionTree: return "dt";
    case Family::LogisticRegression: return "lr";
    case Family::RandomForest: return "rf";
    case Family::GradientBoosting: return "gbt";
    case Family::Mlp: return "mlp";
    case Family::Ensemble: return "ensemble";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  for (Family f : {Family::DecisionTree, Family::LogisticRegression, Family::RandomForest,
                   Family::GradientBoosting, Family::Mlp, Family::Ensemble})
    if (s == to_string(f)) return f;
  throw ConfigError("unknown model family '" + s + "' (expected dt, lr, rf, gbt, mlp or ensemble)");
}

const std::vector<Family>& base_families() {
  static const std::vector<Family> f{Family::DecisionTree, Family::LogisticRegression,
                                     Family::RandomForest, Family::GradientBoosting, Family::Mlp};
  return f;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double clamped_logit(double p, double eps) {
  const double q = std::clamp(p, eps, 1.0 - eps);
  return std::log(q / (1.0 - q));
}

double hp_number(const HyperParams& hp, const char* key, double fallback) {
  if (!hp.is_object() || !hp.contains(key) || hp.at(key).is_null()) return fallback;
  const auto& v = hp.at(key);
  if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
  if (!v.is_number()) throw ConfigError(std::string("hyperparameter '") + key + "' must be numeric");
  return v.get<double>();
}

long long hp_int(const HyperParams& hp, const char* key, long long fallback) {
  const double v = hp_number(hp, key, static_cast<double>(fallback));
  if (v != std::floor(v)) throw ConfigError(std::string("hyperparameter '") + key + "' must be an integer");
  return static_cast<long long>(v);
}

std::string hp_string(const HyperParams& hp, const char* key, const std::string& fallback) {
  if (!hp.is_object() || !hp.contains(key) || hp.at(key).is_null()) return fallback;
  return hp.at(key).get<std::string>();
}

std::vector<double> Classifier::predict_proba(const Matrix& X) const {
  std::vector<double> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = predict_one(X.row(i));
  return out;
}

std::vector<double> Classifier::raw_scores(const Matrix& X) const {
  std::vector<double> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = raw_score_one(X.row(i));
  return out;
}

json Classifier::to_json() const {
  return {{"family", to_string(family())},
          {"hyperparams", hp_},
          {"seed", seed_},
          {"state", state_json()}};
}

std::unique_ptr<Classifier> make_classifier(Family f, const HyperParams& hp, std::uint64_t seed) {
  switch (f) {
    case Family::DecisionTree: return std::make_unique<DecisionTree>(hp, seed);
    case Family::LogisticRegression: return std::make_unique<LogisticRegression>(hp, seed);
    case Family::RandomForest: return std::make_unique<RandomForest>(hp, seed);
    case Family::GradientBoosting: return std::make_unique<GradientBoosting>(hp, seed);
    case Family::Mlp: return std::make_unique<Mlp>(hp, seed);
    case Family::Ensemble: break;
  }
  throw ConfigError("the ensemble is assembled from fitted base models, not constructed directly");
}

std::unique_ptr<Classifier> fit_classifier(Family f, const HyperParams& hp, std::uint64_t seed,
                                           const TrainSet& data) {
  auto model = make_classifier(f, hp, seed);
  model->fit(data);
  return model;
}

std::unique_ptr<Classifier> classifier_from_json(const json& j) {
  auto model = make_classifier(family_from_string(j.at("family").get<std::string>()),
                               j.at("hyperparams"), j.at("seed").get<std::uint64_t>());
  model->load_state(j.at("state"));
  return model;
}

}  // namespace kdisc::models
