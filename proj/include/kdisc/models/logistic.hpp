#pragma once

#include <vector>

#include "kdisc/models/classifier.hpp"

namespace kdisc::models {

/// Elastic-net logistic regression fitted by SAGA with a proximal L1 step.
///
/// Objective, with n training rows:
///   mean log-loss + 1/(C n) * [l1_ratio |w|_1 + (1 - l1_ratio) / 2 |w|_2^2]
/// The intercept is not penalized. Hyperparameters: C, l1_ratio, plus the
/// solver knobs tol (1e-6) and max_epochs (200).
class LogisticRegression final : public Classifier {
 public:
  LogisticRegression(HyperParams hp, std::uint64_t seed);
  Family family() const override { return Family::LogisticRegression; }
  void fit(const TrainSet& data) override;
  double predict_one(std::span<const double> x) const override { return sigmoid(raw_score_one(x)); }
  double raw_score_one(std::span<const double> x) const override;

  const std::vector<double>& coef() const { return w_; }
  double intercept() const { return b_; }
  int epochs_run() const { return epochs_; }
  bool converged() const { return converged_; }

  /// Objective value at the current parameters.
  double objective(const Matrix& X, const Labels& y) const;

 protected:
  nlohmann::json state_json() const override;
  void load_state(const nlohmann::json& j) override;

 private:
  std::vector<double> w_;
  double b_ = 0.0;
  int epochs_ = 0;
  bool converged_ = false;
};

}  // namespace kdisc::models
