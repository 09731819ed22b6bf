#pragma once

#include <cstdint>
#include <vector>

#include "kdisc/models/classifier.hpp"

namespace kdisc::models {

/// Per-feature cut points. A value falls in bin k when exactly k cuts are
/// <= the value; a split at k sends values below cuts[k] left.
struct FeatureBins {
  std::vector<std::vector<double>> cuts;

  std::uint32_t bin(std::size_t feature, double v) const;
};

/// Train-fitted quantile cut points with at most `max_bins` bins per
/// feature. max_bins = 0 puts a cut between every pair of distinct values,
/// which makes histogram split search identical to exact greedy search.
FeatureBins fit_bins(const Matrix& X, std::size_t max_bins);

struct BoostNode {
  int feature = -1;
  double threshold = 0.0;  ///< x < threshold goes left
  int left = -1;
  int right = -1;
  double weight = 0.0;     ///< leaf value, learning rate already applied
};

struct BoostTree {
  std::vector<BoostNode> nodes;
  double predict(std::span<const double> x) const;
};

/// Leaf weight of Newton boosting with L1 soft threshold `alpha` and L2 `lambda`.
double newton_leaf_weight(double grad_sum, double hess_sum, double alpha, double lambda);

/// Second-order gradient boosting on the logistic loss.
///
/// Hyperparameters: n_estimators, learning_rate, max_depth, min_child_weight,
/// subsample, colsample_bytree, reg_alpha, reg_lambda, early_stopping_rounds,
/// tree_method ("hist" with 256 bins, or "exact"). A validation set is
/// required; the model keeps the round count with the lowest validation
/// loss, counting zero rounds (the prior log-odds) as a candidate.
class GradientBoosting final : public Classifier {
 public:
  GradientBoosting(HyperParams hp, std::uint64_t seed);
  Family family() const override { return Family::GradientBoosting; }
  void fit(const TrainSet& data) override;
  double predict_one(std::span<const double> x) const override { return sigmoid(raw_score_one(x)); }
  double raw_score_one(std::span<const double> x) const override;

  double base_score() const { return base_; }
  const std::vector<BoostTree>& trees() const { return trees_; }
  /// Validation log-loss after 0, 1, 2, ... rounds as recorded during fitting.
  const std::vector<double>& validation_curve() const { return val_curve_; }
  std::size_t rounds_fitted() const { return val_curve_.empty() ? 0 : val_curve_.size() - 1; }

 protected:
  nlohmann::json state_json() const override;
  void load_state(const nlohmann::json& j) override;

 private:
  double base_ = 0.0;
  std::vector<BoostTree> trees_;
  std::vector<double> val_curve_;
};

}  // namespace kdisc::models
