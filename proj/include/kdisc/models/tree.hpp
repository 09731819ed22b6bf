#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kdisc/core/parallel.hpp"
#include "kdisc/models/classifier.hpp"

namespace kdisc::models {

/// Gini impurity of a node with `pos` positive weight out of `total`.
double gini(double pos, double total);

struct CartParams {
  int max_depth = 0;                  ///< 0 = unlimited
  double min_samples_leaf = 1;
  double min_samples_split = 2;
  std::size_t max_features = 0;       ///< features tried per split; 0 = all
};

struct CartNode {
  int feature = -1;  ///< -1 marks a leaf
  double threshold = 0.0;  ///< x <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;   ///< weighted fraction of positives
  double weight = 0.0;  ///< weighted sample count
};

struct CartTree {
  std::vector<CartNode> nodes;

  double predict(std::span<const double> x) const;
  int depth() const;

  nlohmann::json to_json() const;
  static CartTree from_json(const nlohmann::json& j);
};

/// Greedy Gini CART. `weights` holds a non-negative multiplicity per row
/// (bootstrap counts, or all ones). The random stream of each node is derived
/// from `seed` and the node's path, so a shallower tree grown with the same
/// seed is always a prefix of a deeper one.
CartTree grow_cart(const Matrix& X, const Labels& y, std::span<const double> weights,
                   const CartParams& params, std::uint64_t seed);

/// "sqrt" -> floor(sqrt(p)), "all"/"none" -> p, a number -> that many (capped at p).
std::size_t resolve_max_features(const HyperParams& hp, std::size_t p);

class DecisionTree final : public Classifier {
 public:
  DecisionTree(HyperParams hp, std::uint64_t seed);
  Family family() const override { return Family::DecisionTree; }
  void fit(const TrainSet& data) override;
  double predict_one(std::span<const double> x) const override { return tree_.predict(x); }
  double raw_score_one(std::span<const double> x) const override;
  const CartTree& tree() const { return tree_; }

 protected:
  nlohmann::json state_json() const override { return tree_.to_json(); }
  void load_state(const nlohmann::json& j) override { tree_ = CartTree::from_json(j); }

 private:
  CartTree tree_;
};

class RandomForest final : public Classifier {
 public:
  RandomForest(HyperParams hp, std::uint64_t seed);
  Family family() const override { return Family::RandomForest; }
  void fit(const TrainSet& data) override { fit(data, Exec::Serial); }
  /// Trees are independent; each draws from its own stream, so the parallel
  /// path returns the same forest as the serial one.
  void fit(const TrainSet& data, Exec exec);
  double predict_one(std::span<const double> x) const override;
  double raw_score_one(std::span<const double> x) const override;
  const std::vector<CartTree>& trees() const { return trees_; }
  /// Seed of the stream that grows tree `t`.
  std::uint64_t tree_seed(std::size_t t) const;

 protected:
  nlohmann::json state_json() const override;
  void load_state(const nlohmann::json& j) override;

 private:
  std::vector<CartTree> trees_;
};

}  // namespace kdisc::models
