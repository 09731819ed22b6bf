#pragma once

#include <memory>
#include <string>
#include <vector>

#include "kdisc/models/classifier.hpp"

namespace kdisc::models {

/// Arithmetic mean of per-model probability vectors (all the same length).
/// Throws ConfigError for an empty list.
std::vector<double> ensemble_mean(const std::vector<std::vector<double>>& base_probs);

/// Mean-probability ensemble over fitted base models, each reading its own
/// feature subset. Decision trees are not admitted.
class EnsembleModel {
 public:
  struct Member {
    std::unique_ptr<Classifier> model;
    std::vector<std::string> features;
  };

  void add(std::unique_ptr<Classifier> model, std::vector<std::string> features);
  std::size_t size() const { return members_.size(); }
  const std::vector<Member>& members() const { return members_; }

  /// Projects X (columns named by `names`) onto each member's features.
  std::vector<double> predict_proba(const Matrix& X, const std::vector<std::string>& names) const;
  /// The per-member probabilities, in member order.
  std::vector<std::vector<double>> member_proba(const Matrix& X,
                                                const std::vector<std::string>& names) const;

  nlohmann::json to_json() const;
  static EnsembleModel from_json(const nlohmann::json& j);

 private:
  std::vector<Member> members_;
};

}  // namespace kdisc::models
