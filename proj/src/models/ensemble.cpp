#include "kdisc/models/ensemble.hpp"

#include <algorithm>

#include "kdisc/core/error.hpp"

namespace kdisc::models {

using nlohmann::json;

std::vector<double> ensemble_mean(const std::vector<std::vector<double>>& base_probs) {
  if (base_probs.empty()) throw ConfigError("the ensemble needs at least one base model");
  const std::size_t n = base_probs.front().size();
  std::vector<double> out(n, 0.0);
  for (const auto& p : base_probs) {
    if (p.size() != n) throw ConfigError("base model predictions differ in length");
    for (std::size_t i = 0; i < n; ++i) out[i] += p[i];
  }
  for (double& v : out) v /= static_cast<double>(base_probs.size());
  return out;
}

void EnsembleModel::add(std::unique_ptr<Classifier> model, std::vector<std::string> features) {
  const Family f = model->family();
  if (f == Family::DecisionTree || f == Family::Ensemble)
    throw ConfigError(std::string("family '") + to_string(f) + "' cannot join the ensemble");
  members_.push_back({std::move(model), std::move(features)});
}

std::vector<std::vector<double>> EnsembleModel::member_proba(
    const Matrix& X, const std::vector<std::string>& names) const {
  std::vector<std::vector<double>> out;
  for (const auto& m : members_) {
    std::vector<std::size_t> idx;
    for (const auto& f : m.features) {
      auto it = std::find(names.begin(), names.end(), f);
      if (it == names.end()) throw ConfigError("input lacks ensemble feature '" + f + "'");
      idx.push_back(static_cast<std::size_t>(it - names.begin()));
    }
    out.push_back(m.model->predict_proba(X.select_cols(idx)));
  }
  return out;
}

std::vector<double> EnsembleModel::predict_proba(const Matrix& X,
                                                 const std::vector<std::string>& names) const {
  return ensemble_mean(member_proba(X, names));
}

json EnsembleModel::to_json() const {
  json members = json::array();
  for (const auto& m : members_)
    members.push_back({{"features", m.features}, {"model", m.model->to_json()}});
  return {{"family", "ensemble"}, {"members", members}};
}

EnsembleModel EnsembleModel::from_json(const json& j) {
  EnsembleModel e;
  for (const auto& m : j.at("members"))
    e.add(classifier_from_json(m.at("model")), m.at("features").get<std::vector<std::string>>());
  return e;
}

}  // namespace kdisc::models
