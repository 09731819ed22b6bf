#include "kdisc/models/hyperparams.hpp"

#include <algorithm>
#include <cmath>

#include "kdisc/core/error.hpp"

namespace kdisc::models {

using nlohmann::json;
using Kind = ParamDomain::Kind;

namespace {

ParamDomain int_param(std::string name, double lo, double hi, double step = 1) {
  return {std::move(name), Kind::Int, lo, hi, false, step, {}};
}
ParamDomain float_param(std::string name, double lo, double hi, bool log = false, double step = 0) {
  return {std::move(name), Kind::Float, lo, hi, log, step, {}};
}
ParamDomain cat_param(std::string name, std::vector<json> choices) {
  return {std::move(name), Kind::Categorical, 0, 0, false, 0, std::move(choices)};
}

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Int: return "int";
    case Kind::Float: return "float";
    case Kind::Categorical: return "categorical";
  }
  return "?";
}

}  // namespace

bool ParamDomain::contains(const json& v) const {
  if (kind == Kind::Categorical) return std::find(choices.begin(), choices.end(), v) != choices.end();
  if (!v.is_number()) return false;
  const double x = v.get<double>();
  if (!(x >= lo && x <= hi)) return false;
  if (kind == Kind::Int) {
    const double s = step > 0 ? step : 1.0;
    const double k = (x - lo) / s;
    return x == std::floor(x) && std::abs(k - std::round(k)) < 1e-9;
  }
  return true;
}

json ParamDomain::snap(double v) const {
  if (kind == Kind::Categorical) {
    const auto i = static_cast<std::size_t>(std::clamp(std::round(v), 0.0, static_cast<double>(choices.size() - 1)));
    return choices[i];
  }
  double x = std::clamp(v, lo, hi);
  if (kind == Kind::Int) {
    const double s = step > 0 ? step : 1.0;
    x = lo + s * std::round((x - lo) / s);
    while (x > hi) x -= s;
    return static_cast<long long>(x);
  }
  if (step > 0) x = std::clamp(lo + step * std::round((x - lo) / step), lo, hi);
  return x;
}

json ParamDomain::sample(Rng& rng) const {
  switch (kind) {
    case Kind::Categorical:
      return choices[rng.below(choices.size())];
    case Kind::Int: {
      const double s = step > 0 ? step : 1.0;
      const auto n = static_cast<long long>(std::floor((hi - lo) / s + 1e-9));
      return static_cast<long long>(lo + s * static_cast<double>(rng.integer(0, n)));
    }
    case Kind::Float: {
      double x = log ? std::exp(rng.uniform(std::log(lo), std::log(hi))) : rng.uniform(lo, hi);
      if (step > 0) return snap(x);
      return std::clamp(x, lo, hi);
    }
  }
  return nullptr;
}

HyperParams HyperParamSpace::sample(Rng& rng) const {
  HyperParams hp = fixed;
  for (const auto& p : params) hp[p.name] = p.sample(rng);
  return hp;
}

bool HyperParamSpace::contains(const HyperParams& hp) const {
  for (const auto& p : params)
    if (!hp.contains(p.name) || !p.contains(hp.at(p.name))) return false;
  return true;
}

json HyperParamSpace::to_json() const {
  json ps = json::array();
  for (const auto& p : params) {
    json pj = {{"name", p.name}, {"kind", kind_name(p.kind)}};
    if (p.kind == Kind::Categorical) {
      pj["choices"] = p.choices;
    } else {
      pj["lo"] = p.lo;
      pj["hi"] = p.hi;
      if (p.log) pj["log"] = true;
      if (p.step > 0) pj["step"] = p.step;
    }
    ps.push_back(std::move(pj));
  }
  return {{"family", models::to_string(family)}, {"params", ps}, {"fixed", fixed}};
}

HyperParamSpace HyperParamSpace::from_json(const json& j) {
  HyperParamSpace s;
  s.family = family_from_string(j.at("family").get<std::string>());
  s.fixed = j.value("fixed", json::object());
  for (const auto& pj : j.at("params")) {
    ParamDomain p;
    p.name = pj.at("name").get<std::string>();
    const auto kind = pj.at("kind").get<std::string>();
    if (kind == "int") p.kind = Kind::Int;
    else if (kind == "float") p.kind = Kind::Float;
    else if (kind == "categorical") p.kind = Kind::Categorical;
    else throw ConfigError("unknown parameter kind '" + kind + "'");
    if (p.kind == Kind::Categorical) {
      p.choices = pj.at("choices").get<std::vector<json>>();
      if (p.choices.empty()) throw ConfigError("categorical parameter '" + p.name + "' has no choices");
    } else {
      p.lo = pj.at("lo").get<double>();
      p.hi = pj.at("hi").get<double>();
      p.log = pj.value("log", false);
      p.step = pj.value("step", 0.0);
      if (!(p.lo <= p.hi) || (p.log && p.lo <= 0))
        throw ConfigError("parameter '" + p.name + "' has an invalid range");
    }
    s.params.push_back(std::move(p));
  }
  return s;
}

HyperParamSpace paper_space(Family f) {
  HyperParamSpace s;
  s.family = f;
  switch (f) {
    case Family::DecisionTree:
      s.params = {int_param("max_depth", 1, 50), int_param("min_samples_leaf", 1, 20),
                  int_param("min_samples_split", 2, 20)};
      s.fixed = {{"max_features", "sqrt"}};
      break;
    case Family::LogisticRegression:
      s.params = {float_param("C", 0.01, 100.0, true), float_param("l1_ratio", 0.0, 1.0)};
      break;
    case Family::RandomForest:
      s.params = {int_param("n_estimators", 10, 500), int_param("max_depth", 1, 50),
                  int_param("min_samples_leaf", 1, 20), int_param("min_samples_split", 2, 20)};
      s.fixed = {{"max_features", "sqrt"}};
      break;
    case Family::GradientBoosting:
      s.params = {float_param("colsample_bytree", 0.75, 1.0),
                  int_param("early_stopping_rounds", 5, 100, 5),
                  float_param("learning_rate", 0.001, 0.1, true),
                  int_param("max_depth", 2, 15),
                  int_param("min_child_weight", 1, 20),
                  int_param("n_estimators", 100, 1500, 50),
                  float_param("reg_alpha", 0.001, 25.0, true),
                  float_param("reg_lambda", 0.001, 25.0, true),
                  float_param("subsample", 0.75, 1.0)};
      s.fixed = {{"tree_method", "hist"}};
      break;
    case Family::Mlp:
      s.params = {cat_param("batchnorm", {0, 1}),
                  float_param("dropout", 0.0, 0.5, false, 0.05),
                  int_param("hidden_dim", 100, 1500),
                  float_param("init_lr", 1e-4, 0.1, true),
                  int_param("n_layer", 2, 15),
                  float_param("weight_decay", 1e-10, 1e-6, true)};
      s.fixed = {{"activation", "elu"}, {"class_weights", 0}, {"batch_size", 128},
                 {"max_epochs", 500},   {"patience", 20}};
      break;
    case Family::Ensemble:
      throw ConfigError("the ensemble has no hyperparameter space");
  }
  return s;
}

HyperParamSpace desk_space(Family f) {
  HyperParamSpace s;
  s.family = f;
  switch (f) {
    case Family::DecisionTree:
      s.params = {int_param("max_depth", 1, 20), int_param("min_samples_leaf", 1, 20),
                  int_param("min_samples_split", 2, 20)};
      s.fixed = {{"max_features", "sqrt"}};
      break;
    case Family::LogisticRegression:
      s.params = {float_param("C", 0.01, 100.0, true), float_param("l1_ratio", 0.0, 1.0)};
      s.fixed = {{"max_epochs", 100}, {"tol", 1e-4}};
      break;
    case Family::RandomForest:
      s.params = {int_param("n_estimators", 10, 60), int_param("max_depth", 2, 12),
                  int_param("min_samples_leaf", 1, 20), int_param("min_samples_split", 2, 20)};
      s.fixed = {{"max_features", "sqrt"}};
      break;
    case Family::GradientBoosting:
      s.params = {float_param("colsample_bytree", 0.75, 1.0),
                  int_param("early_stopping_rounds", 5, 30, 5),
                  float_param("learning_rate", 0.02, 0.3, true),
                  int_param("max_depth", 2, 5),
                  int_param("min_child_weight", 1, 20),
                  int_param("n_estimators", 20, 150, 10),
                  float_param("reg_alpha", 0.001, 10.0, true),
                  float_param("reg_lambda", 0.001, 10.0, true),
                  float_param("subsample", 0.75, 1.0)};
      s.fixed = {{"tree_method", "hist"}};
      break;
    case Family::Mlp:
      s.params = {cat_param("batchnorm", {0, 1}),
                  float_param("dropout", 0.0, 0.5, false, 0.05),
                  int_param("hidden_dim", 8, 64),
                  float_param("init_lr", 1e-3, 3e-2, true),
                  int_param("n_layer", 1, 3),
                  float_param("weight_decay", 1e-10, 1e-6, true)};
      s.fixed = {{"activation", "elu"}, {"class_weights", 0}, {"batch_size", 128},
                 {"max_epochs", 40},    {"patience", 5}};
      break;
    case Family::Ensemble:
      throw ConfigError("the ensemble has no hyperparameter space");
  }
  return s;
}

HyperParams paper_best_config(Family f) {
  switch (f) {
    case Family::DecisionTree:
      return {{"max_depth", 7}, {"max_features", "sqrt"}, {"min_samples_leaf", 18}, {"min_samples_split", 15}};
    case Family::LogisticRegression:
      return {{"C", 0.07085}, {"l1_ratio", 0.88392}};
    case Family::RandomForest:
      return {{"n_estimators", 446}, {"max_depth", 7}, {"max_features", "sqrt"},
              {"min_samples_leaf", 18}, {"min_samples_split", 15}};
    case Family::GradientBoosting:
      return {{"colsample_bytree", 0.80955}, {"early_stopping_rounds", 75}, {"learning_rate", 0.01551},
              {"max_depth", 3}, {"min_child_weight", 4}, {"n_estimators", 1300}, {"reg_alpha", 0.01442},
              {"reg_lambda", 2.46270}, {"subsample", 0.99142}, {"tree_method", "hist"}};
    case Family::Mlp:
      return {{"activation", "elu"}, {"batchnorm", 1}, {"class_weights", 0}, {"dropout", 0.35},
              {"hidden_dim", 1121}, {"init_lr", 0.00012}, {"n_layer", 3}, {"weight_decay", 1e-10},
              {"batch_size", 128}, {"max_epochs", 500}, {"patience", 20}};
    case Family::Ensemble:
      break;
  }
  throw ConfigError("the ensemble has no hyperparameters");
}

}  // namespace kdisc::models
