#include "kdisc/features/imputation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <regex>

#include "kdisc/core/error.hpp"
#include "kdisc/core/rng.hpp"

namespace kdisc::features {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Moments {
  double mean = kMissing;
  double sd = kMissing;
  std::size_t n = 0;
};

Moments observed_moments(const Matrix& x, std::size_t c) {
  Moments m;
  double sum = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r)
    if (!is_missing(x(r, c))) {
      sum += x(r, c);
      ++m.n;
    }
  if (m.n == 0) return m;
  m.mean = sum / static_cast<double>(m.n);
  double ss = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r)
    if (!is_missing(x(r, c))) ss += (x(r, c) - m.mean) * (x(r, c) - m.mean);
  m.sd = std::sqrt(ss / static_cast<double>(m.n));
  return m;
}

std::uint64_t row_key(const FeatureMatrix& m, std::size_t r) {
  return m.donor_ids.empty() ? r : fnv1a(m.donor_ids[r]);
}

RidgeModel fit_ridge(const Matrix& w, const std::vector<std::uint8_t>& observed_rows,
                     std::size_t target, double alpha) {
  RidgeModel model;
  model.target = target;
  for (std::size_t c = 0; c < w.cols(); ++c)
    if (c != target) model.predictors.push_back(c);
  const std::size_t p = model.predictors.size();

  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < w.rows(); ++r)
    if (observed_rows[r]) rows.push_back(r);
  const std::size_t n = rows.size();

  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) x(i, j) = w(rows[i], model.predictors[j]);
    y(i) = w(rows[i], target);
  }
  const Eigen::RowVectorXd xmean = x.colwise().mean();
  const double ymean = y.mean();
  x.rowwise() -= xmean;
  y.array() -= ymean;

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
  gram = gram.selfadjointView<Eigen::Lower>();
  gram.diagonal().array() += alpha;
  const Eigen::VectorXd coef = gram.ldlt().solve(x.transpose() * y);

  model.coef.assign(coef.data(), coef.data() + p);
  model.intercept = ymean - xmean.dot(coef);
  return model;
}

double predict_ridge(const RidgeModel& m, std::span<const double> row) {
  double s = m.intercept;
  for (std::size_t j = 0; j < m.predictors.size(); ++j) s += m.coef[j] * row[m.predictors[j]];
  return s;
}

}  // namespace

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::None: return "none";
    case Strategy::LogicalDefault: return "logical-default";
    case Strategy::MissingAsCategory: return "missing-as-category";
    case Strategy::ConfigRule: return "config-rule";
    case Strategy::NormalSample95: return "normal-sample-95";
    case Strategy::Dichotomize: return "dichotomize-missingness";
    case Strategy::Iterative: return "iterative-regression";
    case Strategy::MeanFallback: return "mean-fallback";
    case Strategy::Auto: return "auto";
  }
  return "none";
}

Strategy strategy_from_string(const std::string& s) {
  static const std::map<std::string, Strategy> names{
      {"none", Strategy::None},
      {"logical-default", Strategy::LogicalDefault},
      {"missing-as-category", Strategy::MissingAsCategory},
      {"config-rule", Strategy::ConfigRule},
      {"normal-sample-95", Strategy::NormalSample95},
      {"dichotomize-missingness", Strategy::Dichotomize},
      {"dichotomize", Strategy::Dichotomize},
      {"iterative-regression", Strategy::Iterative},
      {"iterative", Strategy::Iterative},
      {"mean-fallback", Strategy::MeanFallback},
      {"auto", Strategy::Auto},
  };
  auto it = names.find(s);
  if (it == names.end()) throw ConfigError("unknown imputation strategy '" + s + "'");
  return it->second;
}

const StrategyRule* StrategyConfig::match(const std::string& name) const {
  for (const auto& r : rules)
    if (std::regex_search(name, std::regex(r.pattern))) return &r;
  return nullptr;
}

StrategyConfig StrategyConfig::from_json(const json& j) {
  StrategyConfig c;
  c.dichotomize_threshold = j.value("dichotomize_threshold", c.dichotomize_threshold);
  c.max_rounds = j.value("max_rounds", c.max_rounds);
  c.tolerance = j.value("tolerance", c.tolerance);
  c.ridge_alpha = j.value("ridge_alpha", c.ridge_alpha);
  c.normal_sample_per_split = j.value("normal_sample_per_split", c.normal_sample_per_split);
  for (const auto& r : j.value("rules", json::array())) {
    StrategyRule rule;
    rule.pattern = r.at("pattern").get<std::string>();
    try {
      std::regex probe(rule.pattern);
    } catch (const std::regex_error&) {
      throw ConfigError("invalid strategy pattern '" + rule.pattern + "'");
    }
    rule.strategy = strategy_from_string(r.at("strategy").get<std::string>());
    rule.value = r.value("value", r.value("fallback", 0.0));
    rule.source = r.value("source", std::string{});
    for (const auto& t : r.value("rules", json::array()))
      rule.rules.push_back({t.at("regex").get<std::string>(), t.at("value").get<double>()});
    c.rules.push_back(std::move(rule));
  }
  return c;
}

json StrategyConfig::to_json() const {
  json rules_j = json::array();
  for (const auto& r : rules) {
    json e{{"pattern", r.pattern}, {"strategy", to_string(r.strategy)}, {"value", r.value}};
    if (!r.source.empty()) e["source"] = r.source;
    if (!r.rules.empty()) {
      json t = json::array();
      for (const auto& tr : r.rules) t.push_back({{"regex", tr.regex}, {"value", tr.value}});
      e["rules"] = t;
    }
    rules_j.push_back(e);
  }
  return {{"rules", rules_j},
          {"dichotomize_threshold", dichotomize_threshold},
          {"max_rounds", max_rounds},
          {"tolerance", tolerance},
          {"ridge_alpha", ridge_alpha},
          {"normal_sample_per_split", normal_sample_per_split}};
}

double sample_central_normal(double mean, double sd, std::uint64_t seed, std::uint64_t a,
                             std::uint64_t b) {
  Rng rng(seed, a, b);
  const double lo = mean - kCentral95 * sd;
  const double hi = mean + kCentral95 * sd;
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal(mean, sd);
    if (v >= lo && v <= hi) return v;
  }
  return std::clamp(rng.normal(mean, sd), lo, hi);
}

std::vector<std::string> ImputationPlan::output_features() const {
  std::vector<std::string> out = input_features;
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c].strategy == Strategy::Dichotomize) out[c] += "__missing";
  return out;
}

std::vector<FeatureType> ImputationPlan::output_types() const {
  std::vector<FeatureType> out = input_types;
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c].strategy == Strategy::Dichotomize) out[c] = FeatureType::Binary;
  return out;
}

namespace {

// Non-iterative strategies plus the initial fill of iterative columns,
// applied in place. Normal-sample draws use the moments of `source` itself
// when the plan is per-split.
void apply_simple(const ImputationPlan& plan, const FeatureMatrix& source, Matrix& w) {
  for (std::size_t c = 0; c < plan.columns.size(); ++c) {
    const auto& col = plan.columns[c];
    switch (col.strategy) {
      case Strategy::LogicalDefault:
      case Strategy::ConfigRule:
        for (std::size_t r = 0; r < w.rows(); ++r)
          if (is_missing(w(r, c))) w(r, c) = col.value;
        break;
      case Strategy::NormalSample95: {
        double mean = col.mean, sd = col.sd;
        if (plan.normal_sample_per_split) {
          const Moments m = observed_moments(source.values, c);
          if (m.n > 0) {
            mean = m.mean;
            sd = m.sd;
          }
        }
        for (std::size_t r = 0; r < w.rows(); ++r)
          if (is_missing(w(r, c)))
            w(r, c) = sample_central_normal(mean, sd, plan.seed, c, row_key(source, r));
        break;
      }
      case Strategy::Dichotomize:
        for (std::size_t r = 0; r < w.rows(); ++r) w(r, c) = is_missing(w(r, c)) ? 1.0 : 0.0;
        break;
      case Strategy::None:
      case Strategy::MeanFallback:
        for (std::size_t r = 0; r < w.rows(); ++r)
          if (is_missing(w(r, c))) w(r, c) = col.mean;
        break;
      case Strategy::Iterative:
        for (std::size_t r = 0; r < w.rows(); ++r)
          if (is_missing(w(r, c))) w(r, c) = col.mean;  // initial fill
        break;
      case Strategy::MissingAsCategory:
      case Strategy::Auto:
        break;
    }
  }
}

}  // namespace

ImputationPlan fit_imputation_plan(const FeatureMatrix& train, const StrategyConfig& config,
                                   std::uint64_t seed) {
  const Matrix& x = train.values;
  ImputationPlan plan;
  plan.input_features = train.feature_names;
  plan.input_types = train.feature_types;
  plan.seed = seed;
  plan.normal_sample_per_split = config.normal_sample_per_split;
  plan.columns.resize(x.cols());

  for (std::size_t c = 0; c < x.cols(); ++c) {
    auto& col = plan.columns[c];
    const Moments m = observed_moments(x, c);
    col.mean = m.n > 0 ? m.mean : 0.0;
    col.sd = m.n > 0 ? m.sd : 0.0;
    col.missing_fraction =
        x.rows() ? 1.0 - static_cast<double>(m.n) / static_cast<double>(x.rows()) : 0.0;
    if (m.n == x.rows()) {
      col.strategy = Strategy::MeanFallback;
      col.value = col.mean;
      continue;
    }
    const StrategyRule* rule = config.match(train.feature_names[c]);
    if (!rule)
      throw PlanError("feature '" + train.feature_names[c] +
                      "' has missing values but no imputation strategy");
    col.strategy = rule->strategy;
    col.value = rule->value;
    if (col.strategy == Strategy::MissingAsCategory)
      throw PlanError("feature '" + train.feature_names[c] +
                      "': missing-as-category applies to categorical variables only");
    if (col.strategy == Strategy::Auto)
      col.strategy = col.missing_fraction > config.dichotomize_threshold ? Strategy::Dichotomize
                                                                         : Strategy::Iterative;
    if (col.strategy == Strategy::Iterative) plan.iterative_order.push_back(c);
  }
  std::stable_sort(plan.iterative_order.begin(), plan.iterative_order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return plan.columns[a].missing_fraction < plan.columns[b].missing_fraction;
                   });

  Matrix w = x;
  apply_simple(plan, train, w);
  if (plan.iterative_order.empty()) return plan;

  std::vector<std::vector<std::uint8_t>> observed(x.cols());
  for (std::size_t c : plan.iterative_order) {
    observed[c].resize(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) observed[c][r] = is_missing(x(r, c)) ? 0 : 1;
  }
  double scale = 0.0;
  for (std::size_t i = 0; i < x.data().size(); ++i)
    if (!is_missing(x.data()[i])) scale = std::max(scale, std::abs(x.data()[i]));
  const double normalized_tol = config.tolerance * scale;

  plan.converged = false;
  for (int round = 0; round < config.max_rounds; ++round) {
    const Matrix before = w;
    std::vector<RidgeModel> models;
    for (std::size_t c : plan.iterative_order) {
      RidgeModel model = fit_ridge(w, observed[c], c, config.ridge_alpha);
      for (std::size_t r = 0; r < w.rows(); ++r)
        if (!observed[c][r]) w(r, c) = predict_ridge(model, w.row(r));
      models.push_back(std::move(model));
    }
    plan.rounds.push_back(std::move(models));
    double change = 0.0;
    for (std::size_t i = 0; i < w.data().size(); ++i)
      change = std::max(change, std::abs(w.data()[i] - before.data()[i]));
    plan.last_change = change;
    if (change < normalized_tol) {
      plan.converged = true;
      break;
    }
  }
  if (!plan.converged)
    plan.warnings.push_back("iterative imputation did not converge in " +
                            std::to_string(config.max_rounds) + " rounds (last change " +
                            std::to_string(plan.last_change) + ")");
  return plan;
}

FeatureMatrix impute(const ImputationPlan& plan, const FeatureMatrix& m) {
  if (m.feature_names != plan.input_features)
    throw PlanError("matrix columns do not match the imputation plan");
  FeatureMatrix out = m;
  Matrix& w = out.values;
  apply_simple(plan, m, w);
  for (const auto& round : plan.rounds)
    for (const auto& model : round)
      for (std::size_t r = 0; r < w.rows(); ++r)
        if (is_missing(m.values(r, model.target))) w(r, model.target) = predict_ridge(model, w.row(r));
  out.feature_names = plan.output_features();
  out.feature_types = plan.output_types();
  return out;
}

json ImputationPlan::to_json() const {
  json cols = json::array();
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const auto& col = columns[c];
    cols.push_back({{"feature", input_features[c]},
                    {"type", kdisc::to_string(input_types[c])},
                    {"strategy", to_string(col.strategy)},
                    {"value", col.value},
                    {"mean", col.mean},
                    {"sd", col.sd},
                    {"missing_fraction", col.missing_fraction}});
  }
  json rounds_j = json::array();
  for (const auto& round : rounds) {
    json rj = json::array();
    for (const auto& m : round)
      rj.push_back({{"target", m.target}, {"intercept", m.intercept}, {"coef", m.coef}});
    rounds_j.push_back(rj);
  }
  return {{"columns", cols},           {"iterative_order", iterative_order},
          {"rounds", rounds_j},        {"converged", converged},
          {"last_change", last_change}, {"seed", seed},
          {"normal_sample_per_split", normal_sample_per_split}, {"warnings", warnings}};
}

ImputationPlan ImputationPlan::from_json(const json& j) {
  ImputationPlan p;
  for (const auto& c : j.at("columns")) {
    p.input_features.push_back(c.at("feature").get<std::string>());
    p.input_types.push_back(feature_type_from_string(c.at("type").get<std::string>()));
    ColumnImputation col;
    col.strategy = strategy_from_string(c.at("strategy").get<std::string>());
    col.value = c.at("value").get<double>();
    col.mean = c.at("mean").is_null() ? kMissing : c.at("mean").get<double>();
    col.sd = c.at("sd").is_null() ? kMissing : c.at("sd").get<double>();
    col.missing_fraction = c.at("missing_fraction").get<double>();
    p.columns.push_back(col);
  }
  p.iterative_order = j.at("iterative_order").get<std::vector<std::size_t>>();
  for (const auto& rj : j.at("rounds")) {
    std::vector<RidgeModel> round;
    for (const auto& mj : rj) {
      RidgeModel m;
      m.target = mj.at("target").get<std::size_t>();
      m.intercept = mj.at("intercept").get<double>();
      m.coef = mj.at("coef").get<std::vector<double>>();
      for (std::size_t c = 0; c < p.input_features.size(); ++c)
        if (c != m.target) m.predictors.push_back(c);
      round.push_back(std::move(m));
    }
    p.rounds.push_back(std::move(round));
  }
  p.converged = j.at("converged").get<bool>();
  p.last_change = j.at("last_change").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.normal_sample_per_split = j.at("normal_sample_per_split").get<bool>();
  p.warnings = j.at("warnings").get<std::vector<std::string>>();
  return p;
}

std::vector<std::string> drop_redundant_constant(FeatureMatrix& m) {
  const std::size_t p = m.cols();
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return m.feature_names[a] < m.feature_names[b]; });

  std::vector<bool> drop(p, false);
  std::map<std::uint64_t, std::vector<std::size_t>> buckets;
  for (std::size_t c : order) {
    const auto col = m.values.column(c);
    bool constant = true;
    for (double v : col) constant = constant && (v == col[0] || (is_missing(v) && is_missing(col[0])));
    if (constant) {
      drop[c] = true;
      continue;
    }
    std::string_view bytes(reinterpret_cast<const char*>(col.data()), col.size() * sizeof(double));
    auto& bucket = buckets[fnv1a(bytes)];
    bool dup = false;
    for (std::size_t kept : bucket) {
      const auto other = m.values.column(kept);
      if (std::memcmp(other.data(), col.data(), col.size() * sizeof(double)) == 0) {
        dup = true;
        break;
      }
    }
    if (dup) {
      drop[c] = true;
    } else {
      bucket.push_back(c);
    }
  }
  std::vector<std::size_t> keep;
  std::vector<std::string> dropped;
  for (std::size_t c = 0; c < p; ++c) {
    if (drop[c]) {
      dropped.push_back(m.feature_names[c]);
    } else {
      keep.push_back(c);
    }
  }
  std::sort(dropped.begin(), dropped.end());
  m = m.select_features(std::span<const std::size_t>(keep));
  return dropped;
}

}  // namespace kdisc::features
