#include "kdisc/models/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kdisc/core/error.hpp"
#include "kdisc/core/rng.hpp"

namespace kdisc::models {

using nlohmann::json;

std::uint32_t FeatureBins::bin(std::size_t feature, double v) const {
  const auto& c = cuts[feature];
  return static_cast<std::uint32_t>(std::upper_bound(c.begin(), c.end(), v) - c.begin());
}

FeatureBins fit_bins(const Matrix& X, std::size_t max_bins) {
  FeatureBins bins;
  bins.cuts.resize(X.cols());
  for (std::size_t f = 0; f < X.cols(); ++f) {
    std::vector<double> v = X.column(f);
    std::sort(v.begin(), v.end());
    std::vector<double> distinct = v;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    auto& c = bins.cuts[f];
    if (max_bins == 0 || distinct.size() <= max_bins) {
      for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
        double mid = distinct[i] + (distinct[i + 1] - distinct[i]) / 2.0;
        if (!(mid > distinct[i])) mid = distinct[i + 1];
        c.push_back(mid);
      }
    } else {
      for (std::size_t k = 1; k < max_bins; ++k) {
        const double q = v[k * v.size() / max_bins];
        if (q > v.front() && (c.empty() || q > c.back())) c.push_back(q);
      }
    }
  }
  return bins;
}

double BoostTree::predict(std::span<const double> x) const {
  int n = 0;
  while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
    const auto& node = nodes[static_cast<std::size_t>(n)];
    n = x[static_cast<std::size_t>(node.feature)] < node.threshold ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(n)].weight;
}

double newton_leaf_weight(double grad_sum, double hess_sum, double alpha, double lambda) {
  double g = grad_sum;
  if (g > alpha) g -= alpha;
  else if (g < -alpha) g += alpha;
  else g = 0.0;
  const double denom = hess_sum + lambda;
  return denom > 0.0 ? -g / denom : 0.0;
}

namespace {

double logloss(const std::vector<double>& margin, const Labels& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double z = margin[i];
    const double nll = z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
    s += y[i] ? nll : nll + z;
  }
  return s / static_cast<double>(y.size());
}

struct TreeBuilder {
  const std::vector<std::uint32_t>& binned;  // row-major n x p
  std::size_t p;
  const FeatureBins& bins;
  const std::vector<double>& g;
  const std::vector<double>& h;
  const std::vector<std::size_t>& features;
  int max_depth;
  double min_child_weight, alpha, lambda, eta;
  BoostTree tree;

  double score(double G, double H) const {
    double t = G;
    if (t > alpha) t -= alpha;
    else if (t < -alpha) t += alpha;
    else t = 0.0;
    return t * t / (H + lambda);
  }

  int build(std::vector<std::size_t> rows, int depth) {
    double G = 0.0, H = 0.0;
    for (std::size_t r : rows) {
      G += g[r];
      H += h[r];
    }
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({-1, 0.0, -1, -1, eta * newton_leaf_weight(G, H, alpha, lambda)});
    if (depth >= max_depth || rows.size() < 2) return id;

    const double parent = score(G, H);
    double best_gain = 1e-12;
    int best_f = -1;
    std::uint32_t best_k = 0;
    std::vector<double> hg, hh;
    for (std::size_t f : features) {
      const std::size_t nb = bins.cuts[f].size() + 1;
      if (nb < 2) continue;
      hg.assign(nb, 0.0);
      hh.assign(nb, 0.0);
      for (std::size_t r : rows) {
        const std::uint32_t b = binned[r * p + f];
        hg[b] += g[r];
        hh[b] += h[r];
      }
      double GL = 0.0, HL = 0.0;
      for (std::size_t k = 0; k + 1 < nb; ++k) {
        GL += hg[k];
        HL += hh[k];
        const double GR = G - GL, HR = H - HL;
        if (HL < min_child_weight || HR < min_child_weight) continue;
        const double gain = score(GL, HL) + score(GR, HR) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_k = static_cast<std::uint32_t>(k);
        }
      }
    }
    if (best_f < 0) return id;

    std::vector<std::size_t> left, right;
    const auto bf = static_cast<std::size_t>(best_f);
    for (std::size_t r : rows) (binned[r * p + bf] <= best_k ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(std::move(left), depth + 1);
    const int rr = build(std::move(right), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best_f;
    node.threshold = bins.cuts[bf][best_k];
    node.left = l;
    node.right = rr;
    return id;
  }
};

}  // namespace

GradientBoosting::GradientBoosting(HyperParams hp, std::uint64_t seed)
    : Classifier(std::move(hp), seed) {
  if (hp_int(hp_, "n_estimators", 100) < 1) throw ConfigError("n_estimators must be at least 1");
  if (hp_number(hp_, "learning_rate", 0.1) < 0) throw ConfigError("learning_rate must be non-negative");
  if (hp_int(hp_, "max_depth", 6) < 0) throw ConfigError("max_depth must be non-negative");
  const double ss = hp_number(hp_, "subsample", 1.0), cs = hp_number(hp_, "colsample_bytree", 1.0);
  if (!(ss > 0 && ss <= 1) || !(cs > 0 && cs <= 1))
    throw ConfigError("subsample and colsample_bytree must lie in (0, 1]");
  if (hp_number(hp_, "reg_alpha", 0) < 0 || hp_number(hp_, "reg_lambda", 1) < 0)
    throw ConfigError("reg_alpha and reg_lambda must be non-negative");
  if (hp_int(hp_, "early_stopping_rounds", 10) < 1)
    throw ConfigError("early_stopping_rounds must be at least 1");
  const auto method = hp_string(hp_, "tree_method", "hist");
  if (method != "hist" && method != "exact") throw ConfigError("tree_method must be hist or exact");
}

double GradientBoosting::raw_score_one(std::span<const double> x) const {
  double z = base_;
  for (const auto& t : trees_) z += t.predict(x);
  return z;
}

void GradientBoosting::fit(const TrainSet& d) {
  if (!d.X || !d.y || d.X->rows() == 0 || d.X->rows() != d.y->size())
    throw ConfigError("training data is empty or labels do not match rows");
  if (!d.X_val || !d.y_val || d.X_val->rows() == 0)
    throw ConfigError("gradient boosting needs a validation set for early stopping");
  const Matrix& X = *d.X;
  const Labels& y = *d.y;
  const std::size_t n = X.rows(), p = X.cols();
  const auto n_rounds = static_cast<std::size_t>(hp_int(hp_, "n_estimators", 100));
  const double eta = hp_number(hp_, "learning_rate", 0.1);
  const int max_depth = static_cast<int>(hp_int(hp_, "max_depth", 6));
  const double mcw = hp_number(hp_, "min_child_weight", 1.0);
  const double subsample = hp_number(hp_, "subsample", 1.0);
  const double colsample = hp_number(hp_, "colsample_bytree", 1.0);
  const double alpha = hp_number(hp_, "reg_alpha", 0.0);
  const double lambda = hp_number(hp_, "reg_lambda", 1.0);
  const auto patience = static_cast<std::size_t>(hp_int(hp_, "early_stopping_rounds", 10));
  const bool exact = hp_string(hp_, "tree_method", "hist") == "exact";

  const FeatureBins bins = fit_bins(X, exact ? 0 : 256);
  std::vector<std::uint32_t> binned(n * p);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t f = 0; f < p; ++f) binned[r * p + f] = bins.bin(f, X(r, f));

  double pos = 0.0;
  for (int v : y) pos += v;
  const double prior = std::clamp(pos / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
  base_ = std::log(prior / (1.0 - prior));

  std::vector<double> F(n, base_), Fv(d.X_val->rows(), base_);
  val_curve_ = {logloss(Fv, *d.y_val)};
  trees_.clear();
  double best_loss = val_curve_[0];
  std::size_t best_round = 0;
  std::vector<double> g(n), h(n);
  std::vector<std::size_t> all_features(p);
  std::iota(all_features.begin(), all_features.end(), std::size_t{0});
  const std::size_t n_cols = std::max<std::size_t>(1, static_cast<std::size_t>(colsample * static_cast<double>(p)));

  for (std::size_t round = 1; round <= n_rounds; ++round) {
    Rng rng(seed_, 0xb005, round);
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < n; ++r)
      if (subsample >= 1.0 || rng.uniform() < subsample) rows.push_back(r);
    if (rows.empty()) rows.push_back(rng.below(n));
    std::vector<std::size_t> features = all_features;
    if (n_cols < p) {
      rng.shuffle(std::span<std::size_t>(features));
      features.resize(n_cols);
      std::sort(features.begin(), features.end());
    }
    for (std::size_t r = 0; r < n; ++r) {
      const double pr = sigmoid(F[r]);
      g[r] = pr - y[r];
      h[r] = pr * (1.0 - pr);
    }
    TreeBuilder tb{binned, p, bins, g, h, features, max_depth, mcw, alpha, lambda, eta, {}};
    tb.build(std::move(rows), 0);
    for (std::size_t r = 0; r < n; ++r) F[r] += tb.tree.predict(X.row(r));
    for (std::size_t r = 0; r < Fv.size(); ++r) Fv[r] += tb.tree.predict(d.X_val->row(r));
    trees_.push_back(std::move(tb.tree));
    const double loss = logloss(Fv, *d.y_val);
    val_curve_.push_back(loss);
    if (loss < best_loss) {
      best_loss = loss;
      best_round = round;
    } else if (round - best_round >= patience) {
      break;
    }
  }
  trees_.resize(best_round);
}

json GradientBoosting::state_json() const {
  json trees = json::array();
  for (const auto& t : trees_) {
    std::vector<int> feature, left, right;
    std::vector<double> threshold, weight;
    for (const auto& nd : t.nodes) {
      feature.push_back(nd.feature);
      left.push_back(nd.left);
      right.push_back(nd.right);
      threshold.push_back(nd.threshold);
      weight.push_back(nd.weight);
    }
    trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left},
                     {"right", right}, {"weight", weight}});
  }
  return {{"base_score", base_}, {"trees", trees}, {"validation_curve", val_curve_}};
}

void GradientBoosting::load_state(const json& j) {
  base_ = j.at("base_score").get<double>();
  val_curve_ = j.at("validation_curve").get<std::vector<double>>();
  trees_.clear();
  for (const auto& t : j.at("trees")) {
    BoostTree tree;
    const auto feature = t.at("feature").get<std::vector<int>>();
    const auto threshold = t.at("threshold").get<std::vector<double>>();
    const auto left = t.at("left").get<std::vector<int>>();
    const auto right = t.at("right").get<std::vector<int>>();
    const auto weight = t.at("weight").get<std::vector<double>>();
    for (std::size_t i = 0; i < feature.size(); ++i)
      tree.nodes.push_back({feature[i], threshold[i], left[i], right[i], weight[i]});
    trees_.push_back(std::move(tree));
  }
}

}  // namespace kdisc::models
