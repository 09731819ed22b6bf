#include "kdisc/models/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kdisc/core/error.hpp"
#include "kdisc/core/rng.hpp"

namespace kdisc::models {

using nlohmann::json;

double gini(double pos, double total) {
  if (total <= 0.0) return 0.0;
  const double p = pos / total;
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

double CartTree::predict(std::span<const double> x) const {
  int n = 0;
  while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
    const auto& node = nodes[static_cast<std::size_t>(n)];
    n = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(n)].value;
}

int CartTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  // Children always follow their parent in the node array.
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

json CartTree::to_json() const {
  std::vector<int> feature, left, right;
  std::vector<double> threshold, value, weight;
  for (const auto& n : nodes) {
    feature.push_back(n.feature);
    left.push_back(n.left);
    right.push_back(n.right);
    threshold.push_back(n.threshold);
    value.push_back(n.value);
    weight.push_back(n.weight);
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left},
          {"right", right},     {"value", value},         {"weight", weight}};
}

CartTree CartTree::from_json(const json& j) {
  CartTree t;
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto value = j.at("value").get<std::vector<double>>();
  const auto weight = j.at("weight").get<std::vector<double>>();
  t.nodes.resize(feature.size());
  for (std::size_t i = 0; i < feature.size(); ++i)
    t.nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i], weight[i]};
  return t;
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double improvement = 0.0;
};

struct Grower {
  const Matrix& X;
  const Labels& y;
  std::span<const double> w;
  const CartParams& params;
  std::uint64_t seed;
  CartTree tree;
  std::vector<std::size_t> features;
  std::vector<std::pair<double, std::size_t>> order;  // scratch

  Split best_split(const std::vector<std::size_t>& rows, double total, double pos,
                   std::uint64_t key) {
    Split best;
    const double parent = gini(pos, total);
    Rng rng(seed, key);
    std::iota(features.begin(), features.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(features));
    const std::size_t tried =
        params.max_features == 0 ? features.size() : std::min(params.max_features, features.size());
    for (std::size_t fi = 0; fi < tried; ++fi) {
      const std::size_t f = features[fi];
      order.clear();
      for (std::size_t r : rows) order.emplace_back(X(r, f), r);
      std::sort(order.begin(), order.end());
      double lw = 0.0, lp = 0.0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const std::size_t r = order[i].second;
        lw += w[r];
        lp += w[r] * y[r];
        const double x0 = order[i].first, x1 = order[i + 1].first;
        if (!(x0 < x1)) continue;
        const double rw = total - lw;
        if (lw < params.min_samples_leaf || rw < params.min_samples_leaf) continue;
        const double child = (lw * gini(lp, lw) + rw * gini(pos - lp, rw)) / total;
        const double improvement = parent - child;
        if (improvement > best.improvement + 1e-15) {
          double thr = x0 + (x1 - x0) / 2.0;
          if (!(thr < x1)) thr = x0;
          best = {static_cast<int>(f), thr, improvement};
        }
      }
    }
    return best;
  }

  int grow(std::vector<std::size_t> rows, int depth, std::uint64_t key) {
    double total = 0.0, pos = 0.0;
    for (std::size_t r : rows) {
      total += w[r];
      pos += w[r] * y[r];
    }
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({-1, 0.0, -1, -1, total > 0.0 ? pos / total : 0.5, total});
    const bool depth_left = params.max_depth <= 0 || depth < params.max_depth;
    const bool pure = pos <= 0.0 || pos >= total;
    if (!depth_left || pure || total < params.min_samples_split) return id;
    const Split s = best_split(rows, total, pos, key);
    if (s.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows)
      (X(r, static_cast<std::size_t>(s.feature)) <= s.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1, mix64(key * 2 + 1));
    const int rgt = grow(std::move(right), depth + 1, mix64(key * 2 + 2));
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = s.feature;
    node.threshold = s.threshold;
    node.left = l;
    node.right = rgt;
    return id;
  }
};

void validate_tree_hp(const HyperParams& hp) {
  if (hp_number(hp, "min_samples_split", 2) < 2)
    throw ConfigError("min_samples_split must be at least 2");
  if (hp_number(hp, "min_samples_leaf", 1) < 1)
    throw ConfigError("min_samples_leaf must be at least 1");
  if (hp_int(hp, "max_depth", 0) < 0) throw ConfigError("max_depth must be non-negative");
}

CartParams cart_params(const HyperParams& hp, std::size_t p) {
  CartParams c;
  c.max_depth = static_cast<int>(hp_int(hp, "max_depth", 0));
  c.min_samples_leaf = hp_number(hp, "min_samples_leaf", 1);
  c.min_samples_split = hp_number(hp, "min_samples_split", 2);
  c.max_features = resolve_max_features(hp, p);
  return c;
}

void check_train(const TrainSet& d) {
  if (!d.X || !d.y || d.X->rows() == 0 || d.X->rows() != d.y->size())
    throw ConfigError("training data is empty or labels do not match rows");
}

}  // namespace

CartTree grow_cart(const Matrix& X, const Labels& y, std::span<const double> weights,
                   const CartParams& params, std::uint64_t seed) {
  Grower g{X, y, weights, params, seed, {}, {}, {}};
  g.features.resize(X.cols());
  std::iota(g.features.begin(), g.features.end(), std::size_t{0});
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < X.rows(); ++r)
    if (weights[r] > 0.0) rows.push_back(r);
  g.grow(std::move(rows), 0, 1);
  return std::move(g.tree);
}

std::size_t resolve_max_features(const HyperParams& hp, std::size_t p) {
  if (!hp.contains("max_features") || hp.at("max_features").is_null()) return p;
  const auto& v = hp.at("max_features");
  if (v.is_number()) {
    const auto k = v.get<double>();
    if (k < 1) throw ConfigError("max_features must be at least 1");
    return std::min(p, static_cast<std::size_t>(k));
  }
  const auto s = v.get<std::string>();
  if (s == "sqrt") return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(p))));
  if (s == "all" || s == "none") return p;
  throw ConfigError("unknown max_features '" + s + "'");
}

DecisionTree::DecisionTree(HyperParams hp, std::uint64_t seed) : Classifier(std::move(hp), seed) {
  validate_tree_hp(hp_);
}

void DecisionTree::fit(const TrainSet& d) {
  check_train(d);
  std::vector<double> w(d.X->rows(), 1.0);
  tree_ = grow_cart(*d.X, *d.y, w, cart_params(hp_, d.X->cols()), seed_);
}

double DecisionTree::raw_score_one(std::span<const double> x) const {
  return clamped_logit(tree_.predict(x));
}

RandomForest::RandomForest(HyperParams hp, std::uint64_t seed) : Classifier(std::move(hp), seed) {
  validate_tree_hp(hp_);
  if (hp_int(hp_, "n_estimators", 100) < 1) throw ConfigError("n_estimators must be at least 1");
}

std::uint64_t RandomForest::tree_seed(std::size_t t) const { return stream_seed(seed_, 0x72ee, t); }

void RandomForest::fit(const TrainSet& d, Exec exec) {
  check_train(d);
  const auto n_trees = static_cast<std::size_t>(hp_int(hp_, "n_estimators", 100));
  const bool bootstrap = hp_.value("bootstrap", true);
  HyperParams hp = hp_;
  if (!hp.contains("max_features")) hp["max_features"] = "sqrt";
  const CartParams params = cart_params(hp, d.X->cols());
  trees_.assign(n_trees, {});
  const std::size_t n = d.X->rows();
  auto grow_one = [&](std::size_t t) {
    const std::uint64_t s = tree_seed(t);
    std::vector<double> w(n, bootstrap ? 0.0 : 1.0);
    if (bootstrap) {
      Rng rng(s, 0xb007);
      for (std::size_t i = 0; i < n; ++i) w[rng.below(n)] += 1.0;
    }
    trees_[t] = grow_cart(*d.X, *d.y, w, params, s);
  };
  const auto count = static_cast<long long>(n_trees);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long long t = 0; t < count; ++t) grow_one(static_cast<std::size_t>(t));
  } else {
    for (long long t = 0; t < count; ++t) grow_one(static_cast<std::size_t>(t));
  }
}

double RandomForest::predict_one(std::span<const double> x) const {
  double s = 0.0;
  for (const auto& t : trees_) s += t.predict(x);
  return s / static_cast<double>(trees_.size());
}

double RandomForest::raw_score_one(std::span<const double> x) const {
  return clamped_logit(predict_one(x));
}

json RandomForest::state_json() const {
  json trees = json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"trees", trees}};
}

void RandomForest::load_state(const json& j) {
  trees_.clear();
  for (const auto& t : j.at("trees")) trees_.push_back(CartTree::from_json(t));
}

}  // namespace kdisc::models
