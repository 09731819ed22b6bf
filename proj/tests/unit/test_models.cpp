#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "kdisc/core/error.hpp"
#include "kdisc/core/rng.hpp"
#include "kdisc/models.hpp"

using namespace kdisc;
using namespace kdisc::models;

namespace {

struct Data {
  Matrix X;
  Labels y;
};

Data logistic_data(std::size_t n, std::size_t p, std::uint64_t seed, bool integer_valued = false) {
  Rng r(seed);
  Data d{Matrix(n, p), Labels(n)};
  for (std::size_t i = 0; i < n; ++i) {
    double z = -0.3;
    for (std::size_t j = 0; j < p; ++j) {
      const double v = integer_valued ? static_cast<double>(r.integer(-5, 5)) : r.normal();
      d.X(i, j) = v;
      if (j < 3) z += (j % 2 ? -1.0 : 1.0) * v * (integer_valued ? 0.4 : 1.0);
    }
    d.y[i] = r.bernoulli(sigmoid(z));
  }
  return d;
}

// Best single split by exhaustive search: largest weighted Gini decrease.
double best_stump_gain(const Matrix& X, const Labels& y) {
  const double n = static_cast<double>(y.size());
  double pos = 0;
  for (int v : y) pos += v;
  const double parent = gini(pos, n);
  double best = 0;
  for (std::size_t j = 0; j < X.cols(); ++j)
    for (std::size_t t = 0; t < X.rows(); ++t) {
      const double thr = X(t, j);
      double nl = 0, pl = 0;
      for (std::size_t i = 0; i < X.rows(); ++i)
        if (X(i, j) <= thr) nl += 1, pl += y[i];
      if (nl == 0 || nl == n) continue;
      const double g = parent - (nl / n) * gini(pl, nl) - ((n - nl) / n) * gini(pos - pl, n - nl);
      best = std::max(best, g);
    }
  return best;
}

// Same structure along every path of the shallow tree.
bool is_prefix(const CartTree& a, int ia, const CartTree& b, int ib) {
  const auto& na = a.nodes[static_cast<std::size_t>(ia)];
  const auto& nb = b.nodes[static_cast<std::size_t>(ib)];
  if (na.feature < 0) return true;
  if (na.feature != nb.feature || na.threshold != nb.threshold) return false;
  return is_prefix(a, na.left, b, nb.left) && is_prefix(a, na.right, b, nb.right);
}

}  // namespace

TEST_CASE("gini impurity") {
  CHECK(gini(0, 10) == 0.0);
  CHECK(gini(10, 10) == 0.0);
  CHECK(gini(5, 10) == doctest::Approx(0.5));
  CHECK(gini(1, 4) == doctest::Approx(0.375));
}

TEST_CASE("a CART stump finds the exhaustive best split") {
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const auto d = logistic_data(60, 4, s);
    const std::vector<double> w(60, 1.0);
    CartParams p;
    p.max_depth = 1;
    const auto tree = grow_cart(d.X, d.y, w, p, s);
    REQUIRE(tree.nodes.size() == 3);
    const auto& root = tree.nodes[0];
    const auto& l = tree.nodes[static_cast<std::size_t>(root.left)];
    const auto& r = tree.nodes[static_cast<std::size_t>(root.right)];
    const double n = 60;
    double pos = 0;
    for (int v : d.y) pos += v;
    const double gain = gini(pos, n) - (l.weight / n) * gini(l.value * l.weight, l.weight) -
                        (r.weight / n) * gini(r.value * r.weight, r.weight);
    CHECK(gain == doctest::Approx(best_stump_gain(d.X, d.y)).epsilon(1e-12));
  }
}

TEST_CASE("CART fits separable data exactly and shallower trees are prefixes") {
  auto d = logistic_data(200, 5, 3);
  for (std::size_t i = 0; i < 200; ++i) d.y[i] = d.X(i, 0) + d.X(i, 1) > 0;
  const std::vector<double> w(200, 1.0);
  CartParams full;
  const auto t = grow_cart(d.X, d.y, w, full, 9);
  for (std::size_t i = 0; i < 200; ++i) CHECK(t.predict(d.X.row(i)) == d.y[i]);
  CartParams p2;
  p2.max_depth = 2;
  p2.max_features = 2;
  CartParams p5 = p2;
  p5.max_depth = 5;
  const auto a = grow_cart(d.X, d.y, w, p2, 4), b = grow_cart(d.X, d.y, w, p5, 4);
  CHECK(a.depth() <= 2);
  CHECK(is_prefix(a, 0, b, 0));
}

TEST_CASE("random forest: parallel fit equals serial fit") {
  const auto d = logistic_data(300, 6, 5);
  const HyperParams hp{{"n_estimators", 20}, {"max_depth", 5}, {"max_features", "sqrt"}};
  RandomForest a(hp, 7), b(hp, 7);
  a.fit({&d.X, &d.y, nullptr, nullptr}, Exec::Serial);
  b.fit({&d.X, &d.y, nullptr, nullptr}, Exec::Parallel);
  CHECK(a.predict_proba(d.X) == b.predict_proba(d.X));
  CHECK(a.trees().size() == 20);
}

TEST_CASE("logistic regression reaches the Newton optimum of the L2 objective") {
  const auto d = logistic_data(400, 5, 11);
  const double C = 0.5;
  const HyperParams hp{{"C", C}, {"l1_ratio", 0.0}, {"tol", 1e-10}, {"max_epochs", 3000}};
  LogisticRegression lr(hp, 1);
  lr.fit({&d.X, &d.y, nullptr, nullptr});

  // Newton's method on mean log-loss + 1/(2 C n) |w|^2, intercept free.
  const std::size_t n = d.X.rows(), p = d.X.cols();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p + 1));
  const double lam = 1.0 / (C * static_cast<double>(n));
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(theta.size(), theta.size());
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::VectorXd x(theta.size());
      for (std::size_t j = 0; j < p; ++j) x(static_cast<Eigen::Index>(j)) = d.X(i, j);
      x(static_cast<Eigen::Index>(p)) = 1.0;
      const double mu = sigmoid(x.dot(theta));
      g += (mu - d.y[i]) * x / static_cast<double>(n);
      H += mu * (1 - mu) * x * x.transpose() / static_cast<double>(n);
    }
    for (std::size_t j = 0; j < p; ++j) {
      g(static_cast<Eigen::Index>(j)) += lam * theta(static_cast<Eigen::Index>(j));
      H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += lam;
    }
    theta -= H.ldlt().solve(g);
  }
  for (std::size_t j = 0; j < p; ++j) CHECK(lr.coef()[j] == doctest::Approx(theta(static_cast<Eigen::Index>(j))).epsilon(1e-4));
  CHECK(lr.intercept() == doctest::Approx(theta(static_cast<Eigen::Index>(p))).epsilon(1e-4));
}

TEST_CASE("strong L1 zeroes the noise coefficients exactly") {
  auto d = logistic_data(500, 8, 21);
  const HyperParams hp{{"C", 0.01}, {"l1_ratio", 1.0}, {"max_epochs", 500}};
  LogisticRegression lr(hp, 2);
  lr.fit({&d.X, &d.y, nullptr, nullptr});
  std::size_t zeros = 0;
  for (std::size_t j = 3; j < 8; ++j) zeros += lr.coef()[j] == 0.0;
  CHECK(zeros == 5);
}

TEST_CASE("newton leaf weight with soft threshold") {
  CHECK(newton_leaf_weight(4, 2, 0, 0) == -2.0);
  CHECK(newton_leaf_weight(4, 2, 1, 1) == doctest::Approx(-1.0));
  CHECK(newton_leaf_weight(-4, 2, 1, 1) == doctest::Approx(1.0));
  CHECK(newton_leaf_weight(0.5, 2, 1, 1) == 0.0);
}

TEST_CASE("boosting: histogram and exact split search agree on few distinct values") {
  const auto d = logistic_data(400, 5, 31, true);
  const auto v = logistic_data(100, 5, 32, true);
  HyperParams hp{{"n_estimators", 30}, {"learning_rate", 0.1}, {"max_depth", 3}, {"min_child_weight", 1},
                 {"subsample", 1.0},   {"colsample_bytree", 1.0}, {"reg_alpha", 0.0},  {"reg_lambda", 1.0},
                 {"early_stopping_rounds", 100}};
  hp["tree_method"] = "hist";
  GradientBoosting h(hp, 3);
  h.fit({&d.X, &d.y, &v.X, &v.y});
  hp["tree_method"] = "exact";
  GradientBoosting e(hp, 3);
  e.fit({&d.X, &d.y, &v.X, &v.y});
  CHECK(h.predict_proba(v.X) == e.predict_proba(v.X));
}

TEST_CASE("boosting keeps the round count with the lowest validation loss") {
  const auto d = logistic_data(300, 5, 41);
  const auto v = logistic_data(150, 5, 42);
  const HyperParams hp{{"n_estimators", 200}, {"learning_rate", 0.3}, {"max_depth", 6}, {"min_child_weight", 1},
                       {"early_stopping_rounds", 10}, {"tree_method", "hist"}};
  GradientBoosting g(hp, 1);
  g.fit({&d.X, &d.y, &v.X, &v.y});
  const auto& curve = g.validation_curve();
  const auto best = static_cast<std::size_t>(std::min_element(curve.begin(), curve.end()) - curve.begin());
  CHECK(g.trees().size() == best);
  CHECK(curve.size() < 201);  // stopped early
  CHECK_THROWS(GradientBoosting(hp, 1).fit({&d.X, &d.y, nullptr, nullptr}));
}

TEST_CASE("MLP analytic gradient matches central finite differences") {
  Rng data_rng(5);
  const Eigen::Index n = 24, p = 4;
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n), w = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) X(i, j) = data_rng.normal();
    y(i) = data_rng.bernoulli(0.4);
    w(i) = 0.5 + data_rng.uniform();
  }
  struct Cfg {
    int layers, hidden;
    bool bn;
    double dropout;
  };
  for (const Cfg cfg : {Cfg{1, 3, false, 0.0}, Cfg{2, 5, false, 0.0}, Cfg{2, 4, true, 0.0}, Cfg{3, 6, true, 0.3},
                        Cfg{1, 8, false, 0.5}}) {
    Rng init(7);
    MlpNet net(static_cast<std::size_t>(p), cfg.layers, cfg.hidden, cfg.bn, cfg.dropout, init);
    std::vector<double> grad;
    Rng mask(99);
    net.loss(X, y, w, true, &mask, &grad);
    auto theta = net.params();
    REQUIRE(grad.size() == theta.size());
    double max_rel = 0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double h = 1e-5 * std::max(1.0, std::abs(theta[k]));
      const double keep = theta[k];
      theta[k] = keep + h;
      net.set_params(theta);
      Rng m1(99);
      const double up = net.loss(X, y, w, true, &m1, nullptr);
      theta[k] = keep - h;
      net.set_params(theta);
      Rng m2(99);
      const double dn = net.loss(X, y, w, true, &m2, nullptr);
      theta[k] = keep;
      net.set_params(theta);
      const double fd = (up - dn) / (2 * h);
      const double rel = std::abs(fd - grad[k]) / std::max(1e-6, std::abs(fd) + std::abs(grad[k]));
      max_rel = std::max(max_rel, rel);
    }
    CAPTURE(cfg.layers);
    CAPTURE(cfg.bn);
    CHECK(max_rel <= 1e-4);
  }
}

TEST_CASE("every family reloads bit for bit") {
  const auto d = logistic_data(250, 6, 51);
  const auto v = logistic_data(80, 6, 52);
  const TrainSet ts{&d.X, &d.y, &v.X, &v.y};
  for (auto f : base_families()) {
    Rng r(static_cast<std::uint64_t>(f) + 1);
    const auto hp = desk_space(f).sample(r);
    const auto m = fit_classifier(f, hp, 13, ts);
    const auto back = classifier_from_json(m->to_json());
    CHECK(back->family() == f);
    CHECK(back->predict_proba(v.X) == m->predict_proba(v.X));
    CHECK(back->raw_scores(v.X) == m->raw_scores(v.X));
    for (double p : m->predict_proba(v.X)) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }
}

TEST_CASE("spaces sample inside themselves and the reference configs are valid") {
  for (auto f : base_families()) {
    Rng r(3);
    for (int i = 0; i < 50; ++i) CHECK(desk_space(f).contains(desk_space(f).sample(r)));
    CHECK_NOTHROW(make_classifier(f, paper_best_config(f), 1));
    const auto js = paper_space(f).to_json();
    CHECK(HyperParamSpace::from_json(js).to_json() == js);
  }
  CHECK_THROWS_AS(make_classifier(Family::LogisticRegression, {{"C", -1.0}}, 1), ConfigError);
}

TEST_CASE("ensemble is the mean of member probabilities") {
  CHECK(ensemble_mean({{0.2, 0.8}, {0.4, 0.6}}) == std::vector<double>{0.30000000000000004, 0.7});
  CHECK_THROWS_AS(ensemble_mean({}), ConfigError);
  const auto d = logistic_data(200, 4, 61);
  const auto X2 = d.X.select_cols(std::vector<std::size_t>{2, 0});
  auto lr = fit_classifier(Family::LogisticRegression, {{"C", 1.0}, {"l1_ratio", 0.0}}, 1, {&X2, &d.y, nullptr, nullptr});
  auto rf = fit_classifier(Family::RandomForest, {{"n_estimators", 5}}, 1, {&d.X, &d.y, nullptr, nullptr});
  const auto p_lr = lr->predict_proba(X2);
  const auto p_rf = rf->predict_proba(d.X);
  EnsembleModel em;
  em.add(std::move(lr), {"c", "a"});
  em.add(std::move(rf), {"a", "b", "c", "d"});
  CHECK_THROWS(em.add(make_classifier(Family::DecisionTree, {{"max_depth", 2}}, 1), {"a"}));
  CHECK(em.predict_proba(d.X, {"a", "b", "c", "d"}) == ensemble_mean({p_lr, p_rf}));
  const auto back = EnsembleModel::from_json(em.to_json());
  CHECK(back.predict_proba(d.X, {"a", "b", "c", "d"}) == ensemble_mean({p_lr, p_rf}));
}
