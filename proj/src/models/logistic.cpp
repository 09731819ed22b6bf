#include "kdisc/models/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kdisc/core/error.hpp"
#include "kdisc/core/rng.hpp"

namespace kdisc::models {

using nlohmann::json;

namespace {

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

double log1pexp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

LogisticRegression::LogisticRegression(HyperParams hp, std::uint64_t seed)
    : Classifier(std::move(hp), seed) {
  const double C = hp_number(hp_, "C", 1.0);
  const double l1 = hp_number(hp_, "l1_ratio", 0.5);
  if (!(C > 0.0) || !std::isfinite(C)) throw ConfigError("C must be positive and finite");
  if (!(l1 >= 0.0 && l1 <= 1.0)) throw ConfigError("l1_ratio must lie in [0, 1]");
}

double LogisticRegression::raw_score_one(std::span<const double> x) const {
  double z = b_;
  for (std::size_t j = 0; j < w_.size(); ++j) z += w_[j] * x[j];
  return z;
}

double LogisticRegression::objective(const Matrix& X, const Labels& y) const {
  const double n = static_cast<double>(X.rows());
  const double C = hp_number(hp_, "C", 1.0);
  const double l1 = hp_number(hp_, "l1_ratio", 0.5);
  double loss = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double z = raw_score_one(X.row(i));
    loss += y[i] ? log1pexp(-z) : log1pexp(z);
  }
  double n1 = 0.0, n2 = 0.0;
  for (double v : w_) {
    n1 += std::abs(v);
    n2 += v * v;
  }
  return loss / n + (l1 * n1 + (1.0 - l1) * 0.5 * n2) / (C * n);
}

void LogisticRegression::fit(const TrainSet& d) {
  if (!d.X || !d.y || d.X->rows() == 0 || d.X->rows() != d.y->size())
    throw ConfigError("training data is empty or labels do not match rows");
  const Matrix& X = *d.X;
  const Labels& y = *d.y;
  const std::size_t n = X.rows(), p = X.cols();
  const double C = hp_number(hp_, "C", 1.0);
  const double l1 = hp_number(hp_, "l1_ratio", 0.5);
  const double tol = hp_number(hp_, "tol", 1e-6);
  const int max_epochs = static_cast<int>(hp_int(hp_, "max_epochs", 200));
  const double nn = static_cast<double>(n);
  const double alpha = (1.0 - l1) / (C * nn);  // L2 strength per sample
  const double beta = l1 / (C * nn);           // L1 strength per sample

  double max_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 1.0;  // intercept column
    for (double v : X.row(i)) s += v * v;
    max_sq = std::max(max_sq, s);
  }
  const double lipschitz = 0.25 * max_sq + alpha;
  const double step = 1.0 / (3.0 * lipschitz);

  w_.assign(p, 0.0);
  b_ = 0.0;
  std::vector<double> memory(n, 0.0);  // last scalar gradient per sample
  std::vector<double> avg(p, 0.0);     // mean of memory_i * x_i
  double avg_b = 0.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed_, 0x5a6a);
  std::vector<double> prev(p + 1);

  converged_ = false;
  epochs_ = 0;
  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    std::copy(w_.begin(), w_.end(), prev.begin());
    prev[p] = b_;
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      const auto x = X.row(i);
      double z = b_;
      for (std::size_t j = 0; j < p; ++j) z += w_[j] * x[j];
      const double g = sigmoid(z) - static_cast<double>(y[i]);
      const double delta = g - memory[i];
      memory[i] = g;
      for (std::size_t j = 0; j < p; ++j) {
        const double grad = delta * x[j] + avg[j] + alpha * w_[j];
        w_[j] = soft_threshold(w_[j] - step * grad, step * beta);
        avg[j] += delta * x[j] / nn;
      }
      b_ -= step * (delta + avg_b);
      avg_b += delta / nn;
    }
    ++epochs_;
    double change = std::abs(b_ - prev[p]), scale = std::abs(b_);
    for (std::size_t j = 0; j < p; ++j) {
      change = std::max(change, std::abs(w_[j] - prev[j]));
      scale = std::max(scale, std::abs(w_[j]));
    }
    if (change <= tol * std::max(scale, 1e-12) || change == 0.0) {
      converged_ = true;
      break;
    }
  }
}

json LogisticRegression::state_json() const {
  return {{"coef", w_}, {"intercept", b_}, {"epochs", epochs_}, {"converged", converged_}};
}

void LogisticRegression::load_state(const json& j) {
  w_ = j.at("coef").get<std::vector<double>>();
  b_ = j.at("intercept").get<double>();
  epochs_ = j.at("epochs").get<int>();
  converged_ = j.at("converged").get<bool>();
}

}  // namespace kdisc::models
