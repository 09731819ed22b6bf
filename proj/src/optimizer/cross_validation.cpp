#include <numeric>

#include "kdisc/core/error.hpp"
#include "kdisc/core/rng.hpp"
#include "kdisc/evaluation/metrics.hpp"
#include "kdisc/optimizer.hpp"

namespace kdisc::optimize {

namespace {

std::vector<int> deal(const Labels& y, int k, Rng& rng) {
  std::vector<int> folds(y.size(), 0);
  std::size_t pos = 0;
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == cls) idx.push_back(i);
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t i : idx) folds[i] = static_cast<int>(pos++ % static_cast<std::size_t>(k));
  }
  return folds;
}

bool every_fold_has_both(const Labels& y, const std::vector<int>& folds, int k) {
  std::vector<int> pos(k, 0), neg(k, 0);
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? pos : neg)[folds[i]]++;
  for (int f = 0; f < k; ++f)
    if (pos[f] == 0 || neg[f] == 0) return false;
  return true;
}

// Stratified holdout of about `frac` of the rows; returns (keep, holdout).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(const Labels& y, double frac,
                                                                                 std::uint64_t seed) {
  std::vector<std::size_t> keep, hold;
  Rng rng(seed, 0x9a1);
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == cls) idx.push_back(i);
    rng.shuffle(std::span<std::size_t>(idx));
    auto n_hold = static_cast<std::size_t>(std::llround(frac * static_cast<double>(idx.size())));
    if (n_hold == 0 && idx.size() >= 2) n_hold = 1;
    for (std::size_t i = 0; i < idx.size(); ++i) (i < n_hold ? hold : keep).push_back(idx[i]);
  }
  std::sort(keep.begin(), keep.end());
  std::sort(hold.begin(), hold.end());
  return {keep, hold};
}

Labels pick(const Labels& y, const std::vector<std::size_t>& idx) {
  Labels out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(y[i]);
  return out;
}

}  // namespace

std::vector<int> stratified_folds(const Labels& y, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("cross-validation needs k >= 2 (got " + std::to_string(k) + ")");
  if (y.size() < static_cast<std::size_t>(k)) throw SplitError("fewer rows than folds");
  for (int attempt = 0; attempt < 2; ++attempt) {
    Rng rng(seed, 0xf01d, static_cast<std::uint64_t>(attempt));
    auto folds = deal(y, k, rng);
    if (every_fold_has_both(y, folds, k)) return folds;
  }
  throw SplitError("cannot build " + std::to_string(k) + " stratified folds with both classes in each");
}

FitPredict family_fit_predict(models::Family family, const models::HyperParams& hp) {
  const bool needs_val =
      family == models::Family::GradientBoosting || family == models::Family::Mlp;
  return [family, hp, needs_val](const Matrix& X, const Labels& y, const Matrix& X_test,
                                 std::uint64_t seed) {
    if (!needs_val) {
      models::TrainSet ts{&X, &y, nullptr, nullptr};
      return models::fit_classifier(family, hp, seed, ts)->predict_proba(X_test);
    }
    auto [keep, hold] = stratified_holdout(y, 0.1, seed);
    const Matrix X_fit = X.select_rows(keep), X_val = X.select_rows(hold);
    const Labels y_fit = pick(y, keep), y_val = pick(y, hold);
    models::TrainSet ts{&X_fit, &y_fit, &X_val, &y_val};
    return models::fit_classifier(family, hp, seed, ts)->predict_proba(X_test);
  };
}

std::vector<double> cross_validate(const FitPredict& fit, const Matrix& X, const Labels& y,
                                   const std::vector<int>& folds, int k, std::uint64_t seed) {
  if (folds.size() != y.size() || X.rows() != y.size()) throw DataError("fold, row and label counts differ");
  std::vector<double> scores;
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < y.size(); ++i) (folds[i] == f ? te : tr).push_back(i);
    const Matrix X_tr = X.select_rows(tr), X_te = X.select_rows(te);
    const Labels y_tr = pick(y, tr), y_te = pick(y, te);
    const auto p = fit(X_tr, y_tr, X_te, stream_seed(seed, 0xcf, static_cast<std::uint64_t>(f)));
    scores.push_back(evaluation::normed_mcc(evaluation::confusion(y_te, p)));
  }
  return scores;
}

std::vector<double> cross_validate(const FitPredict& fit, const Matrix& X, const Labels& y, int k,
                                   std::uint64_t seed) {
  return cross_validate(fit, X, y, stratified_folds(y, k, seed), k, seed);
}

SubsetEvaluation evaluate_feature_subset(const Genome& genome, const SubsetEvalConfig& cfg, const Matrix& X,
                                         const Labels& y, std::uint64_t seed) {
  if (genome.size() != X.cols())
    throw DataError("genome length " + std::to_string(genome.size()) + " differs from feature count " +
                    std::to_string(X.cols()));
  SubsetEvaluation ev;
  const auto cols = selected_indices(genome);
  ev.n_selected = cols.size();
  ev.penalty = cfg.lambda * static_cast<double>(cols.size());
  if (cols.empty()) {
    ev.loss = 1.0;
    return ev;
  }
  const Matrix Xs = X.select_cols(cols);
  const auto folds = stratified_folds(y, cfg.folds, cfg.common_folds ? cfg.fold_seed : stream_seed(seed, 0xf0));
  Rng rng(seed, 0x4a);
  double total = 0.0;
  for (int t = 0; t < cfg.inner_trials; ++t) {
    const auto hp = cfg.space.sample(rng);
    ev.hp_points.push_back(hp);
    const auto scores = cross_validate(family_fit_predict(cfg.space.family, hp), Xs, y, folds, cfg.folds,
                                       stream_seed(seed, 0x1a, static_cast<std::uint64_t>(t)));
    for (double s : scores) {
      ev.fold_scores.push_back(s);
      total += 1.0 - s;
    }
  }
  ev.loss = total / static_cast<double>(ev.fold_scores.size()) + ev.penalty;
  return ev;
}

}  // namespace kdisc::optimize
