#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "kdisc/core/error.hpp"
#include "kdisc/core/rng.hpp"
#include "kdisc/explainability.hpp"

namespace kdisc::explain {

namespace {

constexpr std::size_t kMaxExactFeatures = 12;

void check_inputs(std::span<const double> x, const Matrix& background) {
  if (background.rows() == 0) throw DataError("SHAP needs a non-empty background set");
  if (background.cols() != x.size())
    throw DataError("background has " + std::to_string(background.cols()) + " columns, sample has " +
                    std::to_string(x.size()));
}

double mean_of(const std::vector<double>& v, std::size_t from, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += v[from + i];
  return s / static_cast<double>(n);
}

double model_at(const PredictFn& f, std::span<const double> x) {
  Matrix one(1, x.size());
  std::copy(x.begin(), x.end(), one.row(0).begin());
  const auto p = f(one);
  if (p.size() != 1) throw DataError("model returned the wrong number of outputs");
  return p[0];
}

double background_mean(const PredictFn& f, const Matrix& background) {
  const auto p = f(background);
  if (p.size() != background.rows()) throw DataError("model returned the wrong number of outputs");
  return mean_of(p, 0, p.size());
}

}  // namespace

double Attribution::additivity_gap() const {
  double s = 0.0;
  for (double v : phi) s += v;
  return std::abs(s - (fx - base));
}

Attribution exact_shap(const PredictFn& f, std::span<const double> x, const Matrix& background) {
  check_inputs(x, background);
  const std::size_t M = x.size();
  if (M > kMaxExactFeatures)
    throw ConfigError("exact SHAP enumerates 2^M coalitions and is limited to " +
                      std::to_string(kMaxExactFeatures) + " features (got " + std::to_string(M) +
                      "); use permutation_shap instead");
  const std::size_t B = background.rows();
  const std::size_t n_masks = std::size_t{1} << M;
  std::vector<double> v(n_masks);

  // Coalitions are evaluated in chunks to keep model calls few and memory small.
  const std::size_t chunk = std::max<std::size_t>(1, 4096 / B);
  for (std::size_t first = 0; first < n_masks; first += chunk) {
    const std::size_t last = std::min(n_masks, first + chunk);
    Matrix rows((last - first) * B, M);
    for (std::size_t mask = first; mask < last; ++mask)
      for (std::size_t b = 0; b < B; ++b) {
        auto dst = rows.row((mask - first) * B + b);
        auto src = background.row(b);
        for (std::size_t j = 0; j < M; ++j) dst[j] = (mask >> j) & 1 ? x[j] : src[j];
      }
    const auto p = f(rows);
    for (std::size_t mask = first; mask < last; ++mask) v[mask] = mean_of(p, (mask - first) * B, B);
  }

  // Shapley weight |S|! (M - |S| - 1)! / M! for coalitions not containing i.
  std::vector<double> weight(M, 0.0);
  for (std::size_t s = 0; s < M; ++s)
    weight[s] = std::exp(std::lgamma(static_cast<double>(s) + 1.0) +
                         std::lgamma(static_cast<double>(M - s)) - std::lgamma(static_cast<double>(M) + 1.0));

  Attribution a;
  a.phi.assign(M, 0.0);
  a.se.assign(M, 0.0);
  a.base = v[0];
  a.fx = v[n_masks - 1];
  for (std::size_t i = 0; i < M; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double acc = 0.0;
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
      if (mask & bit) continue;
      acc += weight[static_cast<std::size_t>(std::popcount(mask))] * (v[mask | bit] - v[mask]);
    }
    a.phi[i] = acc;
  }
  a.max_pass_residual = a.additivity_gap();
  return a;
}

Attribution permutation_shap(const PredictFn& f, std::span<const double> x, const Matrix& background,
                             std::size_t n_permutations, std::uint64_t seed) {
  if (n_permutations < 1) throw ConfigError("permutation SHAP needs at least one permutation");
  check_inputs(x, background);
  const std::size_t M = x.size();
  const std::size_t B = background.rows();

  Attribution a;
  a.phi.assign(M, 0.0);
  a.se.assign(M, 0.0);
  a.n_permutations = n_permutations;
  a.base = background_mean(f, background);
  a.fx = model_at(f, x);
  if (M == 0) return a;

  Rng rng(seed, 0x5ba9);
  std::vector<std::size_t> order(M);
  std::vector<double> sum(M, 0.0), sum_sq(M, 0.0), est(M);
  std::vector<char> on(M);
  const std::size_t interior = M - 1;
  Matrix rows(2 * interior * B, M);

  for (std::size_t p = 0; p < n_permutations; ++p) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));

    // Forward coalitions add order[0..k-1]; backward ones remove them.
    for (int dir = 0; dir < 2; ++dir) {
      std::fill(on.begin(), on.end(), dir == 0 ? 0 : 1);
      for (std::size_t k = 1; k <= interior; ++k) {
        on[order[k - 1]] = dir == 0 ? 1 : 0;
        const std::size_t base_row = (dir * interior + (k - 1)) * B;
        for (std::size_t b = 0; b < B; ++b) {
          auto dst = rows.row(base_row + b);
          auto src = background.row(b);
          for (std::size_t j = 0; j < M; ++j) dst[j] = on[j] ? x[j] : src[j];
        }
      }
    }
    const auto out = interior > 0 ? f(rows) : std::vector<double>{};

    std::fill(est.begin(), est.end(), 0.0);
    for (int dir = 0; dir < 2; ++dir) {
      // v[k] is the value after k steps along this pass.
      std::vector<double> v(M + 1);
      v[0] = dir == 0 ? a.base : a.fx;
      v[M] = dir == 0 ? a.fx : a.base;
      for (std::size_t k = 1; k <= interior; ++k) v[k] = mean_of(out, (dir * interior + (k - 1)) * B, B);
      double pass_total = 0.0;
      for (std::size_t k = 0; k < M; ++k) {
        const double delta = dir == 0 ? v[k + 1] - v[k] : v[k] - v[k + 1];
        est[order[k]] += 0.5 * delta;
        pass_total += delta;
      }
      a.max_pass_residual = std::max(a.max_pass_residual, std::abs(pass_total - (a.fx - a.base)));
    }
    for (std::size_t j = 0; j < M; ++j) {
      sum[j] += est[j];
      sum_sq[j] += est[j] * est[j];
    }
  }
  const double P = static_cast<double>(n_permutations);
  for (std::size_t j = 0; j < M; ++j) {
    a.phi[j] = sum[j] / P;
    if (n_permutations > 1) {
      const double var = std::max(0.0, (sum_sq[j] - P * a.phi[j] * a.phi[j]) / (P - 1.0));
      a.se[j] = std::sqrt(var / P);
    }
  }
  return a;
}

Matrix select_background(const Matrix& X, std::size_t max_rows, std::uint64_t seed) {
  if (X.rows() <= max_rows) return X;
  std::vector<std::size_t> idx(X.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed, 0xb6);
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(max_rows);
  std::sort(idx.begin(), idx.end());
  return X.select_rows(idx);
}

std::vector<Attribution> explain_rows(const PredictFn& f, const Matrix& X, const Matrix& background,
                                      std::size_t n_permutations, std::uint64_t seed, Exec exec) {
  std::vector<Attribution> out(X.rows());
  const auto n = static_cast<long long>(X.rows());
  auto one = [&](long long i) {
    const auto r = static_cast<std::size_t>(i);
    out[r] = permutation_shap(f, X.row(r), background, n_permutations, stream_seed(seed, 0x5a4b, r));
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < n; ++i) one(i);
  } else {
    for (long long i = 0; i < n; ++i) one(i);
  }
  return out;
}

std::vector<std::size_t> GlobalImportance::top(std::size_t k) const {
  std::vector<std::size_t> idx(mean_abs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return mean_abs[a] > mean_abs[b]; });
  if (idx.size() > k) idx.resize(k);
  return idx;
}

GlobalImportance aggregate_global(const std::vector<Attribution>& attributions,
                                  const std::vector<std::string>& features) {
  if (attributions.empty()) throw DataError("no attributions to aggregate");
  GlobalImportance g;
  g.features = features;
  const std::size_t M = features.size();
  g.mean_abs.assign(M, 0.0);
  g.std_abs.assign(M, 0.0);
  for (const auto& a : attributions)
    if (a.phi.size() != M)
      throw DataError("attribution has " + std::to_string(a.phi.size()) + " features, schema has " +
                      std::to_string(M));
  const double n = static_cast<double>(attributions.size());
  for (const auto& a : attributions)
    for (std::size_t j = 0; j < M; ++j) g.mean_abs[j] += std::abs(a.phi[j]);
  for (auto& m : g.mean_abs) m /= n;
  for (const auto& a : attributions)
    for (std::size_t j = 0; j < M; ++j) {
      const double d = std::abs(a.phi[j]) - g.mean_abs[j];
      g.std_abs[j] += d * d;
    }
  for (auto& s : g.std_abs) s = std::sqrt(s / n);
  return g;
}

std::vector<BeeswarmRow> export_beeswarm(const std::vector<Attribution>& attributions,
                                         const Matrix& raw_values,
                                         const std::vector<std::string>& features) {
  if (raw_values.rows() != attributions.size() || raw_values.cols() != features.size())
    throw DataError("beeswarm inputs disagree on sample or feature count");
  std::vector<BeeswarmRow> rows;
  rows.reserve(attributions.size() * features.size());
  for (std::size_t i = 0; i < attributions.size(); ++i) {
    if (attributions[i].phi.size() != features.size())
      throw DataError("attribution schema does not match the feature list");
    for (std::size_t j = 0; j < features.size(); ++j)
      rows.push_back({i, features[j], attributions[i].phi[j], raw_values(i, j)});
  }
  return rows;
}

}  // namespace kdisc::explain
