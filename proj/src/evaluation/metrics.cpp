#include "kdisc/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "kdisc/core/error.hpp"

namespace kdisc::evaluation {

ConfusionCounts confusion(const Labels& y, std::span<const double> p, double threshold) {
  if (y.empty()) throw DataError("confusion counts of an empty prediction set");
  if (y.size() != p.size()) throw DataError("labels and predictions differ in length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) throw DataError("probability outside [0, 1]");
    const bool pred = p[i] >= threshold;
    if (y[i]) (pred ? c.tp : c.fn)++;
    else (pred ? c.fp : c.tn)++;
  }
  return c;
}

double f1(const ConfusionCounts& c) {
  const double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
  return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / denom;
}

double mcc(const ConfusionCounts& c) {
  const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
  const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  const double a = tp + fp, b = tp + fn, d = tn + fp, e = tn + fn;
  if (a == 0.0 || b == 0.0 || d == 0.0 || e == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(a * b * d * e);
}

double normed_mcc(const ConfusionCounts& c) { return (mcc(c) + 1.0) / 2.0; }

double auc(const Labels& y, std::span<const double> s) {
  if (y.size() != s.size()) throw DataError("labels and scores differ in length");
  std::vector<std::size_t> idx(y.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });
  double rank_sum = 0.0;
  double n_pos = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && s[idx[j + 1]] == s[idx[i]]) ++j;
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (y[idx[k]]) {
        rank_sum += avg_rank;
        n_pos += 1.0;
      }
    i = j + 1;
  }
  const double n_neg = static_cast<double>(y.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw DataError("AUC needs both classes");
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

MetricSet evaluate_predictions(const Labels& y, std::span<const double> p) {
  const auto c = confusion(y, p);
  return {f1(c), auc(y, p), normed_mcc(c)};
}

}  // namespace kdisc::evaluation
