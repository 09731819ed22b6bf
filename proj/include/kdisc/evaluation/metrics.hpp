#pragma once

#include <span>

#include "kdisc/core/matrix.hpp"

namespace kdisc::evaluation {

/// Positive class = transplanted (label 1).
struct ConfusionCounts {
  long long tp = 0;
  long long tn = 0;
  long long fp = 0;
  long long fn = 0;

  long long total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// p >= threshold predicts the positive class. Throws DataError on empty or
/// mismatched input and on probabilities outside [0, 1].
ConfusionCounts confusion(const Labels& y, std::span<const double> p, double threshold = 0.5);

/// 2TP / (2TP + FP + FN); 0 when the denominator is 0.
double f1(const ConfusionCounts& c);
/// Matthews correlation; 0 when any confusion marginal is 0.
double mcc(const ConfusionCounts& c);
/// (MCC + 1) / 2.
double normed_mcc(const ConfusionCounts& c);

/// Rank (Mann-Whitney) AUC with average ranks for ties. Throws DataError
/// unless both classes are present.
double auc(const Labels& y, std::span<const double> scores);

struct MetricSet {
  double f1 = 0.0;
  double auc = 0.0;
  double normed_mcc = 0.0;
};

MetricSet evaluate_predictions(const Labels& y, std::span<const double> p);

}  // namespace kdisc::evaluation
