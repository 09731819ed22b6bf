#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace kdisc::evaluation {

struct AnovaResult {
  double F = 0.0;
  double p = 1.0;
  double ss_between = 0.0;
  double ss_within = 0.0;
  double df_between = 0.0;
  double df_within = 0.0;
  double ms_within = 0.0;
};

/// Classic one-way ANOVA. Needs at least two groups of at least two samples
/// (DataError otherwise). Zero within-group variance: equal means give
/// F = 0, p = 1; different means give the largest finite F and p = 0.
AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups);

/// CDF of the studentized range of k means with df error degrees of
/// freedom (df = infinity allowed), by adaptive Gauss-Kronrod quadrature
/// over the normal range density and the chi scale. Absolute accuracy is
/// about 1e-8 over the range used here.
double studentized_range_cdf(double q, int k, double df);

struct TukeyPair {
  std::size_t i = 0;
  std::size_t j = 0;
  double mean_diff = 0.0;  ///< mean_i - mean_j
  double q = 0.0;
  double p_adj = 1.0;
  bool significant = false;
};

struct TukeyTable {
  std::vector<std::string> names;
  std::vector<TukeyPair> pairs;  ///< i < j, lexicographic
  double alpha = 0.05;
  double ms_within = 0.0;
  double df_within = 0.0;

  /// Symmetric matrix of adjusted p-values with ones on the diagonal.
  std::vector<std::vector<double>> p_matrix() const;
  nlohmann::json to_json() const;
};

/// Tukey HSD (Tukey-Kramer for unequal sizes):
///   q = |mean_i - mean_j| / sqrt(MS_within / 2 * (1/n_i + 1/n_j)).
TukeyTable tukey_hsd(const std::vector<std::vector<double>>& groups,
                     std::vector<std::string> names = {}, double alpha = 0.05);

}  // namespace kdisc::evaluation
