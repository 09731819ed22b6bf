#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "kdisc/core/matrix.hpp"

namespace kdisc::calibration {

/// Mean squared difference between probabilities and 0/1 outcomes.
double brier(std::span<const double> p, const Labels& y);

/// p = 1 / (1 + exp(-(a s + b))).
struct PlattParams {
  double a = 1.0;
  double b = 0.0;
  int iterations = 0;

  double apply(double s) const;
  nlohmann::json to_json() const;
};

/// Maximum-likelihood sigmoid fit with Platt's smoothed targets
/// y+ = (N+ + 1)/(N+ + 2), y- = 1/(N- + 2), solved by Newton's method with
/// backtracking. Throws DataError without both classes, FitError when all
/// scores are equal or after 100 iterations without convergence.
PlattParams fit_platt(std::span<const double> scores, const Labels& y);
std::vector<double> apply_platt(const PlattParams& params, std::span<const double> scores);

/// Monotone step map with linear interpolation between neighbouring blocks.
struct IsotonicMap {
  std::vector<double> x_lo;   ///< smallest score of each block
  std::vector<double> x_hi;   ///< largest score of each block
  std::vector<double> value;  ///< block means, non-decreasing

  double apply(double s) const;
  nlohmann::json to_json() const;
};

/// Pool-adjacent-violators on (score, target) pairs with optional weights.
/// Tied scores are pooled before fitting.
IsotonicMap fit_isotonic(std::span<const double> scores, std::span<const double> targets,
                         std::span<const double> weights = {});
IsotonicMap fit_isotonic(std::span<const double> scores, const Labels& y);
std::vector<double> apply_isotonic(const IsotonicMap& map, std::span<const double> scores);

struct ReliabilityBin {
  std::size_t bin = 0;
  double lo = 0.0;
  double hi = 0.0;
  double mean_pred = 0.0;
  double frac_pos = 0.0;
  std::size_t count = 0;
};

/// Equal-width bins on [0, 1]; the last bin is closed on the right.
struct ReliabilityCurve {
  std::size_t n_bins = 10;
  std::vector<ReliabilityBin> bins;      ///< non-empty bins only
  std::vector<std::size_t> empty_bins;   ///< indices of bins without samples
};

ReliabilityCurve reliability_curve(std::span<const double> p, const Labels& y,
                                   std::size_t n_bins = 10);

/// Binned Brier decomposition. The four terms add up to the Brier score:
///   calibration   = 1/N sum_k n_k (pbar_k - obar_k)^2
///   refinement    = 1/N sum_k n_k obar_k (1 - obar_k)
///   within_spread = 1/N sum_i (p_i - pbar_k)^2
///   covariance    = -2/N sum_i (p_i - pbar_k)(y_i - obar_k)
struct BrierDecomposition {
  double calibration = 0.0;
  double refinement = 0.0;
  double within_spread = 0.0;
  double covariance = 0.0;
  double brier = 0.0;

  double recombined() const { return calibration + refinement + within_spread + covariance; }
};

BrierDecomposition brier_decomposition(std::span<const double> p, const Labels& y,
                                       std::size_t n_bins = 10);

}  // namespace kdisc::calibration
