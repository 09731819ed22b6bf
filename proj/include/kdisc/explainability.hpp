#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kdisc/core/matrix.hpp"
#include "kdisc/core/parallel.hpp"

namespace kdisc::explain {

/// Batch model output: positive-class probability per row. Must be reentrant
/// because samples are explained concurrently.
using PredictFn = std::function<std::vector<double>(const Matrix&)>;

struct Attribution {
  std::vector<double> phi;  ///< per-feature contribution, probability units
  std::vector<double> se;   ///< Monte-Carlo standard error (zero in exact mode)
  double base = 0.0;        ///< mean model output over the background
  double fx = 0.0;          ///< model output at the explained sample
  std::size_t n_permutations = 0;
  /// Largest |sum(phi_p) - (fx - base)| over the individual permutation
  /// passes. Telescoping makes it pure rounding.
  double max_pass_residual = 0.0;

  double additivity_gap() const;
};

/// Exact Shapley values by enumerating all 2^M coalitions. The value of a
/// coalition S is the mean output over background rows with the S columns
/// replaced by x. Refuses more than 12 features.
Attribution exact_shap(const PredictFn& f, std::span<const double> x, const Matrix& background);

/// Antithetic permutation sampling. Every sampled ordering is walked forward
/// (background to x) and backward (x to background), and the two passes are
/// averaged into one per-permutation estimate.
Attribution permutation_shap(const PredictFn& f, std::span<const double> x, const Matrix& background,
                             std::size_t n_permutations, std::uint64_t seed);

/// Seeded subsample of at most max_rows rows, kept in original order.
Matrix select_background(const Matrix& X, std::size_t max_rows, std::uint64_t seed);

/// Explains every row of X. Row i uses the stream (seed, i) so results do not
/// depend on the worker count.
std::vector<Attribution> explain_rows(const PredictFn& f, const Matrix& X, const Matrix& background,
                                      std::size_t n_permutations, std::uint64_t seed,
                                      Exec exec = Exec::Parallel);

struct GlobalImportance {
  std::vector<std::string> features;
  std::vector<double> mean_abs;
  std::vector<double> std_abs;  ///< population standard deviation of |phi|

  /// Feature indices by decreasing mean |phi|; ties keep column order.
  std::vector<std::size_t> top(std::size_t k) const;
};

GlobalImportance aggregate_global(const std::vector<Attribution>& attributions,
                                  const std::vector<std::string>& features);

struct BeeswarmRow {
  std::size_t sample = 0;
  std::string feature;
  double phi = 0.0;
  double value = 0.0;
};

/// One row per (sample, feature) pairing the attribution with the raw value
/// so plots can colour points by the feature's actual value.
std::vector<BeeswarmRow> export_beeswarm(const std::vector<Attribution>& attributions,
                                         const Matrix& raw_values,
                                         const std::vector<std::string>& features);

}  // namespace kdisc::explain
