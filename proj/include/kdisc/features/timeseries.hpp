#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kdisc/dataset.hpp"

namespace kdisc::features {

enum class TimeSeriesKind {
  Type1Categorical,  ///< positive/negative outcomes only
  Type2Sparse,       ///< numeric, fewer than two observations per donor on average
  Type3Dense,        ///< numeric, two or more observations per donor on average
  NotTimeSeries,     ///< more than half of the donors carry a single value
};

const char* to_string(TimeSeriesKind k);
TimeSeriesKind time_series_kind_from_string(const std::string& s);

/// Tokens that denote a positive / negative categorical outcome.
struct OutcomeLevels {
  std::set<std::string> positive{"pos", "positive", "+", "yes"};
  std::set<std::string> negative{"neg", "negative", "-", "no"};

  /// 1 / 0 for a known level, NaN otherwise.
  double encode(const std::string& level) const;
};

/// Per-donor least-squares line through (t, y). t is hours since the first
/// entry; duplicate timestamps are averaged before fitting.
struct TrendFit {
  double intercept = kMissing;  ///< variable units, at the first entry
  double slope = kMissing;      ///< variable units per hour
  std::size_t n_points = 0;     ///< distinct time points used
  bool valid = false;           ///< at least two distinct time points
};

TrendFit fit_trend(std::span<const double> t, std::span<const double> y);

/// Suffixes of the extracted features, in emission order.
inline constexpr const char* kTsFirst = "first";
inline constexpr const char* kTsLast = "last";
inline constexpr const char* kTsCount = "count";
inline constexpr const char* kTsSpan = "span_hours";
inline constexpr const char* kTsStd = "std";
inline constexpr const char* kTsMin = "min";
inline constexpr const char* kTsMax = "max";
inline constexpr const char* kTsIntercept = "intercept";
inline constexpr const char* kTsSlope = "slope";

/// Names of the features a series of `kind` contributes, without the
/// variable prefix. NotTimeSeries contributes a single unnamed value ("").
std::vector<std::string> timeseries_feature_suffixes(TimeSeriesKind kind);

/// Summary features of one series, aligned with timeseries_feature_suffixes.
/// Undefined values (std of one point, slope without two time points, every
/// value of an empty series) are NaN. `pick_last` chooses the value kept for
/// NotTimeSeries variables.
std::vector<double> extract_timeseries_features(const TimeSeries& ts, TimeSeriesKind kind,
                                                const OutcomeLevels& levels = {},
                                                bool pick_last = true);

/// Classifies every time-series variable from the given (training) donors.
/// Throws ClassificationError naming a variable that mixes numeric and
/// categorical values, or whose categorical levels are not positive/negative.
std::map<std::string, TimeSeriesKind> classify_variables(
    std::span<const DonorRecord* const> donors, const OutcomeLevels& levels = {});

}  // namespace kdisc::features
