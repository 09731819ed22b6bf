#include "kdisc/features/timeseries.hpp"

#include <algorithm>
#include <cmath>

#include "kdisc/core/error.hpp"

namespace kdisc::features {

const char* to_string(TimeSeriesKind k) {
  switch (k) {
    case TimeSeriesKind::Type1Categorical: return "type1";
    case TimeSeriesKind::Type2Sparse: return "type2";
    case TimeSeriesKind::Type3Dense: return "type3";
    case TimeSeriesKind::NotTimeSeries: return "single";
  }
  return "single";
}

TimeSeriesKind time_series_kind_from_string(const std::string& s) {
  if (s == "type1") return TimeSeriesKind::Type1Categorical;
  if (s == "type2") return TimeSeriesKind::Type2Sparse;
  if (s == "type3") return TimeSeriesKind::Type3Dense;
  if (s == "single") return TimeSeriesKind::NotTimeSeries;
  throw ConfigError("unknown time series kind '" + s + "'");
}

double OutcomeLevels::encode(const std::string& level) const {
  if (positive.count(level)) return 1.0;
  if (negative.count(level)) return 0.0;
  return kMissing;
}

TrendFit fit_trend(std::span<const double> t, std::span<const double> y) {
  TrendFit fit;
  if (t.empty()) return fit;
  // Collapse duplicate timestamps to their mean value.
  std::vector<double> ts, ys;
  for (std::size_t i = 0; i < t.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < t.size() && t[j] == t[i]) sum += y[j++];
    ts.push_back(t[i] - t[0]);
    ys.push_back(sum / static_cast<double>(j - i));
    i = j;
  }
  fit.n_points = ts.size();
  if (ts.size() < 2) return fit;

  const double n = static_cast<double>(ts.size());
  double tbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    tbar += ts[i];
    ybar += ys[i];
  }
  tbar /= n;
  ybar /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sxx += (ts[i] - tbar) * (ts[i] - tbar);
    sxy += (ts[i] - tbar) * (ys[i] - ybar);
  }
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * tbar;
  fit.valid = true;
  return fit;
}

std::vector<std::string> timeseries_feature_suffixes(TimeSeriesKind kind) {
  switch (kind) {
    case TimeSeriesKind::Type1Categorical: return {kTsFirst, kTsLast, kTsCount, kTsSpan};
    case TimeSeriesKind::Type2Sparse:
      return {kTsFirst, kTsLast, kTsCount, kTsSpan, kTsStd, kTsMin, kTsMax};
    case TimeSeriesKind::Type3Dense:
      return {kTsFirst, kTsLast, kTsCount, kTsSpan, kTsStd, kTsMin, kTsMax, kTsIntercept, kTsSlope};
    case TimeSeriesKind::NotTimeSeries: return {""};
  }
  return {};
}

namespace {

double numeric_of(const Value& v, const OutcomeLevels& levels) {
  if (std::holds_alternative<double>(v)) return std::get<double>(v);
  if (std::holds_alternative<std::string>(v)) return levels.encode(std::get<std::string>(v));
  return kMissing;
}

}  // namespace

std::vector<double> extract_timeseries_features(const TimeSeries& ts, TimeSeriesKind kind,
                                                const OutcomeLevels& levels, bool pick_last) {
  const auto suffixes = timeseries_feature_suffixes(kind);
  std::vector<double> out(suffixes.size(), kMissing);

  std::vector<double> t, y;
  for (const auto& p : ts) {
    const double v = numeric_of(p.value, levels);
    if (is_missing(v)) continue;
    t.push_back(p.t);
    y.push_back(v);
  }
  if (y.empty()) return out;

  if (kind == TimeSeriesKind::NotTimeSeries) {
    out[0] = pick_last ? y.back() : y.front();
    return out;
  }

  out[0] = y.front();
  out[1] = y.back();
  out[2] = static_cast<double>(y.size());
  out[3] = t.back() - t.front();
  if (kind == TimeSeriesKind::Type1Categorical) return out;

  if (y.size() >= 2) {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    out[4] = std::sqrt(ss / static_cast<double>(y.size() - 1));
  }
  out[5] = *std::min_element(y.begin(), y.end());
  out[6] = *std::max_element(y.begin(), y.end());
  if (kind == TimeSeriesKind::Type2Sparse) return out;

  const TrendFit fit = fit_trend(t, y);
  if (fit.valid) {
    out[7] = fit.intercept;
    out[8] = fit.slope;
  }
  return out;
}

std::map<std::string, TimeSeriesKind> classify_variables(
    std::span<const DonorRecord* const> donors, const OutcomeLevels& levels) {
  if (donors.empty()) throw ClassificationError("cannot classify variables of an empty cohort");

  struct Tally {
    bool numeric = false;
    bool categorical = false;
    std::size_t observations = 0;
    std::size_t donors_with_values = 0;
    std::size_t donors_single = 0;
    std::set<std::string> levels;
  };
  std::map<std::string, Tally> tallies;
  for (const DonorRecord* d : donors) {
    for (const auto& [name, ts] : d->timeseries) {
      auto& tally = tallies[name];
      std::size_t n = 0;
      for (const auto& p : ts) {
        if (std::holds_alternative<double>(p.value)) {
          tally.numeric = true;
          ++n;
        } else if (std::holds_alternative<std::string>(p.value)) {
          tally.categorical = true;
          tally.levels.insert(std::get<std::string>(p.value));
          ++n;
        }
      }
      tally.observations += n;
      if (n > 0) ++tally.donors_with_values;
      if (n == 1) ++tally.donors_single;
    }
  }

  std::map<std::string, TimeSeriesKind> kinds;
  for (const auto& [name, tally] : tallies) {
    if (tally.numeric && tally.categorical)
      throw ClassificationError("variable '" + name + "' mixes numeric and categorical values");
    if (tally.categorical) {
      for (const auto& lvl : tally.levels)
        if (is_missing(levels.encode(lvl)))
          throw ClassificationError("variable '" + name + "' has non positive/negative level '" +
                                    lvl + "'");
    }
    if (tally.donors_with_values > 0 &&
        2 * tally.donors_single > tally.donors_with_values) {
      kinds[name] = TimeSeriesKind::NotTimeSeries;
    } else if (tally.categorical) {
      kinds[name] = TimeSeriesKind::Type1Categorical;
    } else {
      const double mean_obs =
          static_cast<double>(tally.observations) / static_cast<double>(donors.size());
      kinds[name] = mean_obs < 2.0 ? TimeSeriesKind::Type2Sparse : TimeSeriesKind::Type3Dense;
    }
  }
  return kinds;
}

}  // namespace kdisc::features
