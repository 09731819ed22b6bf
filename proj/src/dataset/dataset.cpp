#include "kdisc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "kdisc/core/error.hpp"
#include "kdisc/core/rng.hpp"

namespace kdisc {

DonorLabel derive_label(const DonorRecord& record) {
  const auto& k = record.kidneys;
  if (k[0] == KidneyOutcome::Unknown && k[1] == KidneyOutcome::Unknown)
    throw LabelError("donor " + record.donor_id + ": both kidney outcomes unknown");
  if (k[0] == KidneyOutcome::Transplanted || k[1] == KidneyOutcome::Transplanted)
    return DonorLabel::Transplanted;
  return DonorLabel::Discarded;
}

const DonorRecord* LabeledCohort::find(const std::string& donor_id) const {
  for (const auto& r : records)
    if (r.donor_id == donor_id) return &r;
  return nullptr;
}

LabeledCohort make_labeled_cohort(std::vector<DonorRecord> records) {
  LabeledCohort cohort;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.donor_id).second) throw DataError("duplicate donor_id " + r.donor_id);
    for (const auto& [name, ts] : r.timeseries) {
      for (std::size_t i = 1; i < ts.size(); ++i)
        if (ts[i].t < ts[i - 1].t)
          throw DataError("donor " + r.donor_id + ": series '" + name + "' not sorted in t");
    }
    cohort.label[r.donor_id] = derive_label(r);
  }
  cohort.records = std::move(records);
  return cohort;
}

std::vector<std::string> SplitIndex::train_pool() const {
  std::vector<std::string> out;
  std::merge(train_ids.begin(), train_ids.end(), val_ids.begin(), val_ids.end(),
             std::back_inserter(out));
  return out;
}

std::size_t round_count(double x) { return static_cast<std::size_t>(std::round(x)); }

SplitIndex split_cohort(const LabeledCohort& cohort, std::uint64_t seed,
                        SplitFractions fractions) {
  const std::size_t n = cohort.size();
  if (n < 10) throw SplitError("cohort has " + std::to_string(n) + " donors; need at least 10");

  std::vector<std::string> ids;
  ids.reserve(n);
  for (const auto& r : cohort.records) ids.push_back(r.donor_id);
  std::sort(ids.begin(), ids.end());

  Rng rng(seed, 0x5eed5);
  rng.shuffle(std::span<std::string>(ids));

  const std::size_t n_test = round_count(fractions.test * static_cast<double>(n));
  SplitIndex split;
  split.seed = seed;
  split.test_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));

  // Stratified validation carve: quotas by largest remainder, taken from each
  // class in shuffled order.
  std::array<std::vector<std::string>, 2> by_class;
  for (std::size_t i = n_test; i < n; ++i)
    by_class[static_cast<int>(cohort.label.at(ids[i]))].push_back(ids[i]);
  const std::size_t pool = n - n_test;
  const std::size_t n_val = round_count(fractions.validation * static_cast<double>(pool));

  std::array<std::size_t, 2> quota{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double exact = static_cast<double>(n_val) * static_cast<double>(by_class[c].size()) /
                         static_cast<double>(pool);
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(quota[c]);
    assigned += quota[c];
  }
  while (assigned < n_val) {
    const int c = remainder[1] > remainder[0] ? 1 : 0;
    const int pick = quota[c] < by_class[c].size() ? c : 1 - c;
    ++quota[pick];
    remainder[pick] = -1.0;
    ++assigned;
  }
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < by_class[c].size(); ++i)
      (i < quota[c] ? split.val_ids : split.train_ids).push_back(by_class[c][i]);
  }
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.val_ids.begin(), split.val_ids.end());
  std::sort(split.test_ids.begin(), split.test_ids.end());
  return split;
}

const char* to_string(FeatureType t) {
  switch (t) {
    case FeatureType::Numeric: return "numeric";
    case FeatureType::Binary: return "binary";
    case FeatureType::Ordinal: return "ordinal";
  }
  return "numeric";
}

FeatureType feature_type_from_string(const std::string& s) {
  if (s == "binary") return FeatureType::Binary;
  if (s == "ordinal") return FeatureType::Ordinal;
  if (s == "numeric") return FeatureType::Numeric;
  throw DataError("unknown feature type '" + s + "'");
}

std::vector<std::uint8_t> FeatureMatrix::missing_mask() const {
  std::vector<std::uint8_t> mask(values.data().size());
  auto d = values.data();
  for (std::size_t i = 0; i < d.size(); ++i) mask[i] = is_missing(d[i]) ? 1 : 0;
  return mask;
}

std::optional<std::size_t> FeatureMatrix::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < feature_names.size(); ++i)
    if (feature_names[i] == name) return i;
  return std::nullopt;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> idx) const {
  FeatureMatrix out;
  out.values = values.select_rows(idx);
  out.feature_names = feature_names;
  out.feature_types = feature_types;
  for (auto i : idx) {
    if (!labels.empty()) out.labels.push_back(labels[i]);
    if (!donor_ids.empty()) out.donor_ids.push_back(donor_ids[i]);
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_features(std::span<const std::size_t> idx) const {
  FeatureMatrix out;
  out.values = values.select_cols(idx);
  for (auto i : idx) {
    out.feature_names.push_back(feature_names[i]);
    out.feature_types.push_back(feature_types[i]);
  }
  out.labels = labels;
  out.donor_ids = donor_ids;
  return out;
}

FeatureMatrix FeatureMatrix::select_features(const std::vector<std::string>& names) const {
  std::vector<std::size_t> idx;
  idx.reserve(names.size());
  for (const auto& n : names) {
    auto i = column_index(n);
    if (!i) throw DataError("feature not in matrix: " + n);
    idx.push_back(*i);
  }
  return select_features(std::span<const std::size_t>(idx));
}

FeatureMatrix FeatureMatrix::select_donors(const std::vector<std::string>& ids) const {
  std::set<std::string> wanted(ids.begin(), ids.end());
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < donor_ids.size(); ++i)
    if (wanted.count(donor_ids[i])) idx.push_back(i);
  return select_rows(std::span<const std::size_t>(idx));
}

StandardScaler fit_scaler(const FeatureMatrix& train) {
  const auto& x = train.values;
  if (x.rows() == 0) throw ScalingError("cannot fit scaler on zero rows");
  if (x.count_missing() > 0) throw ScalingError("missing values present; impute before scaling");
  StandardScaler s;
  s.mean.assign(x.cols(), 0.0);
  s.std.assign(x.cols(), 0.0);
  s.zero_variance.assign(x.cols(), false);
  const double n = static_cast<double>(x.rows());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double sum = 0.0;
    bool constant = true;
    const double first = x(0, c);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      sum += x(r, c);
      constant = constant && x(r, c) == first;
    }
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) ss += (x(r, c) - mean) * (x(r, c) - mean);
    s.mean[c] = mean;
    s.std[c] = std::sqrt(ss / n);
    s.zero_variance[c] = constant || s.std[c] == 0.0;
  }
  return s;
}

FeatureMatrix apply_scaler(const StandardScaler& scaler, const FeatureMatrix& m) {
  if (m.cols() != scaler.mean.size()) throw ScalingError("scaler width does not match matrix");
  if (m.values.count_missing() > 0) throw ScalingError("missing values present; impute before scaling");
  FeatureMatrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      out.values(r, c) =
          scaler.zero_variance[c] ? 0.0 : (m.values(r, c) - scaler.mean[c]) / scaler.std[c];
  return out;
}

}  // namespace kdisc
