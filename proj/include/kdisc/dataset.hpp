#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kdisc/core/matrix.hpp"

namespace kdisc {

/// A raw field value: missing, numeric or categorical.
using Value = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const Value& v) { return std::holds_alternative<std::monostate>(v); }

struct TsPoint {
  double t = 0.0;  ///< hours since the donor's first hospital record
  Value value;
};
using TimeSeries = std::vector<TsPoint>;

enum class KidneyOutcome { Unknown, Transplanted, Discarded };

/// One donor as delivered by the registry export.
struct DonorRecord {
  std::string donor_id;
  std::map<std::string, Value> static_vars;
  std::map<std::string, TimeSeries> timeseries;
  std::vector<std::string> medications;
  std::array<KidneyOutcome, 2> kidneys{KidneyOutcome::Unknown, KidneyOutcome::Unknown};
};

/// Donor-level label. Transplanted is the positive class (1).
enum class DonorLabel { Discarded = 0, Transplanted = 1 };

/// Transplanted iff at least one kidney was transplanted. An unknown single
/// outcome counts as absent evidence of transplantation. Throws LabelError
/// when both outcomes are unknown.
DonorLabel derive_label(const DonorRecord& record);

struct LabeledCohort {
  std::vector<DonorRecord> records;
  std::map<std::string, DonorLabel> label;

  std::size_t size() const { return records.size(); }
  const DonorRecord* find(const std::string& donor_id) const;
};

/// Validates invariants (unique ids, sorted series, one known outcome) and
/// labels every record.
LabeledCohort make_labeled_cohort(std::vector<DonorRecord> records);

struct SplitIndex {
  std::vector<std::string> train_ids;  ///< sorted
  std::vector<std::string> val_ids;    ///< sorted
  std::vector<std::string> test_ids;   ///< sorted
  std::uint64_t seed = 0;

  bool operator==(const SplitIndex&) const = default;
  /// Train pool = train ∪ val, sorted.
  std::vector<std::string> train_pool() const;
};

struct SplitFractions {
  double test = 0.20;
  double validation = 0.10;  ///< of the train pool
};

/// Donor-id keyed 80/20 split with a label-stratified 10% validation carve.
/// Counts use round-half-away-from-zero. Throws SplitError for N < 10.
SplitIndex split_cohort(const LabeledCohort& cohort, std::uint64_t seed,
                        SplitFractions fractions = {});

/// Count rounding used for split sizes.
std::size_t round_count(double x);

enum class FeatureType { Numeric, Binary, Ordinal };

const char* to_string(FeatureType t);
FeatureType feature_type_from_string(const std::string& s);

/// Engineered numeric matrix. Missing cells are NaN; `missing_mask()` gives
/// the explicit mask.
struct FeatureMatrix {
  Matrix values;
  std::vector<std::string> feature_names;
  std::vector<FeatureType> feature_types;
  Labels labels;
  std::vector<std::string> donor_ids;

  std::size_t rows() const { return values.rows(); }
  std::size_t cols() const { return values.cols(); }
  std::vector<std::uint8_t> missing_mask() const;
  std::optional<std::size_t> column_index(const std::string& name) const;

  FeatureMatrix select_rows(std::span<const std::size_t> idx) const;
  FeatureMatrix select_features(std::span<const std::size_t> idx) const;
  FeatureMatrix select_features(const std::vector<std::string>& names) const;
  /// Rows whose donor id is in `ids` (ids need not be sorted), in matrix order.
  FeatureMatrix select_donors(const std::vector<std::string>& ids) const;
};

/// Train-fitted z-score scaler with population standard deviation.
struct StandardScaler {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<bool> zero_variance;
};

StandardScaler fit_scaler(const FeatureMatrix& train);
FeatureMatrix apply_scaler(const StandardScaler& scaler, const FeatureMatrix& m);

// --- persistence -----------------------------------------------------------

std::vector<DonorRecord> read_cohort_jsonl(const std::filesystem::path& path);
std::string cohort_to_jsonl(const std::vector<DonorRecord>& records);
void write_cohort_jsonl(const std::filesystem::path& path, const std::vector<DonorRecord>& records);
DonorRecord donor_from_json_line(const std::string& line);

/// CSV (donor_id,label,features...) plus a sidecar JSON naming each
/// feature's type. The sidecar path is `<csv>.schema.json`.
void write_feature_matrix(const std::filesystem::path& csv, const FeatureMatrix& m);
FeatureMatrix read_feature_matrix(const std::filesystem::path& csv);

}  // namespace kdisc
