#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kdisc/dataset.hpp"

namespace kdisc::features {

/// First whitespace-delimited token of a trimmed medication entry;
/// empty when the entry is blank.
std::string medication_token(std::string_view raw);

/// Top-k medication tokens by number of training donors receiving them.
/// Ties are broken lexicographically (smaller token kept).
struct MedicationVocabulary {
  std::vector<std::string> tokens;  ///< in rank order

  std::vector<std::string> feature_names() const;
  /// Indicator per vocabulary token; unknown tokens are ignored.
  std::vector<double> encode(std::span<const std::string> medications) const;
};

MedicationVocabulary fit_medication_vocabulary(std::span<const DonorRecord* const> train,
                                               std::size_t top_k = 40);

/// Fitted encoder of one static categorical variable.
///
/// Variables with at most two training levels are encoded as one 0/1 column.
/// Wider variables get one indicator per retained level; ICD-coded variables
/// drop levels whose training donor frequency is below `rare_threshold`
/// (those values become missing). With `missing_as_category` a dedicated
/// indicator absorbs missing values; otherwise a missing value yields NaN in
/// every indicator. Unseen levels encode as all zeros.
struct CategoricalEncoder {
  std::string variable;
  bool binary = false;
  bool icd = false;
  bool missing_as_category = false;
  std::vector<std::string> levels;  ///< retained levels, sorted
  std::vector<std::string> rare_levels;

  std::vector<std::string> feature_names() const;
  std::vector<double> encode(const Value& v) const;
};

CategoricalEncoder fit_categorical_encoder(const std::string& variable,
                                           std::span<const Value> train_values, bool icd,
                                           bool missing_as_category,
                                           double rare_threshold = 0.01);

inline const std::string kMissingLevel = "__missing__";

}  // namespace kdisc::features
