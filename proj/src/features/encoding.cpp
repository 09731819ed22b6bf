#include "kdisc/features/encoding.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "kdisc/core/error.hpp"

namespace kdisc::features {

namespace {

// Numeric codes in a categorical column are compared by their text.
std::string level_text(double d) {
  if (d == static_cast<double>(static_cast<long long>(d)))
    return std::to_string(static_cast<long long>(d));
  return std::to_string(d);
}

}  // namespace

std::string medication_token(std::string_view raw) {
  std::size_t b = 0;
  while (b < raw.size() && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
  std::size_t e = b;
  while (e < raw.size() && !std::isspace(static_cast<unsigned char>(raw[e]))) ++e;
  return std::string(raw.substr(b, e - b));
}

std::vector<std::string> MedicationVocabulary::feature_names() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back("med__" + t);
  return out;
}

std::vector<double> MedicationVocabulary::encode(std::span<const std::string> medications) const {
  std::set<std::string> present;
  for (const auto& m : medications) present.insert(medication_token(m));
  std::vector<double> out(tokens.size(), 0.0);
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (present.count(tokens[i])) out[i] = 1.0;
  return out;
}

MedicationVocabulary fit_medication_vocabulary(std::span<const DonorRecord* const> train,
                                               std::size_t top_k) {
  std::map<std::string, std::size_t> donor_counts;
  for (const DonorRecord* d : train) {
    std::set<std::string> tokens;
    for (const auto& m : d->medications) {
      auto tok = medication_token(m);
      if (!tok.empty()) tokens.insert(std::move(tok));
    }
    for (const auto& t : tokens) ++donor_counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(donor_counts.begin(), donor_counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  MedicationVocabulary vocab;
  for (std::size_t i = 0; i < ranked.size() && i < top_k; ++i) vocab.tokens.push_back(ranked[i].first);
  return vocab;
}

std::vector<std::string> CategoricalEncoder::feature_names() const {
  if (binary) {
    const std::string lvl = levels.size() == 2 ? levels[1] : (levels.empty() ? "" : levels[0]);
    return {variable + "=" + lvl};
  }
  std::vector<std::string> out;
  for (const auto& l : levels) out.push_back(variable + "=" + l);
  if (missing_as_category) out.push_back(variable + "=" + kMissingLevel);
  return out;
}

std::vector<double> CategoricalEncoder::encode(const Value& v) const {
  const std::size_t width = binary ? 1 : levels.size() + (missing_as_category ? 1 : 0);
  std::optional<std::string> level;
  if (std::holds_alternative<std::string>(v)) level = std::get<std::string>(v);
  if (std::holds_alternative<double>(v)) {
    level = level_text(std::get<double>(v));
  }
  if (level && icd && std::binary_search(rare_levels.begin(), rare_levels.end(), *level))
    level.reset();

  if (binary) {
    if (!level) return {kMissing};
    const std::string& one = levels.size() == 2 ? levels[1] : levels[0];
    return {*level == one ? 1.0 : 0.0};
  }
  std::vector<double> out(width, 0.0);
  if (!level) {
    if (missing_as_category) {
      out.back() = 1.0;
    } else {
      std::fill(out.begin(), out.end(), kMissing);
    }
    return out;
  }
  auto it = std::lower_bound(levels.begin(), levels.end(), *level);
  if (it != levels.end() && *it == *level) out[static_cast<std::size_t>(it - levels.begin())] = 1.0;
  return out;
}

CategoricalEncoder fit_categorical_encoder(const std::string& variable,
                                           std::span<const Value> train_values, bool icd,
                                           bool missing_as_category, double rare_threshold) {
  CategoricalEncoder enc;
  enc.variable = variable;
  enc.icd = icd;
  enc.missing_as_category = missing_as_category;

  std::map<std::string, std::size_t> counts;
  for (const auto& v : train_values) {
    if (std::holds_alternative<std::string>(v)) {
      ++counts[std::get<std::string>(v)];
    } else if (std::holds_alternative<double>(v)) {
      ++counts[level_text(std::get<double>(v))];
    }
  }
  const double n_donors = static_cast<double>(train_values.size());
  for (const auto& [lvl, c] : counts) {
    if (icd && static_cast<double>(c) < rare_threshold * n_donors) {
      enc.rare_levels.push_back(lvl);
    } else {
      enc.levels.push_back(lvl);
    }
  }
  enc.binary = enc.levels.size() <= 2 && !missing_as_category;
  return enc;
}

}  // namespace kdisc::features
