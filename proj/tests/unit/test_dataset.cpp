#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "kdisc/core/error.hpp"
#include "kdisc/dataset.hpp"

using namespace kdisc;

namespace {

DonorRecord donor(const std::string& id, KidneyOutcome a, KidneyOutcome b) {
  DonorRecord r;
  r.donor_id = id;
  r.kidneys = {a, b};
  r.static_vars["age"] = 40.0;
  return r;
}

std::vector<DonorRecord> cohort_of(std::size_t n, std::size_t n_discarded) {
  std::vector<DonorRecord> v;
  for (std::size_t i = 0; i < n; ++i) {
    const auto o = i < n_discarded ? KidneyOutcome::Discarded : KidneyOutcome::Transplanted;
    v.push_back(donor("D" + std::to_string(1000 + i), o, o));
  }
  return v;
}

}  // namespace

TEST_CASE("label is transplanted when any kidney is transplanted") {
  using K = KidneyOutcome;
  CHECK(derive_label(donor("a", K::Transplanted, K::Discarded)) == DonorLabel::Transplanted);
  CHECK(derive_label(donor("a", K::Discarded, K::Transplanted)) == DonorLabel::Transplanted);
  CHECK(derive_label(donor("a", K::Discarded, K::Discarded)) == DonorLabel::Discarded);
  CHECK(derive_label(donor("a", K::Unknown, K::Transplanted)) == DonorLabel::Transplanted);
  CHECK(derive_label(donor("a", K::Discarded, K::Unknown)) == DonorLabel::Discarded);
  CHECK_THROWS_AS(derive_label(donor("a", K::Unknown, K::Unknown)), LabelError);
}

TEST_CASE("cohort validation rejects duplicate ids and unsorted series") {
  auto v = cohort_of(3, 1);
  v[2].donor_id = v[0].donor_id;
  CHECK_THROWS_AS(make_labeled_cohort(v), DataError);
  auto w = cohort_of(3, 1);
  w[0].timeseries["crp"] = {{5.0, 1.0}, {2.0, 1.0}};
  CHECK_THROWS_AS(make_labeled_cohort(w), DataError);
}

TEST_CASE("split sizes, disjointness and stratified validation") {
  const auto c = make_labeled_cohort(cohort_of(2000, 456));
  const auto s = split_cohort(c, 9);
  CHECK(s.test_ids.size() == 400);
  CHECK(s.val_ids.size() == 160);
  CHECK(s.train_ids.size() == 1440);
  std::set<std::string> all;
  for (const auto* part : {&s.train_ids, &s.val_ids, &s.test_ids}) {
    CHECK(std::is_sorted(part->begin(), part->end()));
    all.insert(part->begin(), part->end());
  }
  CHECK(all.size() == 2000);
  // Validation carve follows the pool's class ratio to within one donor.
  std::size_t pool_neg = 0, val_neg = 0;
  for (const auto& id : s.train_pool()) pool_neg += c.label.at(id) == DonorLabel::Discarded;
  for (const auto& id : s.val_ids) val_neg += c.label.at(id) == DonorLabel::Discarded;
  const double expected = 160.0 * static_cast<double>(pool_neg) / 1600.0;
  CHECK(std::abs(static_cast<double>(val_neg) - expected) <= 1.0);
}

TEST_CASE("split is deterministic in the seed and sensitive to it") {
  const auto c = make_labeled_cohort(cohort_of(300, 70));
  CHECK(split_cohort(c, 1) == split_cohort(c, 1));
  CHECK(!(split_cohort(c, 1) == split_cohort(c, 2)));
  CHECK_THROWS_AS(split_cohort(make_labeled_cohort(cohort_of(9, 3)), 1), SplitError);
}

TEST_CASE("round_count rounds half away from zero") {
  CHECK(round_count(2.5) == 3);
  CHECK(round_count(3.5) == 4);
  CHECK(round_count(2.49) == 2);
}

TEST_CASE("scaler uses population sd and train statistics") {
  FeatureMatrix m;
  m.values = Matrix(4, 2);
  const double a[4] = {1, 2, 3, 4};
  for (int i = 0; i < 4; ++i) {
    m.values(i, 0) = a[i];
    m.values(i, 1) = 7;
  }
  m.feature_names = {"a", "const"};
  m.feature_types = {FeatureType::Numeric, FeatureType::Numeric};
  m.labels = {0, 1, 0, 1};
  m.donor_ids = {"a", "b", "c", "d"};
  const auto sc = fit_scaler(m);
  CHECK(sc.mean[0] == doctest::Approx(2.5));
  CHECK(sc.std[0] == doctest::Approx(std::sqrt(1.25)));
  CHECK(sc.zero_variance[1]);
  const auto z = apply_scaler(sc, m);
  CHECK(z.values(0, 0) == doctest::Approx(-1.5 / std::sqrt(1.25)));
  CHECK(z.values(2, 1) == 0.0);
}

TEST_CASE("cohort and feature matrix persistence round-trip") {
  auto v = cohort_of(12, 4);
  v[0].static_vars["blood_group"] = std::string("A, rh+");
  v[0].static_vars["note"] = Value{};
  v[1].timeseries["creatinine"] = {{0.0, 1.2}, {6.5, 1.4}};
  v[1].timeseries["protein_urine"] = {{1.0, std::string("pos")}};
  v[2].medications = {"Heparin 5000 IE", "Noradrenalin"};
  v[3].kidneys = {KidneyOutcome::Unknown, KidneyOutcome::Discarded};
  const auto dir = std::filesystem::temp_directory_path();
  write_cohort_jsonl(dir / "kdisc_cohort_test.jsonl", v);
  const auto back = read_cohort_jsonl(dir / "kdisc_cohort_test.jsonl");
  CHECK(cohort_to_jsonl(back) == cohort_to_jsonl(v));

  FeatureMatrix m;
  m.values = Matrix(2, 2);
  m.values(0, 0) = 0.1;
  m.values(0, 1) = kMissing;
  m.values(1, 0) = -3e-17;
  m.values(1, 1) = 1;
  m.feature_names = {"x", "flag"};
  m.feature_types = {FeatureType::Numeric, FeatureType::Binary};
  m.labels = {1, 0};
  m.donor_ids = {"p", "q"};
  write_feature_matrix(dir / "kdisc_fm_test.csv", m);
  const auto r = read_feature_matrix(dir / "kdisc_fm_test.csv");
  CHECK(r.feature_names == m.feature_names);
  CHECK(r.feature_types == m.feature_types);
  CHECK(r.labels == m.labels);
  CHECK(r.values(1, 0) == m.values(1, 0));
  CHECK(std::isnan(r.values(0, 1)));
  CHECK(r.missing_mask()[1] == 1);
}
