#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "kdisc/core/error.hpp"
#include "kdisc/core/rng.hpp"
#include "kdisc/features/pipeline.hpp"
#include "kdisc/synthgen.hpp"

using namespace kdisc;
using namespace kdisc::features;

namespace {

// Least squares through (t - t0, y) by the normal equations.
std::pair<double, double> normal_equation_line(const std::vector<double>& t, const std::vector<double>& y) {
  Eigen::MatrixXd A(t.size(), 2);
  Eigen::VectorXd b(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = t[i] - t[0];
    b(i) = y[i];
  }
  const Eigen::Vector2d x = (A.transpose() * A).ldlt().solve(A.transpose() * b);
  return {x(0), x(1)};
}

}  // namespace

TEST_CASE("trend fit matches the normal equations") {
  Rng r(17);
  for (int rep = 0; rep < 500; ++rep) {
    const auto n = static_cast<std::size_t>(r.integer(2, 12));
    std::vector<double> t, y;
    double tt = r.uniform(0, 50);
    for (std::size_t i = 0; i < n; ++i) {
      tt += r.uniform(0.1, 10);
      t.push_back(tt);
      y.push_back(r.normal(1, 2));
    }
    const auto fit = fit_trend(t, y);
    const auto [a, b] = normal_equation_line(t, y);
    REQUIRE(fit.valid);
    CHECK(fit.intercept == doctest::Approx(a).epsilon(1e-9));
    CHECK(fit.slope == doctest::Approx(b).epsilon(1e-9));
  }
}

TEST_CASE("trend fit is exact on noiseless lines and handles degenerate input") {
  const std::vector<double> t{3, 5, 9, 12}, y{1 + 0.5 * 0, 1 + 0.5 * 2, 1 + 0.5 * 6, 1 + 0.5 * 9};
  const auto fit = fit_trend(t, y);
  CHECK(fit.slope == 0.5);
  CHECK(fit.intercept == 1.0);
  CHECK_FALSE(fit_trend(std::vector<double>{4}, std::vector<double>{1}).valid);
  // Duplicate timestamps collapse to their mean: one distinct time point.
  const auto dup = fit_trend(std::vector<double>{2, 2}, std::vector<double>{1, 3});
  CHECK_FALSE(dup.valid);
  CHECK(dup.n_points == 1);
  const auto avg = fit_trend(std::vector<double>{0, 0, 1}, std::vector<double>{1, 3, 4});
  CHECK(avg.intercept == doctest::Approx(2.0));
  CHECK(avg.slope == doctest::Approx(2.0));
}

TEST_CASE("time series summaries per kind") {
  const TimeSeries ts{{0, 2.0}, {4, 4.0}, {8, 3.0}};
  const auto f3 = extract_timeseries_features(ts, TimeSeriesKind::Type3Dense);
  REQUIRE(f3.size() == 9);
  CHECK(f3[0] == 2.0);
  CHECK(f3[1] == 3.0);
  CHECK(f3[2] == 3.0);
  CHECK(f3[3] == 8.0);
  CHECK(f3[4] == doctest::Approx(1.0));
  CHECK(f3[5] == 2.0);
  CHECK(f3[6] == 4.0);
  CHECK(f3[8] == doctest::Approx(0.125));
  const auto single = extract_timeseries_features({{1, 5.0}}, TimeSeriesKind::Type2Sparse);
  CHECK(std::isnan(single[4]));
  const auto empty = extract_timeseries_features({}, TimeSeriesKind::Type3Dense);
  for (double v : empty) CHECK(std::isnan(v));
  const auto cat = extract_timeseries_features({{0, std::string("neg")}, {3, std::string("pos")}},
                                               TimeSeriesKind::Type1Categorical);
  CHECK(cat[0] == 0.0);
  CHECK(cat[1] == 1.0);
  CHECK(extract_timeseries_features(ts, TimeSeriesKind::NotTimeSeries, {}, false)[0] == 2.0);
}

TEST_CASE("variables are classified by their training observations") {
  std::vector<DonorRecord> donors(4);
  for (int i = 0; i < 4; ++i) {
    donors[i].donor_id = "d" + std::to_string(i);
    donors[i].timeseries["dense"] = {{0, 1.0}, {1, 2.0}, {2, 3.0}};
    donors[i].timeseries["sparse"] = i < 2 ? TimeSeries{{0, 1.0}, {1, 1.0}} : TimeSeries{};
    donors[i].timeseries["single"] = {{0, 1.0}};
    donors[i].timeseries["urine"] = {{0, std::string("neg")}, {1, std::string("pos")}};
  }
  std::vector<const DonorRecord*> ptr;
  for (auto& d : donors) ptr.push_back(&d);
  const auto k = classify_variables(ptr);
  CHECK(k.at("dense") == TimeSeriesKind::Type3Dense);
  CHECK(k.at("sparse") == TimeSeriesKind::Type2Sparse);
  CHECK(k.at("single") == TimeSeriesKind::NotTimeSeries);
  CHECK(k.at("urine") == TimeSeriesKind::Type1Categorical);
  donors[0].timeseries["urine"].push_back({2, std::string("trace")});
  CHECK_THROWS_AS(classify_variables(ptr), ClassificationError);
  donors[0].timeseries["urine"].back().value = 1.0;
  CHECK_THROWS_AS(classify_variables(ptr), ClassificationError);
}

TEST_CASE("domain transforms") {
  CHECK(diuresis_last_hour_per_kg(140, 70) == 2.0);
  CHECK(std::isnan(diuresis_last_hour_per_kg(140, 0)));
  CHECK(diuresis_24h_per_kg(700, 12, 70) == doctest::Approx(20.0));
  CHECK(std::isnan(diuresis_24h_per_kg(700, kMissing, 70)));
}

TEST_CASE("medication tokens and vocabulary ranking") {
  CHECK(medication_token("  Heparin 5000 IE ") == "Heparin");
  CHECK(medication_token("   ").empty());
  std::vector<DonorRecord> d(3);
  d[0].medications = {"B 1", "A"};
  d[1].medications = {"B", "C"};
  d[2].medications = {"C x", "B"};
  std::vector<const DonorRecord*> p{&d[0], &d[1], &d[2]};
  const auto v = fit_medication_vocabulary(p, 2);
  CHECK(v.tokens == std::vector<std::string>{"B", "C"});
  const std::vector<std::string> meds{"C 5mg", "Z"};
  CHECK(v.encode(meds) == std::vector<double>{0, 1});
}

TEST_CASE("categorical encoder: binary, one-hot, rare ICD levels, missing category") {
  const std::vector<Value> sex{std::string("f"), std::string("m"), std::string("f")};
  const auto b = fit_categorical_encoder("sex", sex, false, false);
  CHECK(b.binary);
  CHECK(b.feature_names().size() == 1);

  std::vector<Value> icd;
  for (int i = 0; i < 200; ++i) icd.push_back(std::string(i % 2 ? "I61" : "I63"));
  icd.push_back(std::string("K72"));
  icd.push_back(Value{});
  const auto e = fit_categorical_encoder("icd_cause", icd, true, true, 0.01);
  CHECK(e.rare_levels == std::vector<std::string>{"K72"});
  const auto miss = e.encode(Value{});
  const auto names = e.feature_names();
  REQUIRE(miss.size() == names.size());
  double total = 0;
  for (double x : miss) total += x;
  CHECK(total == 1.0);
  const auto unseen = e.encode(std::string("X99"));
  for (double x : unseen) CHECK(x == 0.0);
}

TEST_CASE("central normal draws stay inside mean +- 1.96 sd") {
  for (std::uint64_t i = 0; i < 5000; ++i) {
    const double v = sample_central_normal(10, 3, 99, 1, i);
    CHECK(v >= 10 - kCentral95 * 3);
    CHECK(v <= 10 + kCentral95 * 3);
  }
}

TEST_CASE("redundant and constant columns are dropped") {
  FeatureMatrix m;
  m.values = Matrix(3, 4);
  for (int i = 0; i < 3; ++i) {
    m.values(i, 0) = i;
    m.values(i, 1) = 5;
    m.values(i, 2) = i;
    m.values(i, 3) = -i;
  }
  m.feature_names = {"b", "const", "a", "c"};
  m.feature_types.assign(4, FeatureType::Numeric);
  const auto dropped = drop_redundant_constant(m);
  CHECK(dropped == std::vector<std::string>{"b", "const"});
  CHECK(m.feature_names == std::vector<std::string>{"a", "c"});
}

TEST_CASE("pipeline on a synthetic cohort: complete, bounded and converged") {
  synth::SynthConfig sc;
  sc.n_donors = 400;
  const auto cohort = make_labeled_cohort(synth::generate_cohort(sc).records);
  const auto split = split_cohort(cohort, 3);
  EngineeringConfig ec;
  ec.imputation.rules = {{"^diagnosis_", Strategy::LogicalDefault, 0.0, "", {}},
                         {"^med__", Strategy::LogicalDefault, 0.0, "", {}},
                         {"^alcohol_", Strategy::LogicalDefault, 0.0, "", {}},
                         {"^diabetes_", Strategy::LogicalDefault, 0.0, "", {}},
                         {"^blood_group", Strategy::MissingAsCategory, 0.0, "", {}},
                         {"^icd_", Strategy::MissingAsCategory, 0.0, "", {}},
                         {"^cpr_duration_min$", Strategy::ConfigRule, 0.0, "cpr_note", {{"no resuscitation", 0.0}}},
                         {"^(body_weight_kg|height_cm)$", Strategy::NormalSample95, 0.0, "", {}},
                         {".*", Strategy::Auto, 0.0, "", {}}};
  ec.domain.dichotomies = {{"ekg_qrs", {"lbbb", "rbbb", "wide"}, {"normal"}}};
  const auto p = FeaturePipeline::fit(cohort, split.train_ids, ec, 5);
  const auto test = p.transform(cohort, split.test_ids);
  CHECK(test.values.count_missing() == 0);
  CHECK(p.plan().converged);
  CHECK(p.plan().rounds.size() <= 10);
  // Normal-sample columns stay within the train mean +- 1.96 sd... of the split they were drawn on.
  const auto raw = p.encode(cohort, split.test_ids);
  for (const std::string name : {"body_weight_kg", "height_cm"}) {
    const auto ci = test.column_index(name);
    const auto ri = raw.column_index(name);
    REQUIRE(ci);
    REQUIRE(ri);
    double s = 0, s2 = 0, n = 0;
    for (std::size_t r = 0; r < raw.rows(); ++r) {
      const double v = raw.values(r, *ri);
      if (is_missing(v)) continue;
      s += v, s2 += v * v, n += 1;
    }
    const double mu = s / n, sd = std::sqrt(s2 / n - mu * mu);
    for (std::size_t r = 0; r < raw.rows(); ++r)
      if (is_missing(raw.values(r, *ri))) {
        CHECK(test.values(r, *ci) >= mu - kCentral95 * sd - 1e-9);
        CHECK(test.values(r, *ci) <= mu + kCentral95 * sd + 1e-9);
      }
  }
  // Serialization reproduces the transform bit for bit.
  const auto back = FeaturePipeline::from_json(p.to_json());
  CHECK(back.transform(cohort, split.test_ids).values == test.values);
  // Serial and parallel encodings agree.
  CHECK(p.transform(cohort, split.test_ids, Exec::Serial).values == test.values);
}

TEST_CASE("a feature with gaps and no matching rule is a plan error") {
  FeatureMatrix m;
  m.values = Matrix(4, 1);
  m.values(0, 0) = kMissing;
  for (int i = 1; i < 4; ++i) m.values(i, 0) = i;
  m.feature_names = {"x"};
  m.feature_types = {FeatureType::Numeric};
  m.labels = {0, 1, 0, 1};
  m.donor_ids = {"a", "b", "c", "d"};
  StrategyConfig cfg;
  cfg.rules = {{"^y$", Strategy::Auto, 0.0, "", {}}};
  CHECK_THROWS_AS(fit_imputation_plan(m, cfg, 1), PlanError);
}
