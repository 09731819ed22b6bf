#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "kdisc/core/parallel.hpp"
#include "kdisc/evaluation/metrics.hpp"
#include "kdisc/models/classifier.hpp"

namespace kdisc::evaluation {

/// Train / validation / test matrices of one model, already restricted to
/// its selected features and standardized with train-only parameters.
struct SplitData {
  Matrix X_train, X_val, X_test;
  Labels y_train, y_val, y_test;
};

struct SeedRunResult {
  models::Family family = models::Family::LogisticRegression;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  MetricSet test;
  double wall_seconds = 0.0;
  std::vector<double> test_proba;
  std::vector<double> val_raw;   ///< raw scores on validation, for calibration
  std::vector<double> test_raw;  ///< raw scores on test
  std::shared_ptr<models::Classifier> model;  ///< kept only when requested
};

/// Fits one model per seed on the train rows (the validation rows drive
/// early stopping) and scores it on the test rows. Failures are recorded
/// per seed; fewer than 90% successes raise FitError. Seeds run in parallel
/// under Exec::Parallel with one model and stream per seed.
std::vector<SeedRunResult> seeded_retrain(models::Family family, const models::HyperParams& hp,
                                          const SplitData& data,
                                          const std::vector<std::uint64_t>& seeds,
                                          Exec exec = Exec::Parallel, bool keep_models = false);

}  // namespace kdisc::evaluation
