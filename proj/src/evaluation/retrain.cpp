#include "kdisc/evaluation/retrain.hpp"

#include <chrono>

#include "kdisc/core/error.hpp"

namespace kdisc::evaluation {

std::vector<SeedRunResult> seeded_retrain(models::Family family, const models::HyperParams& hp,
                                          const SplitData& data,
                                          const std::vector<std::uint64_t>& seeds, Exec exec,
                                          bool keep_models) {
  std::vector<SeedRunResult> out(seeds.size());
  auto run = [&](std::size_t i) {
    SeedRunResult& r = out[i];
    r.family = family;
    r.seed = seeds[i];
    const auto start = std::chrono::steady_clock::now();
    try {
      models::TrainSet ts{&data.X_train, &data.y_train, &data.X_val, &data.y_val};
      std::shared_ptr<models::Classifier> model = models::fit_classifier(family, hp, seeds[i], ts);
      r.test_proba = model->predict_proba(data.X_test);
      r.test_raw = model->raw_scores(data.X_test);
      r.val_raw = model->raw_scores(data.X_val);
      r.test = evaluate_predictions(data.y_test, r.test_proba);
      r.ok = true;
      if (keep_models) r.model = std::move(model);
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
    r.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  const auto n = static_cast<long long>(seeds.size());
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < n; ++i) run(static_cast<std::size_t>(i));
  } else {
    for (long long i = 0; i < n; ++i) run(static_cast<std::size_t>(i));
  }
  std::size_t ok = 0;
  for (const auto& r : out) ok += r.ok ? 1 : 0;
  if (static_cast<double>(ok) < 0.9 * static_cast<double>(seeds.size())) {
    std::string first;
    for (const auto& r : out)
      if (!r.ok) {
        first = r.error;
        break;
      }
    throw FitError(std::string("only ") + std::to_string(ok) + " of " + std::to_string(seeds.size()) +
                   " seeded runs of " + models::to_string(family) + " succeeded; first error: " + first);
  }
  return out;
}

}  // namespace kdisc::evaluation
