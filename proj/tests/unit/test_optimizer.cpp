#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "kdisc/core/error.hpp"
#include "kdisc/core/rng.hpp"
#include "kdisc/optimizer.hpp"
#include "kdisc/synthgen.hpp"

using namespace kdisc;
using namespace kdisc::optimize;

namespace {

// Hamming distance to a fixed target, scaled to [0, 1].
GenomeObjective hamming_to(const Genome& target) {
  return [target](const Genome& g, std::uint64_t) {
    SubsetEvaluation e;
    double d = 0;
    for (std::size_t i = 0; i < g.size(); ++i) d += g[i] != target[i];
    e.loss = d / static_cast<double>(g.size());
    e.n_selected = selected_indices(g).size();
    return e;
  };
}

models::HyperParamSpace quadratic_space() {
  models::HyperParamSpace s;
  models::ParamDomain x;
  x.name = "x";
  x.kind = models::ParamDomain::Kind::Float;
  x.lo = -5;
  x.hi = 5;
  models::ParamDomain k;
  k.name = "k";
  k.kind = models::ParamDomain::Kind::Categorical;
  k.choices = {"a", "b", "c"};
  s.params = {x, k};
  return s;
}

}  // namespace

TEST_CASE("stratified folds are balanced and contain both classes") {
  Rng r(1);
  for (int rep = 0; rep < 50; ++rep) {
    const auto n = static_cast<std::size_t>(r.integer(20, 200));
    Labels y(n);
    for (auto& v : y) v = r.bernoulli(0.25);
    y[0] = 1, y[1] = 0, y[2] = 1, y[3] = 0, y[4] = 1, y[5] = 0;
    const int k = static_cast<int>(r.integer(2, 3));
    const auto f = stratified_folds(y, k, static_cast<std::uint64_t>(rep));
    std::vector<int> size(k, 0), pos(k, 0);
    for (std::size_t i = 0; i < n; ++i) size[f[i]]++, pos[f[i]] += y[i];
    const auto [lo, hi] = std::minmax_element(size.begin(), size.end());
    CHECK(*hi - *lo <= 1);
    for (int j = 0; j < k; ++j) {
      CHECK(pos[j] > 0);
      CHECK(pos[j] < size[j]);
    }
    CHECK(f == stratified_folds(y, k, static_cast<std::uint64_t>(rep)));
  }
  CHECK_THROWS_AS(stratified_folds(Labels{1, 0, 1}, 2, 1), SplitError);
  CHECK_THROWS_AS(stratified_folds(Labels{1, 0, 1, 0}, 1, 1), ConfigError);
}

TEST_CASE("genome strings round-trip") {
  const Genome g{1, 0, 0, 1, 1};
  CHECK(genome_string(g) == "10011");
  CHECK(genome_from_string("10011") == g);
  CHECK(selected_indices(g) == std::vector<std::size_t>{0, 3, 4});
  CHECK_THROWS_AS(genome_from_string("10x"), DataError);
}

TEST_CASE("NSGA-II spends exactly its budget and finds an easy target") {
  Genome target(24);
  for (std::size_t i = 0; i < 24; ++i) target[i] = i % 3 == 0;
  Nsga2Config cfg;
  cfg.budget = 700;
  cfg.population = 50;
  TrialLedger ledger;
  const auto r = nsga2_feature_search(24, hamming_to(target), cfg, 5, &ledger, Exec::Serial);
  CHECK(r.evaluations == 700);
  CHECK(ledger.size() == 700);
  CHECK(r.best_loss == 0.0);
  CHECK(r.best == target);
  CHECK(ledger.trials()[r.best_trial].loss == r.best_loss);
  // Duplicates are redrawn, so every evaluated genome is new.
  std::set<std::string> seen;
  for (const auto& t : ledger.trials()) seen.insert(t.payload.at("bits").get<std::string>());
  CHECK(seen.size() == 700);
  const auto rm = ledger.running_min();
  for (std::size_t i = 1; i < rm.size(); ++i) CHECK(rm[i] <= rm[i - 1]);
}

TEST_CASE("NSGA-II budget equal to the population stops after initialization") {
  Nsga2Config cfg;
  cfg.budget = 20;
  cfg.population = 20;
  const auto r = nsga2_feature_search(10, hamming_to(Genome(10, 1)), cfg, 1);
  CHECK(r.evaluations == 20);
  CHECK(r.generations == 0);
  cfg.budget = 19;
  CHECK_THROWS_AS(nsga2_feature_search(10, hamming_to(Genome(10, 1)), cfg, 1), ConfigError);
  cfg.budget = 10;
  cfg.population = 1;
  CHECK_THROWS_AS(nsga2_feature_search(10, hamming_to(Genome(10, 1)), cfg, 1), ConfigError);
}

TEST_CASE("NSGA-II ledgers match between serial and parallel evaluation") {
  Genome target(16, 0);
  target[3] = target[9] = 1;
  Nsga2Config cfg;
  cfg.budget = 130;
  cfg.population = 26;
  TrialLedger a, b;
  nsga2_feature_search(16, hamming_to(target), cfg, 9, &a, Exec::Serial);
  nsga2_feature_search(16, hamming_to(target), cfg, 9, &b, Exec::Parallel);
  CHECK(a.to_jsonl(false) == b.to_jsonl(false));
}

TEST_CASE("a throwing objective is recorded as a failed trial") {
  Nsga2Config cfg;
  cfg.budget = 10;
  cfg.population = 10;
  TrialLedger ledger;
  const auto r = nsga2_feature_search(
      6, [](const Genome&, std::uint64_t) -> SubsetEvaluation { throw FitError("boom"); }, cfg, 1, &ledger);
  CHECK(r.evaluations == 10);
  for (const auto& t : ledger.trials()) {
    CHECK(t.failed);
    CHECK(t.loss == 1.0);
  }
}

TEST_CASE("ledger round-trips through JSON lines") {
  const auto path = (std::filesystem::temp_directory_path() / "kdisc_ledger_test.jsonl").string();
  std::filesystem::remove(path);
  {
    TrialLedger l(path);
    TrialRecord t;
    t.kind = "hp-point";
    t.payload = {{"C", 0.1}};
    t.fold_scores = {0.6, 0.7};
    t.loss = 0.35;
    t.wall_seconds = 1.25;
    l.append(t);
    t.index = 1;
    t.failed = true;
    t.error = "diverged";
    l.append(t);
  }
  const auto back = TrialLedger::read_jsonl(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].payload == nlohmann::json{{"C", 0.1}});
  CHECK(back[0].fold_scores == std::vector<double>{0.6, 0.7});
  CHECK(back[1].failed);
  CHECK(back[1].error == "diverged");
  CHECK(back[0].wall_seconds == 1.25);
  CHECK_FALSE(back[0].to_json(false).contains("wall_seconds"));
  std::filesystem::remove(path);
}

TEST_CASE("TPE concentrates on the minimum of a quadratic") {
  const auto space = quadratic_space();
  HpObjective obj = [](const models::HyperParams& hp, std::uint64_t) {
    const double x = hp.at("x").get<double>();
    return HpOutcome((x - 1.3) * (x - 1.3) + (hp.at("k") == "b" ? 0.0 : 1.0));
  };
  TpeConfig cfg;
  cfg.n_trials = 80;
  TrialLedger ledger;
  const auto r = tpe_optimize(space, obj, cfg, 3, &ledger);
  CHECK(ledger.size() == 80);
  CHECK(r.losses.size() == 80);
  CHECK(r.best_loss < 0.05);
  CHECK(r.best.at("k") == "b");
  // Model-guided trials beat the random startup trials on average.
  double startup = 0, guided = 0;
  for (std::size_t i = 0; i < 10; ++i) startup += r.losses[i] / 10;
  for (std::size_t i = 40; i < 80; ++i) guided += r.losses[i] / 40;
  CHECK(guided < startup);
  CHECK(tpe_optimize(space, obj, cfg, 3).losses == r.losses);
}

TEST_CASE("TPE records failures with the failure loss") {
  TpeConfig cfg;
  cfg.n_trials = 12;
  HpObjective bad = [](const models::HyperParams&, std::uint64_t) -> HpOutcome {
    return HpOutcome(std::nan(""));
  };
  const auto r = tpe_optimize(quadratic_space(), bad, cfg, 1);
  for (double l : r.losses) CHECK(l == 1.0);
  cfg.gamma = 1.0;
  CHECK_THROWS_AS(tpe_optimize(quadratic_space(), bad, cfg, 1), ConfigError);
}

TEST_CASE("Parzen categorical probabilities are a distribution") {
  const auto space = quadratic_space();
  ParzenEstimator pe(space.params[1], {"a", "a", "b"});
  double s = 0;
  for (double p : pe.cat_probs) s += p;
  CHECK(s == doctest::Approx(1.0));
  CHECK(pe.log_density("a") > pe.log_density("c"));
}

TEST_CASE("subset evaluation: empty genome, penalty and common folds") {
  synth::PlantedConfig pc;
  pc.n_rows = 200;
  pc.n_informative = 2;
  pc.n_noise = 4;
  const auto d = synth::generate_planted(pc);
  SubsetEvalConfig cfg;
  cfg.space = models::desk_space(models::Family::LogisticRegression);
  cfg.space.fixed = {{"max_epochs", 50}};
  cfg.inner_trials = 2;
  cfg.lambda = 0.01;
  const auto empty = evaluate_feature_subset(Genome(6, 0), cfg, d.X, d.y, 1);
  CHECK(empty.loss == 1.0);
  CHECK(empty.hp_points.empty());
  const Genome g{1, 1, 0, 0, 0, 1};
  const auto e = evaluate_feature_subset(g, cfg, d.X, d.y, 1);
  CHECK(e.n_selected == 3);
  CHECK(e.penalty == doctest::Approx(0.03));
  CHECK(e.fold_scores.size() == 6);
  CHECK(e.hp_points.size() == 2);
  double mean = 0;
  for (double s : e.fold_scores) mean += (1 - s) / 6;
  CHECK(e.loss == doctest::Approx(mean + 0.03));
  CHECK(evaluate_feature_subset(g, cfg, d.X, d.y, 1).loss == e.loss);
  CHECK_THROWS_AS(evaluate_feature_subset(Genome(5, 1), cfg, d.X, d.y, 1), DataError);
}
