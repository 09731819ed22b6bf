#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdisc/core/matrix.hpp"
#include "kdisc/core/parallel.hpp"
#include "kdisc/models/hyperparams.hpp"

namespace kdisc::optimize {

// ---------------------------------------------------------------- ledger

struct TrialRecord {
  std::size_t index = 0;
  std::string kind;  ///< "genome" or "hp-point"
  nlohmann::json payload = nlohmann::json::object();
  std::vector<double> fold_scores;  ///< normed MCC per fold (and inner trial)
  double penalty = 0.0;
  double loss = 0.0;
  double wall_seconds = 0.0;
  bool failed = false;
  std::string error;

  /// Wall time is left out when include_time is false so ledgers from two
  /// runs can be compared byte for byte.
  nlohmann::json to_json(bool include_time = true) const;
  static TrialRecord from_json(const nlohmann::json& j);
};

/// Append-only trial list. Appends are serialized; when a path is given every
/// record is also written as one JSON line as soon as it is appended.
class TrialLedger {
 public:
  TrialLedger() = default;
  explicit TrialLedger(std::string jsonl_path);

  void append(const TrialRecord& r);
  const std::vector<TrialRecord>& trials() const { return trials_; }
  std::size_t size() const { return trials_.size(); }
  /// Best loss among trials 0..i for every i.
  std::vector<double> running_min() const;
  std::string to_jsonl(bool include_time = true) const;

  static std::vector<TrialRecord> read_jsonl(const std::string& path);

 private:
  std::string path_;
  std::vector<TrialRecord> trials_;
  std::mutex mu_;
};

// ------------------------------------------------------ cross validation

/// Fold id in [0, k) per row. Each class is shuffled and dealt round-robin,
/// continuing the deal across classes, so fold sizes differ by at most one.
/// If a fold lacks a class the deal is retried once with a fresh shuffle;
/// a second failure raises SplitError.
std::vector<int> stratified_folds(const Labels& y, int k, std::uint64_t seed);

/// Fits on (X_train, y_train) and returns P(transplanted) for X_test.
using FitPredict = std::function<std::vector<double>(const Matrix& X_train, const Labels& y_train,
                                                     const Matrix& X_test, std::uint64_t seed)>;

/// FitPredict for a model family. Families that stop early on a validation
/// set (GBT, MLP) carve a stratified 10% of the training part for it.
FitPredict family_fit_predict(models::Family family, const models::HyperParams& hp);

/// Normed MCC on each held-out fold.
std::vector<double> cross_validate(const FitPredict& fit, const Matrix& X, const Labels& y, int k,
                                   std::uint64_t seed);
std::vector<double> cross_validate(const FitPredict& fit, const Matrix& X, const Labels& y,
                                   const std::vector<int>& folds, int k, std::uint64_t seed);

// ------------------------------------------------------- feature subsets

using Genome = std::vector<char>;

struct SubsetEvalConfig {
  models::HyperParamSpace space;
  int inner_trials = 10;
  int folds = 3;
  double lambda = 0.0005;
  /// When set, every genome is scored on the same folds (drawn from this
  /// seed) so differences between genomes are not masked by fold noise.
  bool common_folds = true;
  std::uint64_t fold_seed = 0;
};

struct SubsetEvaluation {
  double loss = 1.0;
  double penalty = 0.0;
  std::size_t n_selected = 0;
  std::vector<double> fold_scores;
  std::vector<models::HyperParams> hp_points;
};

/// Draws inner_trials random points from the space, cross-validates each and
/// returns mean(1 - normed MCC) + lambda * n_selected. An empty genome gets
/// the worst loss 1 without fitting anything.
SubsetEvaluation evaluate_feature_subset(const Genome& genome, const SubsetEvalConfig& cfg, const Matrix& X,
                                         const Labels& y, std::uint64_t seed);

using GenomeObjective = std::function<SubsetEvaluation(const Genome& genome, std::uint64_t trial_seed)>;

struct Nsga2Config {
  std::size_t budget = 1000;     ///< evaluated genomes, initial population included
  std::size_t population = 50;
  double crossover_rate = 0.9;
  double mutation_rate = 0.0;    ///< 0 means 1 / genome length
  double init_probability = 0.5;
  bool eliminate_duplicates = true;  ///< redraw offspring equal to an evaluated genome
};

struct Nsga2Result {
  Genome best;
  double best_loss = 0.0;
  std::size_t best_trial = 0;
  std::size_t evaluations = 0;
  std::size_t generations = 0;
};

/// Single-objective NSGA-II: nondominated sorting reduces to sorting by loss.
/// Offspring of a generation are evaluated in parallel, each with the stream
/// (seed, trial index); records are appended in trial order.
Nsga2Result nsga2_feature_search(std::size_t genome_length, const GenomeObjective& objective,
                                 const Nsga2Config& cfg, std::uint64_t seed, TrialLedger* ledger = nullptr,
                                 Exec exec = Exec::Parallel);

std::string genome_string(const Genome& g);
Genome genome_from_string(const std::string& s);
std::vector<std::size_t> selected_indices(const Genome& g);

// -------------------------------------------------------------------- TPE

struct TpeConfig {
  std::size_t n_trials = 300;
  double gamma = 0.25;
  std::size_t n_startup = 10;
  std::size_t n_candidates = 24;
  /// Loss recorded for trials whose objective throws or is not finite.
  double failure_loss = 1.0;
};

struct TpeResult {
  models::HyperParams best;
  double best_loss = 0.0;
  std::size_t best_trial = 0;
  std::vector<double> losses;
  std::vector<models::HyperParams> points;
};

/// Objective value of one hp point. Converts from a bare loss.
struct HpOutcome {
  double loss = 0.0;
  std::vector<double> fold_scores;

  HpOutcome(double l = 0.0) : loss(l) {}  // NOLINT(google-explicit-constructor)
  HpOutcome(double l, std::vector<double> folds) : loss(l), fold_scores(std::move(folds)) {}
};

using HpObjective = std::function<HpOutcome(const models::HyperParams& hp, std::uint64_t trial_seed)>;

/// Tree-structured Parzen estimator over independent parameters. Startup
/// trials are random and may run in parallel; later trials are sequential.
TpeResult tpe_optimize(const models::HyperParamSpace& space, const HpObjective& objective,
                       const TpeConfig& cfg, std::uint64_t seed, TrialLedger* ledger = nullptr,
                       Exec exec = Exec::Parallel);

/// Parzen density of one parameter, exposed for tests. `observations` are in
/// the parameter's natural units.
struct ParzenEstimator {
  models::ParamDomain domain;
  std::vector<double> mus;     ///< transformed-space centres, prior last
  std::vector<double> sigmas;
  std::vector<double> weights;
  std::vector<double> cat_probs;  ///< categorical: smoothed frequencies

  ParzenEstimator(const models::ParamDomain& d, const std::vector<nlohmann::json>& observations);
  nlohmann::json sample(Rng& rng) const;
  double log_density(const nlohmann::json& v) const;
};

}  // namespace kdisc::optimize
