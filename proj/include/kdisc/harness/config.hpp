#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdisc/features/pipeline.hpp"
#include "kdisc/models/hyperparams.hpp"
#include "kdisc/synthgen.hpp"

namespace kdisc::harness {

struct SelectionBudget {
  std::size_t budget = 200;     ///< evaluated genomes
  std::size_t population = 50;
  int inner_trials = 10;        ///< random HP points per genome
  int folds = 3;
  double lambda = 0.0005;       ///< penalty per selected feature
};

struct TuningBudget {
  std::size_t n_trials = 40;
  int folds = 5;
  double gamma = 0.25;
  std::size_t n_startup = 10;
  std::size_t n_candidates = 24;
};

struct ExplainBudget {
  std::size_t background = 200;
  std::size_t max_samples = 100;
  std::size_t n_permutations = 10;
};

/// Everything a run reads from the config file. Unknown keys are rejected so
/// typos do not silently fall back to defaults.
struct PipelineConfig {
  std::uint64_t master_seed = 20240601;
  std::filesystem::path work_dir = "work";
  std::filesystem::path cohort;  ///< empty: the synth stage generates one
  std::vector<models::Family> families;
  synth::SynthConfig synth;
  features::EngineeringConfig engineering;
  SelectionBudget selection;
  TuningBudget tuning;
  std::size_t seeds = 10;
  ExplainBudget explain;
  std::size_t calibration_bins = 10;
  std::string space = "desk";  ///< "desk" or "paper"
  std::map<std::string, bool> stages;  ///< stage name -> enabled (default true)
  nlohmann::json source = nlohmann::json::object();

  /// Relative paths in the file are taken relative to `base_dir`.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// Study budgets: 1000 genomes, 300 TPE trials, 30 seeds, 10 inner trials.
  void apply_paper_budgets();
  /// Throws ConfigError when a budget is below its minimum.
  void validate() const;

  bool stage_enabled(const std::string& name) const;
  models::HyperParamSpace space_for(models::Family f) const;
  /// Base families that must be fitted: the listed ones plus the ensemble's members.
  std::vector<models::Family> fitted_families() const;
  /// Families the ensemble averages (listed base families except the tree).
  std::vector<models::Family> ensemble_members() const;
  bool has_ensemble() const;
  /// Every reported model in config order, ensemble included.
  std::vector<std::string> model_names() const;
};

}  // namespace kdisc::harness
